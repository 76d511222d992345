// Copyright 2026 The SRUM Authors
// SPDX-License-Identifier: Apache-2.0
#include "srum/reward.hpp"

#include <algorithm>
#include <stdexcept>

namespace srum {

GlobalWeight normalize_global(double global_score) {
    if (global_score < -1.0 || global_score > 1.0) {
        throw std::invalid_argument("global score outside [-1,1]");
    }
    return GlobalWeight{(global_score + 1.0) / 2.0};
}

RewardMap rasterize_rewards(const std::vector<RegionJudgment>& regions, int height, int width,
                            float background_value) {
    for (const auto& r : regions) {
        require_valid(r.bbox, height, width);
    }
    RewardMap map = RewardMap::filled(height, width, background_value);
    // Paint in (area desc, region_id asc) order: the last writer for a
    // pixel is then the smallest covering box, larger id on area ties.
    std::vector<const RegionJudgment*> order;
    order.reserve(regions.size());
    for (const auto& r : regions) order.push_back(&r);
    std::sort(order.begin(), order.end(), [](const RegionJudgment* a, const RegionJudgment* b) {
        if (a->bbox.area() != b->bbox.area()) return a->bbox.area() > b->bbox.area();
        return a->region_id < b->region_id;
    });
    for (const auto* r : order) {
        const float s = static_cast<float>(r->score);
        for (int y = r->bbox.y0; y < r->bbox.y1; ++y) {
            for (int x = r->bbox.x0; x < r->bbox.x1; ++x) {
                map.at(y, x) = s;
            }
        }
    }
    return map;
}

std::pair<RewardMap, GlobalWeight> sparsify(const RewardMap& map, GlobalWeight alpha) {
    RewardMap ones = RewardMap::filled(map.height, map.width, 1.0f);
    return {std::move(ones), GlobalWeight{alpha.alpha >= 0.5 ? 1.0 : 0.0}};
}

} // namespace srum
