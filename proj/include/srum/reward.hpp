// Copyright 2026 The SRUM Authors
// SPDX-License-Identifier: Apache-2.0
//
// Converts judgments into training signals: a dense per-pixel reward map
// in [-1,1] and a normalized global weight in [0,1].
#pragma once

#include <utility>
#include <vector>

#include "srum/judge.hpp"

namespace srum {

struct RewardMap {
    int height = 0;
    int width = 0;
    std::vector<float> values; // height*width, row-major, in [-1,1]

    static RewardMap filled(int h, int w, float v) {
        RewardMap m;
        m.height = h;
        m.width = w;
        m.values.assign(static_cast<std::size_t>(h) * w, v);
        return m;
    }
    float at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
    float& at(int y, int x) { return values[static_cast<std::size_t>(y) * width + x]; }
    bool operator==(const RewardMap&) const = default;
};

struct GlobalWeight {
    double alpha = 0.0;
};

// alpha = (score + 1) / 2; throws on input outside [-1,1].
GlobalWeight normalize_global(double global_score);

// Uncovered pixels get `background_value`; covered pixels take the score
// of the smallest-area covering box, ties going to the larger region id.
RewardMap rasterize_rewards(const std::vector<RegionJudgment>& regions, int height, int width,
                            float background_value = 0.0f);

// The sparse 0-1 ablation signal: constant-one map, alpha thresholded at 0.5.
std::pair<RewardMap, GlobalWeight> sparsify(const RewardMap& map, GlobalWeight alpha);

} // namespace srum
