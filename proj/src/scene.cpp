// Copyright 2026 The SRUM Authors
// SPDX-License-Identifier: Apache-2.0
#include "srum/scene.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace srum {

std::string shape_name(Shape s) {
    switch (s) {
    case Shape::square: return "square";
    case Shape::circle: return "circle";
    case Shape::triangle: return "triangle";
    }
    throw std::invalid_argument("bad shape");
}

std::string color_name(Color c) {
    switch (c) {
    case Color::red: return "red";
    case Color::green: return "green";
    case Color::blue: return "blue";
    case Color::yellow: return "yellow";
    }
    throw std::invalid_argument("bad color");
}

std::string predicate_name(Predicate p) {
    switch (p) {
    case Predicate::left_of: return "left-of";
    case Predicate::right_of: return "right-of";
    case Predicate::above: return "above";
    case Predicate::below: return "below";
    }
    throw std::invalid_argument("bad predicate");
}

Shape shape_from_name(const std::string& s) {
    if (s == "square") return Shape::square;
    if (s == "circle") return Shape::circle;
    if (s == "triangle") return Shape::triangle;
    throw std::invalid_argument("unknown shape: " + s);
}

Color color_from_name(const std::string& s) {
    if (s == "red") return Color::red;
    if (s == "green") return Color::green;
    if (s == "blue") return Color::blue;
    if (s == "yellow") return Color::yellow;
    throw std::invalid_argument("unknown color: " + s);
}

Predicate predicate_from_name(const std::string& s) {
    if (s == "left-of") return Predicate::left_of;
    if (s == "right-of") return Predicate::right_of;
    if (s == "above") return Predicate::above;
    if (s == "below") return Predicate::below;
    throw std::invalid_argument("unknown predicate: " + s);
}

std::array<float, 3> color_rgb(Color c) {
    switch (c) {
    case Color::red: return {1.0f, 0.0f, 0.0f};
    case Color::green: return {0.0f, 1.0f, 0.0f};
    case Color::blue: return {0.0f, 0.0f, 1.0f};
    case Color::yellow: return {1.0f, 1.0f, 0.0f};
    }
    throw std::invalid_argument("bad color");
}

namespace {

bool cells_consistent(Predicate p, const SceneObject& subj, const SceneObject& obj) {
    switch (p) {
    case Predicate::left_of: return subj.col < obj.col;
    case Predicate::right_of: return subj.col > obj.col;
    case Predicate::above: return subj.row < obj.row;
    case Predicate::below: return subj.row > obj.row;
    }
    return false;
}

} // namespace

void validate_spec(const SceneSpec& spec, int grid) {
    if (spec.objects.empty() || spec.objects.size() > 4) {
        throw std::invalid_argument("spec must have between 1 and 4 objects");
    }
    for (std::size_t i = 0; i < spec.objects.size(); ++i) {
        const auto& o = spec.objects[i];
        if (o.row < 0 || o.row >= grid || o.col < 0 || o.col >= grid) {
            throw std::invalid_argument("object cell outside placement grid");
        }
        for (std::size_t j = i + 1; j < spec.objects.size(); ++j) {
            if (o.row == spec.objects[j].row && o.col == spec.objects[j].col) {
                throw std::invalid_argument("objects share a placement cell");
            }
        }
    }
    for (const auto& r : spec.relations) {
        const int n = static_cast<int>(spec.objects.size());
        if (r.subject < 0 || r.subject >= n || r.object < 0 || r.object >= n ||
            r.subject == r.object) {
            throw std::invalid_argument("relation references invalid object indices");
        }
        if (!cells_consistent(r.predicate, spec.objects[r.subject], spec.objects[r.object])) {
            throw std::invalid_argument("relation inconsistent with object cells");
        }
    }
    if (spec.has_spatial_directive != !spec.relations.empty()) {
        throw std::invalid_argument("has_spatial_directive must mirror relation presence");
    }
    for (const auto& cc : spec.count_constraints) {
        if (cc.count < 1) {
            throw std::invalid_argument("count constraint below 1");
        }
    }
}

SceneSpec sample_spec(Rng& rng, Difficulty difficulty, int grid) {
    SceneSpec spec;
    const int cells = grid * grid;
    auto random_identity = [&rng]() {
        return std::pair<Shape, Color>(static_cast<Shape>(rng.uniform_int(0, kShapeCount - 1)),
                                       static_cast<Color>(rng.uniform_int(0, kColorCount - 1)));
    };
    auto distinct_cells = [&](int n) {
        std::vector<int> all(cells);
        std::iota(all.begin(), all.end(), 0);
        for (int i = 0; i < n; ++i) {
            const int j = rng.uniform_int(i, cells - 1);
            std::swap(all[i], all[j]);
        }
        all.resize(n);
        return all;
    };

    switch (difficulty) {
    case Difficulty::single_object: {
        const auto [shape, color] = random_identity();
        const int cell = rng.uniform_int(0, cells - 1);
        spec.objects.push_back({shape, color, cell / grid, cell % grid});
        break;
    }
    case Difficulty::two_object_relation: {
        const auto a = random_identity();
        const auto b = random_identity();
        const auto cc = distinct_cells(2);
        spec.objects.push_back({a.first, a.second, cc[0] / grid, cc[0] % grid});
        spec.objects.push_back({b.first, b.second, cc[1] / grid, cc[1] % grid});
        std::vector<Relation> candidates;
        for (int subj = 0; subj < 2; ++subj) {
            for (int p = 0; p < kPredicateCount; ++p) {
                Relation r{subj, static_cast<Predicate>(p), 1 - subj};
                if (cells_consistent(r.predicate, spec.objects[r.subject],
                                     spec.objects[r.object])) {
                    candidates.push_back(r);
                }
            }
        }
        spec.relations.push_back(candidates[rng.uniform_int(
            0, static_cast<int>(candidates.size()) - 1)]);
        spec.has_spatial_directive = true;
        break;
    }
    case Difficulty::counting: {
        const auto [shape, color] = random_identity();
        const int n = rng.uniform_int(2, std::min(4, cells));
        for (int cell : distinct_cells(n)) {
            spec.objects.push_back({shape, color, cell / grid, cell % grid});
        }
        spec.count_constraints.push_back({shape, color, n});
        break;
    }
    }
    validate_spec(spec, grid);
    return spec;
}

int stamp_side(const SceneConfig& cfg) {
    return std::min(cfg.height, cfg.width) / cfg.grid - 2;
}

BBox stamp_box(const SceneConfig& cfg, int row, int col) {
    const int cell_h = cfg.height / cfg.grid;
    const int cell_w = cfg.width / cfg.grid;
    const int s = stamp_side(cfg);
    const int y0 = row * cell_h + (cell_h - s) / 2;
    const int x0 = col * cell_w + (cell_w - s) / 2;
    return BBox{x0, y0, x0 + s, y0 + s};
}

std::vector<std::uint8_t> shape_mask(Shape shape, int h, int w) {
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(h) * w, 0);
    const double cy = (h - 1) / 2.0;
    const double cx = (w - 1) / 2.0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            bool in = false;
            switch (shape) {
            case Shape::square:
                in = true;
                break;
            case Shape::circle: {
                const double ry = h / 2.0 - 0.25;
                const double rx = w / 2.0 - 0.25;
                const double dy = (y - cy) / ry;
                const double dx = (x - cx) / rx;
                in = dy * dy + dx * dx <= 1.0;
                break;
            }
            case Shape::triangle: {
                const double half = (h > 1 ? static_cast<double>(y) / (h - 1) : 1.0) *
                                        ((w - 1) / 2.0) +
                                    0.25;
                in = std::abs(x - cx) <= half;
                break;
            }
            }
            mask[static_cast<std::size_t>(y) * w + x] = in ? 1 : 0;
        }
    }
    return mask;
}

Raster render(const SceneSpec& spec, const SceneConfig& cfg) {
    validate_spec(spec, cfg.grid);
    if (stamp_side(cfg) < 3) {
        throw std::invalid_argument("raster too small to hold one stamp per cell");
    }
    Raster raster = Raster::filled(cfg.height, cfg.width, 0.5f);
    const int s = stamp_side(cfg);
    for (const auto& obj : spec.objects) {
        const BBox box = stamp_box(cfg, obj.row, obj.col);
        const auto mask = shape_mask(obj.shape, s, s);
        const auto rgb = color_rgb(obj.color);
        for (int y = 0; y < s; ++y) {
            for (int x = 0; x < s; ++x) {
                if (mask[static_cast<std::size_t>(y) * s + x]) {
                    for (int c = 0; c < 3; ++c) {
                        raster.at(box.y0 + y, box.x0 + x, c) = rgb[c];
                    }
                }
            }
        }
    }
    return raster;
}

namespace {

std::string number_word(int n) {
    switch (n) {
    case 1: return "one";
    case 2: return "two";
    case 3: return "three";
    case 4: return "four";
    }
    throw std::invalid_argument("number word out of range");
}

std::string object_phrase(const SceneObject& o) {
    return "a " + color_name(o.color) + " " + shape_name(o.shape);
}

std::string predicate_phrase(Predicate p) {
    switch (p) {
    case Predicate::left_of: return "to the left of";
    case Predicate::right_of: return "to the right of";
    case Predicate::above: return "above";
    case Predicate::below: return "below";
    }
    throw std::invalid_argument("bad predicate");
}

} // namespace

std::string canonical_prompt(const SceneSpec& spec) {
    if (!spec.count_constraints.empty()) {
        std::string out;
        for (std::size_t i = 0; i < spec.count_constraints.size(); ++i) {
            const auto& cc = spec.count_constraints[i];
            if (i > 0) out += " and ";
            out += number_word(cc.count) + " " + color_name(cc.color) + " " +
                   shape_name(cc.shape) + (cc.count > 1 ? "s" : "");
        }
        return out;
    }
    if (!spec.relations.empty()) {
        std::string out;
        for (std::size_t i = 0; i < spec.relations.size(); ++i) {
            const auto& r = spec.relations[i];
            if (i > 0) out += " and ";
            out += object_phrase(spec.objects[r.subject]) + " " +
                   predicate_phrase(r.predicate) + " " + object_phrase(spec.objects[r.object]);
        }
        return out;
    }
    std::string out;
    for (std::size_t i = 0; i < spec.objects.size(); ++i) {
        if (i > 0) out += " and ";
        out += object_phrase(spec.objects[i]);
    }
    return out;
}

TemplateMatch best_template_match(const Raster& raster, const BBox& box) {
    require_valid(box, raster.height, raster.width);
    const int h = box.height();
    const int w = box.width();
    std::vector<double> dev(static_cast<std::size_t>(h) * w * 3);
    double max_abs = 0.0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                const double d = raster.at(box.y0 + y, box.x0 + x, c) - 0.5;
                dev[(static_cast<std::size_t>(y) * w + x) * 3 + c] = d;
                max_abs = std::max(max_abs, std::abs(d));
            }
        }
    }
    TemplateMatch best;
    if (max_abs < 0.15) {
        return best; // uniform background, nothing to identify
    }
    best.occupied = true;
    double patch_norm2 = 0.0;
    for (double d : dev) patch_norm2 += d * d;
    for (int si = 0; si < kShapeCount; ++si) {
        const auto mask = shape_mask(static_cast<Shape>(si), h, w);
        for (int ci = 0; ci < kColorCount; ++ci) {
            const auto rgb = color_rgb(static_cast<Color>(ci));
            double dot = 0.0;
            double tmpl_norm2 = 0.0;
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    if (!mask[static_cast<std::size_t>(y) * w + x]) continue;
                    for (int c = 0; c < 3; ++c) {
                        const double td = rgb[c] - 0.5;
                        dot += td * dev[(static_cast<std::size_t>(y) * w + x) * 3 + c];
                        tmpl_norm2 += td * td;
                    }
                }
            }
            if (tmpl_norm2 <= 0.0 || patch_norm2 <= 0.0) continue;
            const double cosine = dot / std::sqrt(tmpl_norm2 * patch_norm2);
            if (cosine > best.cosine) {
                best.shape = static_cast<Shape>(si);
                best.color = static_cast<Color>(ci);
                best.cosine = cosine;
                best.amplitude = dot / tmpl_norm2;
            }
        }
    }
    return best;
}

bool relation_holds(Predicate p, double subj_cy, double subj_cx, double obj_cy, double obj_cx) {
    switch (p) {
    case Predicate::left_of: return subj_cx < obj_cx;
    case Predicate::right_of: return subj_cx > obj_cx;
    case Predicate::above: return subj_cy < obj_cy;
    case Predicate::below: return subj_cy > obj_cy;
    }
    return false;
}

namespace {

// Cell-by-cell detections with the strict thresholds used for scoring
// against ground truth: confident template match at full contrast.
std::vector<Detection> detect_cells(const Raster& raster, const SceneConfig& cfg) {
    std::vector<Detection> out;
    for (int row = 0; row < cfg.grid; ++row) {
        for (int col = 0; col < cfg.grid; ++col) {
            const BBox box = stamp_box(cfg, row, col);
            const TemplateMatch m = best_template_match(raster, box);
            if (m.occupied && m.cosine >= 0.8 && m.amplitude >= 0.5) {
                out.push_back({m.shape, m.color, (box.y0 + box.y1 - 1) / 2.0,
                               (box.x0 + box.x1 - 1) / 2.0, m.cosine});
            }
        }
    }
    return out;
}

bool relation_satisfiable(const Relation& rel, const SceneSpec& spec,
                          const std::vector<Detection>& dets) {
    const auto& subj = spec.objects[rel.subject];
    const auto& obj = spec.objects[rel.object];
    for (std::size_t i = 0; i < dets.size(); ++i) {
        if (dets[i].shape != subj.shape || dets[i].color != subj.color) continue;
        for (std::size_t j = 0; j < dets.size(); ++j) {
            if (i == j) continue;
            if (dets[j].shape != obj.shape || dets[j].color != obj.color) continue;
            if (relation_holds(rel.predicate, dets[i].cy, dets[i].cx, dets[j].cy, dets[j].cx)) {
                return true;
            }
        }
    }
    return false;
}

} // namespace

CategoryVerdicts check_ground_truth(const Raster& raster, const SceneSpec& spec,
                                    const SceneConfig& cfg) {
    if (raster.height != cfg.height || raster.width != cfg.width) {
        throw std::invalid_argument("raster dimensions do not match scene config");
    }
    validate_spec(spec, cfg.grid);
    const auto dets = detect_cells(raster, cfg);

    std::map<std::pair<int, int>, int> detected_identities; // (shape,color) -> count
    std::map<int, int> detected_shapes;
    for (const auto& d : dets) {
        ++detected_identities[{static_cast<int>(d.shape), static_cast<int>(d.color)}];
        ++detected_shapes[static_cast<int>(d.shape)];
    }
    std::map<std::pair<int, int>, int> expected_identities;
    std::map<int, int> expected_shapes;
    for (const auto& o : spec.objects) {
        ++expected_identities[{static_cast<int>(o.shape), static_cast<int>(o.color)}];
        ++expected_shapes[static_cast<int>(o.shape)];
    }

    CategoryVerdicts v;
    v.color_ok = true;
    for (const auto& [key, n] : expected_identities) {
        auto it = detected_identities.find(key);
        if (it == detected_identities.end() || it->second < n) v.color_ok = false;
    }
    v.shape_ok = true;
    for (const auto& [key, n] : expected_shapes) {
        auto it = detected_shapes.find(key);
        if (it == detected_shapes.end() || it->second < n) v.shape_ok = false;
    }
    v.spatial_ok = true;
    for (const auto& rel : spec.relations) {
        if (!relation_satisfiable(rel, spec, dets)) v.spatial_ok = false;
    }
    if (!spec.count_constraints.empty()) {
        v.count_ok = true;
        for (const auto& cc : spec.count_constraints) {
            auto it = detected_identities.find(
                {static_cast<int>(cc.shape), static_cast<int>(cc.color)});
            const int got = it == detected_identities.end() ? 0 : it->second;
            if (got != cc.count) v.count_ok = false;
        }
    } else {
        v.count_ok = dets.size() == spec.objects.size();
    }
    return v;
}

nlohmann::ordered_json spec_to_json(const SceneSpec& spec) {
    nlohmann::ordered_json j;
    j["objects"] = nlohmann::ordered_json::array();
    for (const auto& o : spec.objects) {
        j["objects"].push_back({{"shape", shape_name(o.shape)},
                                {"color", color_name(o.color)},
                                {"cell", {o.row, o.col}}});
    }
    j["relations"] = nlohmann::ordered_json::array();
    for (const auto& r : spec.relations) {
        j["relations"].push_back({{"subject", r.subject},
                                  {"predicate", predicate_name(r.predicate)},
                                  {"object", r.object}});
    }
    j["count_constraints"] = nlohmann::ordered_json::array();
    for (const auto& cc : spec.count_constraints) {
        j["count_constraints"].push_back({{"shape", shape_name(cc.shape)},
                                          {"color", color_name(cc.color)},
                                          {"count", cc.count}});
    }
    j["has_spatial_directive"] = spec.has_spatial_directive;
    return j;
}

SceneSpec spec_from_json(const nlohmann::json& j) {
    SceneSpec spec;
    for (const auto& o : j.at("objects")) {
        spec.objects.push_back({shape_from_name(o.at("shape").get<std::string>()),
                                color_from_name(o.at("color").get<std::string>()),
                                o.at("cell").at(0).get<int>(), o.at("cell").at(1).get<int>()});
    }
    for (const auto& r : j.at("relations")) {
        spec.relations.push_back({r.at("subject").get<int>(),
                                  predicate_from_name(r.at("predicate").get<std::string>()),
                                  r.at("object").get<int>()});
    }
    for (const auto& cc : j.at("count_constraints")) {
        spec.count_constraints.push_back({shape_from_name(cc.at("shape").get<std::string>()),
                                          color_from_name(cc.at("color").get<std::string>()),
                                          cc.at("count").get<int>()});
    }
    spec.has_spatial_directive = j.at("has_spatial_directive").get<bool>();
    return spec;
}

} // namespace srum
