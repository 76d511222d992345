// Copyright 2026 The SRUM Authors
// SPDX-License-Identifier: Apache-2.0
//
// The toy compositional world: symbolic scene specs, deterministic
// rendering, canonical prompt text and ground-truth checking.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "srum/bbox.hpp"
#include "srum/rng.hpp"

namespace srum {

enum class Shape { square, circle, triangle };
enum class Color { red, green, blue, yellow };
enum class Predicate { left_of, right_of, above, below };

constexpr int kShapeCount = 3;
constexpr int kColorCount = 4;
constexpr int kPredicateCount = 4;

std::string shape_name(Shape s);
std::string color_name(Color c);
std::string predicate_name(Predicate p);
Shape shape_from_name(const std::string& s);
Color color_from_name(const std::string& s);
Predicate predicate_from_name(const std::string& s);
std::array<float, 3> color_rgb(Color c);

struct SceneObject {
    Shape shape{};
    Color color{};
    int row = 0;
    int col = 0;
    bool operator==(const SceneObject&) const = default;
};

struct Relation {
    int subject = 0;
    Predicate predicate{};
    int object = 0;
    bool operator==(const Relation&) const = default;
};

struct CountConstraint {
    Shape shape{};
    Color color{};
    int count = 0;
    bool operator==(const CountConstraint&) const = default;
};

struct SceneSpec {
    std::vector<SceneObject> objects;
    std::vector<Relation> relations;
    std::vector<CountConstraint> count_constraints;
    bool has_spatial_directive = false;
    bool operator==(const SceneSpec&) const = default;
};

struct SceneConfig {
    int height = 16;
    int width = 16;
    int grid = 3;
    bool operator==(const SceneConfig&) const = default;
};

enum class Difficulty { single_object, two_object_relation, counting };

// H x W x 3 image with interleaved RGB float values in [0, 1].
struct Raster {
    int height = 0;
    int width = 0;
    std::vector<float> values; // size height*width*3, row-major

    static Raster filled(int h, int w, float v) {
        Raster r;
        r.height = h;
        r.width = w;
        r.values.assign(static_cast<std::size_t>(h) * w * 3, v);
        return r;
    }
    float at(int y, int x, int c) const {
        return values[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
    float& at(int y, int x, int c) {
        return values[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
    bool operator==(const Raster&) const = default;
};

struct CategoryVerdicts {
    bool color_ok = false;
    bool shape_ok = false;
    bool spatial_ok = false;
    bool count_ok = false;
    bool all() const { return color_ok && shape_ok && spatial_ok && count_ok; }
};

// Throws std::invalid_argument when any SceneSpec invariant is violated.
void validate_spec(const SceneSpec& spec, int grid);

SceneSpec sample_spec(Rng& rng, Difficulty difficulty, int grid = 3);
Raster render(const SceneSpec& spec, const SceneConfig& cfg);
std::string canonical_prompt(const SceneSpec& spec);
CategoryVerdicts check_ground_truth(const Raster& raster, const SceneSpec& spec,
                                    const SceneConfig& cfg);

// Stamp geometry. Stamps sit centered in their placement cell with a
// 1-pixel margin on each side: side = floor(min(h, w)/grid) - 2.
int stamp_side(const SceneConfig& cfg);
BBox stamp_box(const SceneConfig& cfg, int row, int col);

// Boolean shape mask scaled to an arbitrary box size.
std::vector<std::uint8_t> shape_mask(Shape shape, int h, int w);

// Best (shape, color) template for the pixels inside a box. `cosine` is
// the cosine similarity between the patch's deviation from background
// gray and the template's; `amplitude` is the least-squares coefficient
// of the patch onto the template (1.0 for a clean full-contrast render).
struct TemplateMatch {
    bool occupied = false; // max per-channel deviation from 0.5 reached 0.15
    Shape shape{};
    Color color{};
    double cosine = 0.0;
    double amplitude = 0.0;
};
TemplateMatch best_template_match(const Raster& raster, const BBox& box);

// One identified object instance on the canvas (used by the ground-truth
// checker and the global layout judge).
struct Detection {
    Shape shape{};
    Color color{};
    double cy = 0.0;
    double cx = 0.0;
    double cosine = 0.0;
};
bool relation_holds(Predicate p, double subj_cy, double subj_cx, double obj_cy, double obj_cx);

nlohmann::ordered_json spec_to_json(const SceneSpec& spec);
SceneSpec spec_from_json(const nlohmann::json& j);

} // namespace srum
