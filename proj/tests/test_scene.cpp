// Copyright 2026 The SRUM Authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>

#include "srum/scene.hpp"

using namespace srum;

namespace {

// Independent straight-line stamping routine used as a rendering oracle:
// walks every pixel and recomputes its color from scratch.
Raster reference_render(const SceneSpec& spec, const SceneConfig& cfg) {
    Raster out = Raster::filled(cfg.height, cfg.width, 0.5f);
    const int s = stamp_side(cfg);
    for (int y = 0; y < cfg.height; ++y) {
        for (int x = 0; x < cfg.width; ++x) {
            for (const auto& obj : spec.objects) { // later objects overwrite
                const BBox box = stamp_box(cfg, obj.row, obj.col);
                if (y < box.y0 || y >= box.y1 || x < box.x0 || x >= box.x1) continue;
                const auto mask = shape_mask(obj.shape, s, s);
                if (!mask[static_cast<std::size_t>(y - box.y0) * s + (x - box.x0)]) continue;
                const auto rgb = color_rgb(obj.color);
                for (int c = 0; c < 3; ++c) out.at(y, x, c) = rgb[c];
            }
        }
    }
    return out;
}

Raster add_uniform_noise(const Raster& r, double amplitude, Rng& rng) {
    Raster out = r;
    for (auto& v : out.values) {
        const double n = (rng.uniform() * 2.0 - 1.0) * amplitude;
        v = static_cast<float>(std::clamp(static_cast<double>(v) + n, 0.0, 1.0));
    }
    return out;
}

} // namespace

TEST_CASE("sample_spec single object") {
    Rng rng(0);
    const SceneSpec spec = sample_spec(rng, Difficulty::single_object);
    CHECK(spec.objects.size() == 1);
    CHECK_FALSE(spec.has_spatial_directive);
    CHECK(spec.relations.empty());
    CHECK(spec.count_constraints.empty());
}

TEST_CASE("sample_spec two-object relation is geometrically consistent") {
    Rng rng(0);
    const SceneSpec spec = sample_spec(rng, Difficulty::two_object_relation);
    CHECK(spec.objects.size() == 2);
    REQUIRE(spec.relations.size() == 1);
    CHECK(spec.has_spatial_directive);
    const auto& r = spec.relations[0];
    const auto& subj = spec.objects[r.subject];
    const auto& obj = spec.objects[r.object];
    switch (r.predicate) {
    case Predicate::left_of: CHECK(subj.col < obj.col); break;
    case Predicate::right_of: CHECK(subj.col > obj.col); break;
    case Predicate::above: CHECK(subj.row < obj.row); break;
    case Predicate::below: CHECK(subj.row > obj.row); break;
    }
}

TEST_CASE("sample_spec counting constraints equal the object multiset") {
    Rng rng(7);
    const SceneSpec spec = sample_spec(rng, Difficulty::counting);
    // brute-force recount over spec.objects
    std::map<std::pair<int, int>, int> counts;
    for (const auto& o : spec.objects) {
        ++counts[{static_cast<int>(o.shape), static_cast<int>(o.color)}];
    }
    REQUIRE(spec.count_constraints.size() == counts.size());
    for (const auto& cc : spec.count_constraints) {
        CHECK(counts.at({static_cast<int>(cc.shape), static_cast<int>(cc.color)}) == cc.count);
    }
}

TEST_CASE("sample_spec is deterministic for a fixed seed") {
    Rng a(42);
    Rng b(42);
    for (int i = 0; i < 20; ++i) {
        const auto d = static_cast<Difficulty>(i % 3);
        CHECK(sample_spec(a, d) == sample_spec(b, d));
    }
}

TEST_CASE("render single red square at cell (0,0)") {
    SceneSpec spec;
    spec.objects.push_back({Shape::square, Color::red, 0, 0});
    const SceneConfig cfg;
    const Raster r = render(spec, cfg);
    const BBox box = stamp_box(cfg, 0, 0);
    for (int y = 0; y < cfg.height; ++y) {
        for (int x = 0; x < cfg.width; ++x) {
            const bool inside = y >= box.y0 && y < box.y1 && x >= box.x0 && x < box.x1;
            if (inside) {
                CHECK(r.at(y, x, 0) == 1.0f);
                CHECK(r.at(y, x, 1) == 0.0f);
                CHECK(r.at(y, x, 2) == 0.0f);
            } else {
                CHECK(r.at(y, x, 0) == 0.5f);
                CHECK(r.at(y, x, 1) == 0.5f);
                CHECK(r.at(y, x, 2) == 0.5f);
            }
        }
    }
}

TEST_CASE("render rejects empty spec and tiny rasters") {
    CHECK_THROWS_AS(render(SceneSpec{}, SceneConfig{}), std::invalid_argument);
    SceneSpec spec;
    spec.objects.push_back({Shape::square, Color::red, 0, 0});
    CHECK_THROWS_AS(render(spec, SceneConfig{8, 8, 3}), std::invalid_argument);
}

TEST_CASE("render matches the independent stamping oracle") {
    Rng rng(0);
    const SceneSpec spec = sample_spec(rng, Difficulty::two_object_relation);
    const SceneConfig cfg;
    CHECK(render(spec, cfg) == reference_render(spec, cfg));
    // and on a bigger raster with more objects
    Rng rng2(3);
    const SceneSpec spec2 = sample_spec(rng2, Difficulty::counting);
    const SceneConfig cfg2{32, 32, 3};
    CHECK(render(spec2, cfg2) == reference_render(spec2, cfg2));
}

TEST_CASE("canonical_prompt templates") {
    SceneSpec single;
    single.objects.push_back({Shape::square, Color::red, 1, 1});
    CHECK(canonical_prompt(single) == "a red square");

    SceneSpec rel;
    rel.objects.push_back({Shape::square, Color::red, 0, 0});
    rel.objects.push_back({Shape::circle, Color::blue, 0, 2});
    rel.relations.push_back({0, Predicate::left_of, 1});
    rel.has_spatial_directive = true;
    CHECK(canonical_prompt(rel) == "a red square to the left of a blue circle");

    SceneSpec counting;
    counting.objects.push_back({Shape::triangle, Color::green, 0, 0});
    counting.objects.push_back({Shape::triangle, Color::green, 2, 2});
    counting.count_constraints.push_back({Shape::triangle, Color::green, 2});
    CHECK(canonical_prompt(counting) == "two green triangles");
}

TEST_CASE("canonical_prompt is deterministic") {
    Rng rng(11);
    const SceneSpec spec = sample_spec(rng, Difficulty::two_object_relation);
    CHECK(canonical_prompt(spec) == canonical_prompt(spec));
    SceneSpec copy = spec;
    CHECK(canonical_prompt(copy) == canonical_prompt(spec));
}

TEST_CASE("check_ground_truth is all-true on exact renders") {
    const SceneConfig cfg;
    for (std::uint64_t seed = 0; seed < 60; ++seed) {
        Rng rng(seed);
        const auto spec = sample_spec(rng, static_cast<Difficulty>(seed % 3));
        const auto v = check_ground_truth(render(spec, cfg), spec, cfg);
        CAPTURE(seed);
        CHECK(v.all());
    }
}

TEST_CASE("check_ground_truth flags swapped colors") {
    SceneSpec spec;
    spec.objects.push_back({Shape::square, Color::red, 0, 0});
    spec.objects.push_back({Shape::circle, Color::blue, 2, 2});
    SceneSpec swapped = spec;
    swapped.objects[0].color = Color::blue;
    swapped.objects[1].color = Color::red;
    const SceneConfig cfg;
    const auto v = check_ground_truth(render(swapped, cfg), spec, cfg);
    CHECK_FALSE(v.color_ok);
    CHECK(v.shape_ok); // shapes are still present
}

TEST_CASE("check_ground_truth tolerates small uniform noise") {
    const SceneConfig cfg;
    Rng spec_rng(5);
    const SceneSpec spec = sample_spec(spec_rng, Difficulty::two_object_relation);
    const Raster clean = render(spec, cfg);
    for (std::uint64_t draw = 0; draw < 100; ++draw) {
        Rng noise_rng(seed_combine(123, draw));
        const Raster noisy = add_uniform_noise(clean, 0.02, noise_rng);
        CAPTURE(draw);
        CHECK(check_ground_truth(noisy, spec, cfg).all());
    }
}

TEST_CASE("property: render stays in [0,1] over many sampled specs") {
    const SceneConfig cfg;
    for (std::uint64_t seed = 0; seed < 10000; ++seed) {
        Rng rng(seed);
        const auto spec = sample_spec(rng, static_cast<Difficulty>(seed % 3));
        const Raster r = render(spec, cfg);
        float lo = 1.0f;
        float hi = 0.0f;
        for (float v : r.values) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
            REQUIRE(std::isfinite(v));
        }
        REQUIRE(lo >= 0.0f);
        REQUIRE(hi <= 1.0f);
    }
}

TEST_CASE("property: ground-truth check accepts every sampled render") {
    const SceneConfig cfg;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        Rng rng(seed_combine(99, seed));
        const auto spec = sample_spec(rng, static_cast<Difficulty>(seed % 3));
        REQUIRE(check_ground_truth(render(spec, cfg), spec, cfg).all());
    }
}

TEST_CASE("spec JSON round trip") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(seed);
        const auto spec = sample_spec(rng, static_cast<Difficulty>(seed % 3));
        CHECK(spec_from_json(spec_to_json(spec)) == spec);
    }
}

TEST_CASE("validate_spec rejects malformed specs") {
    SceneSpec dup;
    dup.objects.push_back({Shape::square, Color::red, 0, 0});
    dup.objects.push_back({Shape::circle, Color::blue, 0, 0});
    CHECK_THROWS_AS(validate_spec(dup, 3), std::invalid_argument);

    SceneSpec bad_rel;
    bad_rel.objects.push_back({Shape::square, Color::red, 0, 0});
    bad_rel.objects.push_back({Shape::circle, Color::blue, 0, 2});
    bad_rel.relations.push_back({0, Predicate::right_of, 1}); // actually left of
    bad_rel.has_spatial_directive = true;
    CHECK_THROWS_AS(validate_spec(bad_rel, 3), std::invalid_argument);

    SceneSpec flag;
    flag.objects.push_back({Shape::square, Color::red, 0, 0});
    flag.has_spatial_directive = true; // no relations
    CHECK_THROWS_AS(validate_spec(flag, 3), std::invalid_argument);
}
