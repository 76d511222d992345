// Copyright 2026 The SRUM Authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "srum/evalkit.hpp"
#include "srum/io.hpp"
#include "srum/judge.hpp"

using namespace srum;

namespace {

const SceneConfig kScene{16, 16, 3};

std::vector<SceneSpec> sample_suite(std::uint64_t seed, int count) {
    std::vector<SceneSpec> specs;
    Rng rng(seed);
    for (int i = 0; i < count; ++i) {
        specs.push_back(sample_spec(rng, static_cast<Difficulty>(i % 3)));
    }
    return specs;
}

SampleFn oracle_sampler() {
    return [](const SceneSpec& spec, std::uint64_t) { return render(spec, kScene); };
}

int count_lines(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::string line;
    int n = 0;
    while (std::getline(in, line)) ++n;
    return n;
}

} // namespace

TEST_CASE("run_benchmark saturates on the oracle sampler") {
    const auto suite = sample_suite(1, 30);
    const auto report = run_benchmark(oracle_sampler(), suite, kScene, {1, 2, 3}, "oracle");
    CHECK(report.color.mean == 100.0);
    CHECK(report.shape.mean == 100.0);
    CHECK(report.spatial.present);
    CHECK(report.spatial.mean == 100.0);
    CHECK(report.counting.present);
    CHECK(report.counting.mean == 100.0);
    CHECK(report.overall.mean == 100.0);
    CHECK(report.overall.stddev == 0.0);
    CHECK(report.sample_count == 90);
}

TEST_CASE("run_benchmark floors on an untrained random model") {
    ModelConfig cfg;
    cfg.hidden = {16};
    const auto suite = sample_suite(2, 30);
    double total = 0.0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        Rng init(seed);
        const VelocityModel model = init_model(cfg, init);
        const auto sampler = model_sampler(model, cfg, 8);
        const auto report = run_benchmark(sampler, suite, kScene, {seed}, "random");
        total += report.overall.mean;
    }
    CHECK(total / 3.0 < 20.0);
}

TEST_CASE("run_benchmark is deterministic for fixed seeds") {
    const auto suite = sample_suite(3, 12);
    const auto a = run_benchmark(oracle_sampler(), suite, kScene, {7, 8}, "m");
    const auto b = run_benchmark(oracle_sampler(), suite, kScene, {7, 8}, "m");
    CHECK(report_to_json(a).dump() == report_to_json(b).dump());
}

TEST_CASE("benchmark report JSON round trip") {
    const auto suite = sample_suite(4, 9);
    const auto report = run_benchmark(oracle_sampler(), suite, kScene, {5}, "rt");
    const auto round = report_from_json(report_to_json(report));
    CHECK(report_to_json(round).dump() == report_to_json(report).dump());
}

TEST_CASE("stepwise scores on the oracle field stay at the clean anchor") {
    // A subtlety of predict_x0: under the exact constant field the one-step
    // estimate equals x0 at every step, so layout stays at 0.95.
    Rng spec_rng(5);
    const SceneSpec spec = sample_spec(spec_rng, Difficulty::two_object_relation);
    const Raster truth = render(spec, kScene);
    const Vec x0 = flatten(truth);
    const int steps = 12;

    // Drive the Euler loop with the oracle field while scoring snapshots,
    // mirroring stepwise_scores' construction.
    std::vector<double> layout;
    Rng rng(6);
    Vec eps(x0.size());
    for (auto& e : eps) e = rng.normal();
    Vec field(x0.size());
    for (std::size_t i = 0; i < field.size(); ++i) field[i] = eps[i] - x0[i];
    euler_integrate(
        [&](const Vec& x, double t) {
            const Vec x0_hat = predict_x0(x, t, field);
            layout.push_back(
                judge_global(to_raster(x0_hat, kScene.height, kScene.width), spec).score);
            return field;
        },
        eps, steps);
    REQUIRE(layout.size() == static_cast<std::size_t>(steps));
    for (double s : layout) CHECK(s == doctest::Approx(0.95));
}

TEST_CASE("stepwise_scores has one entry per step, all in range") {
    ModelConfig cfg;
    cfg.hidden = {16};
    Rng init(7);
    const VelocityModel model = init_model(cfg, init);
    Rng spec_rng(8);
    for (int steps : {1, 5, 20}) {
        Rng rng(9);
        const SceneSpec spec = sample_spec(spec_rng, Difficulty::two_object_relation);
        const StepScores s = stepwise_scores(model, cfg, spec, steps, rng);
        REQUIRE(s.layout.size() == static_cast<std::size_t>(steps));
        REQUIRE(s.detail.size() == static_cast<std::size_t>(steps));
        for (double v : s.layout) {
            CHECK(v >= -1.0);
            CHECK(v <= 1.0);
        }
        for (double v : s.detail) {
            CHECK(v >= -1.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("average_activation_strength degenerate and constant cases") {
    ActivationTrace one;
    one.samples = {{0.7}};
    one.clusters = {{0}};
    CHECK(average_activation_strength(one)[0] == doctest::Approx(0.7));

    ActivationTrace constant;
    for (int i = 0; i < 9; ++i) constant.samples.push_back(Vec(13, 0.42));
    constant.clusters = {{0, 1, 2}, {3, 4, 5, 6, 7, 8, 9, 10, 11, 12}};
    for (double s : average_activation_strength(constant)) {
        CHECK(s == doctest::Approx(0.42).epsilon(1e-15));
    }
}

TEST_CASE("average_activation_strength matches the nested-loop oracle") {
    Rng rng(10);
    ActivationTrace trace;
    const int neurons = 20;
    const int samples = 50;
    for (int s = 0; s < samples; ++s) {
        Vec v(neurons);
        for (auto& x : v) x = rng.normal();
        trace.samples.push_back(std::move(v));
    }
    std::vector<int> cluster;
    while (static_cast<int>(cluster.size()) < 7) {
        const int idx = rng.uniform_int(0, neurons - 1);
        if (std::find(cluster.begin(), cluster.end(), idx) == cluster.end()) {
            cluster.push_back(idx);
        }
    }
    trace.clusters = {cluster};
    const double got = average_activation_strength(trace)[0];

    double oracle = 0.0; // explicit double sum
    for (int s = 0; s < samples; ++s) {
        double inner = 0.0;
        for (int idx : cluster) inner += trace.samples[static_cast<std::size_t>(s)][idx];
        oracle += inner / static_cast<double>(cluster.size());
    }
    oracle /= static_cast<double>(samples);
    CHECK(got == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("property: activation strength equals the oracle on random traces") {
    for (std::uint64_t trial = 0; trial < 50; ++trial) {
        Rng rng(seed_combine(202, trial));
        const int neurons = rng.uniform_int(1, 100);
        const int samples = rng.uniform_int(1, 200);
        ActivationTrace trace;
        for (int s = 0; s < samples; ++s) {
            Vec v(static_cast<std::size_t>(neurons));
            for (auto& x : v) x = rng.normal();
            trace.samples.push_back(std::move(v));
        }
        std::vector<int> cluster;
        const int size = rng.uniform_int(1, neurons);
        for (int i = 0; i < size; ++i) cluster.push_back(rng.uniform_int(0, neurons - 1));
        trace.clusters = {cluster};
        const double got = average_activation_strength(trace)[0];
        double oracle = 0.0;
        for (const auto& sample : trace.samples) {
            double inner = 0.0;
            for (int idx : cluster) inner += sample[static_cast<std::size_t>(idx)];
            oracle += inner / static_cast<double>(cluster.size());
        }
        oracle /= static_cast<double>(trace.samples.size());
        REQUIRE(got == doctest::Approx(oracle).epsilon(1e-10));
    }
}

TEST_CASE("average_activation_strength errors on empty inputs") {
    ActivationTrace empty;
    empty.clusters = {{0}};
    CHECK_THROWS_AS(average_activation_strength(empty), std::invalid_argument);

    ActivationTrace no_cluster;
    no_cluster.samples = {{0.5}};
    no_cluster.clusters = {{}};
    CHECK_THROWS_AS(average_activation_strength(no_cluster), std::invalid_argument);

    ActivationTrace bad_index;
    bad_index.samples = {{0.5}};
    bad_index.clusters = {{3}};
    CHECK_THROWS_AS(average_activation_strength(bad_index), std::invalid_argument);
}

TEST_CASE("record_activations captures the chosen hidden layer") {
    ModelConfig cfg;
    cfg.hidden = {24, 12};
    Rng init(11);
    const VelocityModel model = init_model(cfg, init);
    const auto suite = sample_suite(12, 5);
    const auto trace = record_activations(model, cfg, suite, 1, 0.5, 3, "probe");
    REQUIRE(trace.samples.size() == 5);
    CHECK(trace.samples[0].size() == 24);
    CHECK(trace.dataset_tag == "probe");
    for (const auto& s : trace.samples) {
        for (double v : s) {
            CHECK(v >= -1.0); // tanh range
            CHECK(v <= 1.0);
        }
    }
    const auto deeper = record_activations(model, cfg, suite, 2, 0.5, 3, "probe");
    CHECK(deeper.samples[0].size() == 12);
    CHECK_THROWS_AS(record_activations(model, cfg, suite, 0, 0.5, 3, "x"),
                    std::invalid_argument);
    CHECK_THROWS_AS(record_activations(model, cfg, suite, 3, 0.5, 3, "x"),
                    std::invalid_argument);
}

TEST_CASE("emit_plots writes deterministic files with matching row counts") {
    const auto dir = std::filesystem::temp_directory_path() / "srum_plots_test";
    std::filesystem::remove_all(dir);

    const auto suite = sample_suite(13, 9);
    const auto report = run_benchmark(oracle_sampler(), suite, kScene, {1}, "model-a");

    SUBCASE("reports only produce the bar chart only") {
        emit_plots({report}, {}, dir);
        CHECK(std::filesystem::exists(dir / "benchmark.csv"));
        CHECK(std::filesystem::exists(dir / "benchmark_bars.svg"));
        CHECK_FALSE(std::filesystem::exists(dir / "curves.csv"));
        CHECK_FALSE(std::filesystem::exists(dir / "curves.svg"));
        // header + one row per present category
        CHECK(count_lines(dir / "benchmark.csv") == 6);
    }
    SUBCASE("identical inputs produce identical bytes") {
        Curve c;
        c.metric = "l_total";
        c.seed = 4;
        for (int i = 0; i < 17; ++i) c.points.emplace_back(i, 1.0 / (1.0 + i));
        emit_plots({report}, {c}, dir);
        const auto bars = io::read_file(dir / "benchmark_bars.svg");
        const auto curves_svg = io::read_file(dir / "curves.svg");
        const auto curves_csv = io::read_file(dir / "curves.csv");
        emit_plots({report}, {c}, dir);
        CHECK(io::read_file(dir / "benchmark_bars.svg") == bars);
        CHECK(io::read_file(dir / "curves.svg") == curves_svg);
        CHECK(io::read_file(dir / "curves.csv") == curves_csv);
        CHECK(count_lines(dir / "curves.csv") == 18); // header + 17 points
    }
    SUBCASE("nothing to plot is an error") {
        CHECK_THROWS_AS(emit_plots({}, {}, dir), std::invalid_argument);
    }
    std::filesystem::remove_all(dir);
}
