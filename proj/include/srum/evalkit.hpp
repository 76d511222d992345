// Copyright 2026 The SRUM Authors
// SPDX-License-Identifier: Apache-2.0
//
// Toy benchmark evaluation by category, per-step inference scoring and
// the average-activation-strength computation over neuron clusters.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "srum/genmodel.hpp"
#include "srum/selfdata.hpp"

namespace srum {

struct CategoryStats {
    double mean = 0.0;
    double stddev = 0.0;
    bool present = false;
};

struct BenchmarkReport {
    CategoryStats color;
    CategoryStats shape;
    CategoryStats spatial;
    CategoryStats counting;
    CategoryStats overall;
    int sample_count = 0;
    std::string model_id;
};

nlohmann::ordered_json report_to_json(const BenchmarkReport& report);
BenchmarkReport report_from_json(const nlohmann::json& j);

// Samples one image per (spec, seed) and scores it against ground truth.
// Accuracies are percentages in [0,100]; spatial is computed over specs
// with a spatial directive, counting over specs with count constraints,
// and the per-seed overall is the mean of the categories present.
BenchmarkReport run_benchmark(const SampleFn& sampler, const std::vector<SceneSpec>& suite,
                              const SceneConfig& scene_cfg,
                              const std::vector<std::uint64_t>& seeds,
                              const std::string& model_id);

// Layout score (global judgment) and detail score (mean region score over
// the spec's true stamp boxes) of the one-step x0 estimate at every Euler
// step of one sampling trajectory.
struct StepScores {
    std::vector<double> layout;
    std::vector<double> detail;
};
StepScores stepwise_scores(const VelocityModel& model, const ModelConfig& cfg,
                           const SceneSpec& spec, int steps, Rng& rng);

// Per-sample activation vectors of designated neurons plus the cluster
// index sets the double mean runs over.
struct ActivationTrace {
    std::vector<Vec> samples;
    std::vector<std::vector<int>> clusters;
    std::string dataset_tag;
};

// S_final per cluster: mean over samples of the per-sample cluster mean.
std::vector<double> average_activation_strength(const ActivationTrace& trace);

// Records post-tanh activations of one hidden layer on flow inputs built
// from the given specs (x_t interpolated at fixed t from the clean render).
ActivationTrace record_activations(const VelocityModel& model, const ModelConfig& cfg,
                                   const std::vector<SceneSpec>& specs, int layer_index,
                                   double t, std::uint64_t seed, std::string dataset_tag);

struct Curve {
    std::string metric;
    std::uint64_t seed = 0;
    std::vector<std::pair<double, double>> points; // (step, value)
};

// CSVs plus static SVG charts; identical inputs produce identical bytes.
void emit_plots(const std::vector<BenchmarkReport>& reports, const std::vector<Curve>& curves,
                const std::filesystem::path& out_dir);

} // namespace srum
