// Copyright 2026 The SRUM Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "srum/judge.hpp"
#include "srum/scene.hpp"
#include "srum/trainer.hpp"

namespace srum {

// Everything a pipeline run needs, resolvable from a flat key=value file.
struct RunConfig {
    std::filesystem::path workspace = "workspace";
    std::uint64_t seed = 0;

    SceneConfig scene;                // raster_height, raster_width, grid
    std::vector<int> hidden = {256, 256};
    TrainConfig train;

    int pretrain_steps = 3000;
    double pretrain_target_lref = 0.0; // 0 disables the early-stop target
    int pretrain_batch_size = 16;

    int train_spec_count = 120;
    int eval_spec_count = 200;
    int k_per_spec = 2;
    int sample_steps = 20;

    int eval_sample_steps = 20;
    int eval_seed_count = 3;
    int eval_png_count = 0;

    int stepwise_spec_count = 8;
    int activation_spec_count = 64;
    int activation_layer = 1;
    double activation_t = 0.5;
    int checkpoint_every = 0; // 0 = final checkpoint only

    JudgeClientConfig judge;  // disabled by default
};

// Parses flat `key = value` lines; '#' starts a comment. `preset = paper`
// applies the full-scale training recipe before later keys override it.
// Unknown keys are errors.
RunConfig parse_config_text(const std::string& text);
RunConfig load_config_file(const std::filesystem::path& path);

// All defaults resolved, one key per line, fixed order; parsing the output
// reproduces the config exactly.
std::string serialize_config(const RunConfig& cfg);

ModelConfig model_config(const RunConfig& cfg);

} // namespace srum
