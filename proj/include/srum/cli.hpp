// Copyright 2026 The SRUM Authors
// SPDX-License-Identifier: Apache-2.0
//
// Pipeline orchestration: subcommand implementations, workspace layout
// and reproducibility glue. Each command reads its inputs from and writes
// its outputs to the workspace; all failures are exceptions carrying a
// one-line diagnostic.
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "srum/config.hpp"

namespace srum::cli {

struct Workspace {
    std::filesystem::path root;

    std::filesystem::path checkpoints() const { return root / "checkpoints"; }
    std::filesystem::path data() const { return root / "data"; }
    std::filesystem::path rewards() const { return root / "rewards"; }
    std::filesystem::path metrics() const { return root / "metrics"; }
    std::filesystem::path reports() const { return root / "reports"; }
    std::filesystem::path plots() const { return root / "plots"; }

    void ensure_layout() const;
};

// One subcommand at a time per workspace.
class WorkspaceLock {
public:
    explicit WorkspaceLock(const std::filesystem::path& root);
    ~WorkspaceLock();
    WorkspaceLock(const WorkspaceLock&) = delete;
    WorkspaceLock& operator=(const WorkspaceLock&) = delete;

private:
    std::filesystem::path lock_path_;
};

// Deterministic spec suites. Difficulties cycle single / relation /
// counting; the eval suite skips any spec equal to a training spec.
std::vector<SceneSpec> make_suite(std::uint64_t seed, int count, int grid);
std::vector<SceneSpec> training_specs(const RunConfig& cfg);
std::vector<SceneSpec> eval_specs(const RunConfig& cfg);

void cmd_pretrain(const RunConfig& cfg);
void cmd_gen_data(const RunConfig& cfg);
void cmd_curate(const RunConfig& cfg);
void cmd_train(const RunConfig& cfg);     // honors cfg.train.mode
void cmd_train_sft(const RunConfig& cfg);
// Evaluates the named checkpoints (all checkpoints when empty) on the
// held-out suite and writes reports/benchmark.json.
void cmd_eval(const RunConfig& cfg, const std::vector<std::string>& checkpoint_names = {});
void cmd_stepwise(const RunConfig& cfg, const std::string& checkpoint_name);
void cmd_activations(const RunConfig& cfg, const std::string& checkpoint_name,
                     const std::filesystem::path& clusters_file = {});
void cmd_plot(const RunConfig& cfg);

// Names used by the pipeline stages.
std::string base_checkpoint_name();
std::string train_checkpoint_name(AblationMode mode, std::uint64_t seed);
std::string sft_checkpoint_name(std::uint64_t seed);

} // namespace srum::cli
