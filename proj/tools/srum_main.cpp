// Copyright 2026 The SRUM Authors
// SPDX-License-Identifier: Apache-2.0
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "srum/cli.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string workspace;
    std::string mode;
    bool has_seed = false;
    std::uint64_t seed = 0;
};

srum::RunConfig resolve_config(const CommonArgs& args) {
    srum::RunConfig cfg;
    if (!args.config_path.empty()) {
        cfg = srum::load_config_file(args.config_path);
    }
    if (args.has_seed) cfg.seed = args.seed;
    if (!args.workspace.empty()) cfg.workspace = args.workspace;
    if (!args.mode.empty()) cfg.train.mode = srum::mode_from_name(args.mode);
    return cfg;
}

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "flat key=value config file");
    cmd->add_option("--workspace", args.workspace, "workspace directory override");
    cmd->add_option_function<std::uint64_t>(
           "--seed",
           [&args](const std::uint64_t& v) {
               args.has_seed = true;
               args.seed = v;
           },
           "seed override");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"self-rewarding post-training loop for a toy compositional generator"};
    app.require_subcommand(1);

    CommonArgs args;
    std::vector<std::string> eval_checkpoints;
    std::string checkpoint_name = "base.ckpt";
    std::string clusters_file;

    CLI::App* pretrain = app.add_subcommand("pretrain", "train the base model on clean renders");
    add_common(pretrain, args);
    CLI::App* gen_data = app.add_subcommand("gen-data", "sample candidates from the base model");
    add_common(gen_data, args);
    CLI::App* curate = app.add_subcommand("curate", "judge candidates and build the dataset");
    add_common(curate, args);
    CLI::App* train = app.add_subcommand("train", "reward-weighted training");
    add_common(train, args);
    train->add_option("--mode", args.mode, "full | no_global | no_constraint | sparse");
    CLI::App* train_sft = app.add_subcommand("train-sft", "plain flow-matching baseline");
    add_common(train_sft, args);
    CLI::App* eval = app.add_subcommand("eval", "benchmark checkpoints on the held-out suite");
    add_common(eval, args);
    eval->add_option("--checkpoints", eval_checkpoints,
                     "checkpoint filenames (default: all in workspace)");
    CLI::App* stepwise = app.add_subcommand("stepwise", "layout/detail score per Euler step");
    add_common(stepwise, args);
    stepwise->add_option("--checkpoint", checkpoint_name, "checkpoint filename");
    CLI::App* activations = app.add_subcommand("activations", "average activation strength");
    add_common(activations, args);
    activations->add_option("--checkpoint", checkpoint_name, "checkpoint filename");
    activations->add_option("--clusters", clusters_file, "JSON file with cluster index sets");
    CLI::App* plot = app.add_subcommand("plot", "emit CSV/SVG charts from metrics and reports");
    add_common(plot, args);

    CLI11_PARSE(app, argc, argv);

    try {
        const srum::RunConfig cfg = resolve_config(args);
        if (pretrain->parsed()) srum::cli::cmd_pretrain(cfg);
        else if (gen_data->parsed()) srum::cli::cmd_gen_data(cfg);
        else if (curate->parsed()) srum::cli::cmd_curate(cfg);
        else if (train->parsed()) srum::cli::cmd_train(cfg);
        else if (train_sft->parsed()) srum::cli::cmd_train_sft(cfg);
        else if (eval->parsed()) srum::cli::cmd_eval(cfg, eval_checkpoints);
        else if (stepwise->parsed()) srum::cli::cmd_stepwise(cfg, checkpoint_name);
        else if (activations->parsed())
            srum::cli::cmd_activations(cfg, checkpoint_name, clusters_file);
        else if (plot->parsed()) srum::cli::cmd_plot(cfg);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "srum: error: %s\n", e.what());
        return 1;
    }
    return 0;
}
