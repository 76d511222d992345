// Copyright 2026 The SRUM Authors
// SPDX-License-Identifier: Apache-2.0
#include "srum/cli.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "srum/evalkit.hpp"
#include "srum/io.hpp"

namespace srum::cli {

namespace stream {
constexpr std::uint64_t kModelInit = 101;
constexpr std::uint64_t kPretrain = 102;
constexpr std::uint64_t kGenData = 103;
constexpr std::uint64_t kTrain = 104;
constexpr std::uint64_t kTrainSft = 105;
constexpr std::uint64_t kTrainSpecs = 106;
constexpr std::uint64_t kEvalSpecs = 107;
constexpr std::uint64_t kEvalSeed = 108;
constexpr std::uint64_t kStepwise = 109;
} // namespace stream

void Workspace::ensure_layout() const {
    std::filesystem::create_directories(checkpoints());
    std::filesystem::create_directories(data());
    std::filesystem::create_directories(rewards());
    std::filesystem::create_directories(metrics());
    std::filesystem::create_directories(reports());
    std::filesystem::create_directories(plots());
}

WorkspaceLock::WorkspaceLock(const std::filesystem::path& root) {
    std::filesystem::create_directories(root);
    lock_path_ = root / ".lock";
    const int fd = ::open(lock_path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
        throw std::runtime_error("workspace is locked: " + lock_path_.string() +
                                 " exists (remove it if stale)");
    }
    ::close(fd);
}

WorkspaceLock::~WorkspaceLock() {
    std::error_code ec;
    std::filesystem::remove(lock_path_, ec);
}

std::vector<SceneSpec> make_suite(std::uint64_t seed, int count, int grid) {
    Rng rng(seed);
    std::vector<SceneSpec> out;
    out.reserve(static_cast<std::size_t>(count));
    const Difficulty cycle[3] = {Difficulty::single_object, Difficulty::two_object_relation,
                                 Difficulty::counting};
    for (int i = 0; i < count; ++i) {
        out.push_back(sample_spec(rng, cycle[i % 3], grid));
    }
    return out;
}

std::vector<SceneSpec> training_specs(const RunConfig& cfg) {
    return make_suite(seed_combine(cfg.seed, stream::kTrainSpecs), cfg.train_spec_count,
                      cfg.scene.grid);
}

std::vector<SceneSpec> eval_specs(const RunConfig& cfg) {
    const auto train = training_specs(cfg);
    Rng rng(seed_combine(cfg.seed, stream::kEvalSpecs));
    std::vector<SceneSpec> out;
    const Difficulty cycle[3] = {Difficulty::single_object, Difficulty::two_object_relation,
                                 Difficulty::counting};
    int i = 0;
    int guard = 0;
    while (static_cast<int>(out.size()) < cfg.eval_spec_count) {
        if (++guard > cfg.eval_spec_count * 100) {
            throw std::runtime_error("could not build a held-out suite disjoint from training");
        }
        SceneSpec spec = sample_spec(rng, cycle[i % 3], cfg.scene.grid);
        if (std::find(train.begin(), train.end(), spec) == train.end()) {
            out.push_back(std::move(spec));
            ++i;
        }
    }
    return out;
}

std::string base_checkpoint_name() { return "base.ckpt"; }

std::string train_checkpoint_name(AblationMode mode, std::uint64_t seed) {
    return "srum_" + mode_name(mode) + "_seed" + std::to_string(seed) + ".ckpt";
}

std::string sft_checkpoint_name(std::uint64_t seed) {
    return "sft_seed" + std::to_string(seed) + ".ckpt";
}

namespace {

void require_artifact(const std::filesystem::path& path, const std::string& stage,
                      const std::string& hint) {
    if (!std::filesystem::exists(path)) {
        throw std::runtime_error("stage " + stage + " requires artifact " + path.string() +
                                 " (" + hint + ")");
    }
}

std::string checkpoint_id_of(const std::filesystem::path& ckpt_path) {
    return io::hex64(io::fnv1a64(io::read_file(ckpt_path)));
}

// Ground-truth records used for pretraining: unit reward, alpha 1.
std::vector<TrainingRecord> ground_truth_records(const std::vector<SceneSpec>& specs,
                                                 const SceneConfig& scene_cfg) {
    std::vector<TrainingRecord> records;
    records.reserve(specs.size());
    for (const auto& spec : specs) {
        TrainingRecord rec;
        rec.spec = spec;
        rec.prompt = canonical_prompt(spec);
        rec.raster = render(spec, scene_cfg);
        rec.global_judgment = {1.0, "ground-truth render"};
        rec.reward_map = RewardMap::filled(scene_cfg.height, scene_cfg.width, 1.0f);
        rec.alpha = 1.0;
        rec.provenance.checkpoint_id = "none";
        rec.provenance.stage = "pretrain-v1";
        validate_record(rec);
        records.push_back(std::move(rec));
    }
    return records;
}

nlohmann::ordered_json effective_config_json(const RunConfig& cfg, const std::string& stage) {
    nlohmann::ordered_json j;
    j["stage"] = stage;
    j["effective_config"] = serialize_config(cfg);
    return j;
}

void write_stage_config(const RunConfig& cfg, const std::string& stage,
                        const std::filesystem::path& artifact) {
    io::write_file(artifact.string() + ".cfg",
                   "# stage: " + stage + "\n" + serialize_config(cfg));
}

StepCallback checkpoint_callback(const RunConfig& cfg, const ModelConfig& mcfg,
                                 const Workspace& ws, const std::string& stem) {
    if (cfg.checkpoint_every <= 0) return {};
    const int every = cfg.checkpoint_every;
    return [&cfg, mcfg, ws, stem, every](const StepMetrics& m, const VelocityModel& model) {
        if ((m.step + 1) % every == 0) {
            save_checkpoint(model, mcfg,
                            ws.checkpoints() / (stem + "_step" + std::to_string(m.step + 1) +
                                                ".ckpt"));
        }
        return true;
    };
}

} // namespace

void cmd_pretrain(const RunConfig& cfg) {
    WorkspaceLock lock(cfg.workspace);
    Workspace ws{cfg.workspace};
    ws.ensure_layout();

    const auto specs = training_specs(cfg);
    const auto records = ground_truth_records(specs, cfg.scene);
    const ModelConfig mcfg = model_config(cfg);
    Rng init_rng(seed_combine(cfg.seed, stream::kModelInit));
    VelocityModel model = init_model(mcfg, init_rng);

    TrainConfig tcfg = cfg.train;
    tcfg.total_steps = cfg.pretrain_steps;
    tcfg.batch_size = cfg.pretrain_batch_size;
    tcfg.seed = seed_combine(cfg.seed, stream::kPretrain);

    // Optional early stop on a smoothed flow-matching loss target.
    double running = 0.0;
    int window = 0;
    const double target = cfg.pretrain_target_lref;
    StepCallback ckpt_cb = checkpoint_callback(cfg, mcfg, ws, "base");
    StepCallback cb = [&](const StepMetrics& m, const VelocityModel& mdl) {
        if (ckpt_cb && !ckpt_cb(m, mdl)) return false;
        if (target > 0.0) {
            running += m.l_ref;
            ++window;
            if (window >= 25) {
                if (running / window <= target) return false;
                running = 0.0;
                window = 0;
            }
        }
        return true;
    };

    const TrainResult result = train_sft(model, mcfg, records, tcfg, cb);
    if (!result.log.empty() && !std::isfinite(result.log.back().l_total)) {
        throw std::runtime_error("pretraining diverged");
    }
    const auto ckpt = ws.checkpoints() / base_checkpoint_name();
    save_checkpoint(model, mcfg, ckpt, effective_config_json(cfg, "pretrain"));
    write_metrics_csv(result, ws.metrics() / "pretrain.csv");
    write_stage_config(cfg, "pretrain", ws.metrics() / "pretrain.csv");
}

void cmd_gen_data(const RunConfig& cfg) {
    WorkspaceLock lock(cfg.workspace);
    Workspace ws{cfg.workspace};
    ws.ensure_layout();
    const auto ckpt_path = ws.checkpoints() / base_checkpoint_name();
    require_artifact(ckpt_path, "gen-data", "run pretrain first");

    ModelConfig mcfg;
    const VelocityModel model = load_checkpoint(ckpt_path, &mcfg);
    const std::string ckpt_id = checkpoint_id_of(ckpt_path);
    const auto specs = training_specs(cfg);
    const auto sampler = model_sampler(model, mcfg, cfg.sample_steps);
    const auto candidates =
        generate_candidates(sampler, specs, cfg.k_per_spec, seed_combine(cfg.seed, stream::kGenData));

    std::string manifest;
    for (const auto& cand : candidates) {
        const std::string bytes =
            io::grid_f32_bytes(cand.raster.height, cand.raster.width, cand.raster.values);
        const std::string rel = "data/rasters/" + io::hex64(io::fnv1a64(bytes)) + ".bin";
        io::write_file(cfg.workspace / rel, bytes);
        nlohmann::ordered_json j;
        j["spec"] = spec_to_json(cand.spec);
        j["spec_index"] = cand.spec_index;
        j["candidate_index"] = cand.candidate_index;
        j["seed"] = cand.seed;
        j["raster_path"] = rel;
        manifest += j.dump() + "\n";
    }
    io::write_file(ws.data() / "candidates.jsonl", manifest);
    nlohmann::ordered_json meta;
    meta["checkpoint_id"] = ckpt_id;
    meta["candidate_count"] = candidates.size();
    io::write_file(ws.data() / "candidates_meta.json", meta.dump(2) + "\n");
    write_stage_config(cfg, "gen-data", ws.data() / "candidates.jsonl");
}

void cmd_curate(const RunConfig& cfg) {
    WorkspaceLock lock(cfg.workspace);
    Workspace ws{cfg.workspace};
    ws.ensure_layout();
    const auto cand_path = ws.data() / "candidates.jsonl";
    require_artifact(cand_path, "curate", "run gen-data first");

    const auto meta = nlohmann::json::parse(io::read_file(ws.data() / "candidates_meta.json"));
    const std::string ckpt_id = meta.at("checkpoint_id").get<std::string>();

    std::vector<Candidate> candidates;
    std::istringstream lines(io::read_file(cand_path));
    std::string line;
    while (std::getline(lines, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        Candidate c;
        c.spec = spec_from_json(j.at("spec"));
        c.spec_index = j.at("spec_index").get<int>();
        c.candidate_index = j.at("candidate_index").get<int>();
        c.seed = j.at("seed").get<std::uint64_t>();
        int h = 0;
        int w = 0;
        auto values = io::read_grid_f32(cfg.workspace / j.at("raster_path").get<std::string>(),
                                        &h, &w);
        c.raster.height = h;
        c.raster.width = w;
        c.raster.values = std::move(values);
        candidates.push_back(std::move(c));
    }

    const auto records = curate(candidates, ckpt_id);
    write_dataset(records, cfg.workspace);
    write_stage_config(cfg, "curate", ws.data() / "manifest.jsonl");
}

namespace {

void run_training_command(const RunConfig& cfg, bool sft) {
    WorkspaceLock lock(cfg.workspace);
    Workspace ws{cfg.workspace};
    ws.ensure_layout();
    const auto ckpt_path = ws.checkpoints() / base_checkpoint_name();
    const std::string stage = sft ? "train-sft" : "train";
    require_artifact(ckpt_path, stage, "run pretrain first");
    require_artifact(ws.data() / "manifest.jsonl", stage, "run curate first");

    ModelConfig mcfg;
    VelocityModel model = load_checkpoint(ckpt_path, &mcfg);
    const auto records = load_dataset(cfg.workspace);

    TrainConfig tcfg = cfg.train;
    tcfg.seed = seed_combine(cfg.seed, sft ? stream::kTrainSft : stream::kTrain);

    const std::string stem =
        sft ? "sft_seed" + std::to_string(cfg.seed)
            : "srum_" + mode_name(cfg.train.mode) + "_seed" + std::to_string(cfg.seed);
    const StepCallback cb = checkpoint_callback(cfg, mcfg, ws, stem);
    const TrainResult result = sft ? train_sft(model, mcfg, records, tcfg, cb)
                                   : train(model, mcfg, records, tcfg, cb);

    nlohmann::ordered_json extra = effective_config_json(cfg, stage);
    extra["mode"] = sft ? "sft" : mode_name(cfg.train.mode);
    extra["lambda_c_effective"] =
        (!sft && cfg.train.mode == AblationMode::no_constraint) ? 0.0 : cfg.train.lambda_c;
    if (sft) extra["lambda_c_effective"] = 0.0;
    save_checkpoint(model, mcfg, ws.checkpoints() / (stem + ".ckpt"), extra);
    write_metrics_csv(result, ws.metrics() / (stem + ".csv"));
    write_stage_config(cfg, stage, ws.metrics() / (stem + ".csv"));
}

} // namespace

void cmd_train(const RunConfig& cfg) { run_training_command(cfg, false); }

void cmd_train_sft(const RunConfig& cfg) { run_training_command(cfg, true); }

void cmd_eval(const RunConfig& cfg, const std::vector<std::string>& checkpoint_names) {
    WorkspaceLock lock(cfg.workspace);
    Workspace ws{cfg.workspace};
    ws.ensure_layout();

    std::vector<std::string> names = checkpoint_names;
    if (names.empty()) {
        for (const auto& entry : std::filesystem::directory_iterator(ws.checkpoints())) {
            if (entry.path().extension() == ".ckpt") {
                names.push_back(entry.path().filename().string());
            }
        }
        std::sort(names.begin(), names.end());
    }
    if (names.empty()) {
        throw std::runtime_error("stage eval requires artifact checkpoints/*.ckpt "
                                 "(run pretrain/train first)");
    }

    const auto suite = eval_specs(cfg);
    std::vector<std::uint64_t> seeds;
    for (int i = 0; i < cfg.eval_seed_count; ++i) {
        seeds.push_back(seed_combine(cfg.seed, seed_combine(stream::kEvalSeed, i)));
    }

    nlohmann::ordered_json out;
    out["suite_size"] = suite.size();
    out["eval_seeds"] = seeds;
    out["eval_sample_steps"] = cfg.eval_sample_steps;
    out["effective_config"] = serialize_config(cfg);
    out["reports"] = nlohmann::ordered_json::array();
    for (const auto& name : names) {
        const auto path = ws.checkpoints() / name;
        require_artifact(path, "eval", "checkpoint name typo?");
        ModelConfig mcfg;
        const VelocityModel model = load_checkpoint(path, &mcfg);
        const auto sampler = model_sampler(model, mcfg, cfg.eval_sample_steps);
        const std::string model_id = name + "@" + checkpoint_id_of(path).substr(0, 8);
        const BenchmarkReport report =
            run_benchmark(sampler, suite, cfg.scene, seeds, model_id);
        out["reports"].push_back(report_to_json(report));

        if (cfg.eval_png_count > 0) {
            const int n = std::min<int>(cfg.eval_png_count, static_cast<int>(suite.size()));
            for (int i = 0; i < n; ++i) {
                const Raster r = sampler(suite[static_cast<std::size_t>(i)],
                                         seed_combine(seeds[0], static_cast<std::size_t>(i)));
                std::vector<std::uint8_t> rgb(r.values.size());
                for (std::size_t k = 0; k < rgb.size(); ++k) {
                    rgb[k] = static_cast<std::uint8_t>(std::lround(r.values[k] * 255.0f));
                }
                io::write_png_rgb8(ws.plots() / ("sample_" + name + "_" + std::to_string(i) +
                                                 ".png"),
                                   r.height, r.width, rgb, 16);
            }
        }
    }
    io::write_file(ws.reports() / "benchmark.json", out.dump(2) + "\n");
}

void cmd_stepwise(const RunConfig& cfg, const std::string& checkpoint_name) {
    WorkspaceLock lock(cfg.workspace);
    Workspace ws{cfg.workspace};
    ws.ensure_layout();
    const auto path = ws.checkpoints() / checkpoint_name;
    require_artifact(path, "stepwise", "run pretrain/train first");

    ModelConfig mcfg;
    const VelocityModel model = load_checkpoint(path, &mcfg);
    auto suite = eval_specs(cfg);
    if (static_cast<int>(suite.size()) > cfg.stepwise_spec_count) {
        suite.resize(static_cast<std::size_t>(cfg.stepwise_spec_count));
    }
    std::string csv = "spec_index,step,layout_score,detail_score\n";
    for (std::size_t i = 0; i < suite.size(); ++i) {
        Rng rng(seed_combine(seed_combine(cfg.seed, stream::kStepwise), i));
        const StepScores scores =
            stepwise_scores(model, mcfg, suite[i], cfg.eval_sample_steps, rng);
        for (std::size_t s = 0; s < scores.layout.size(); ++s) {
            csv += std::to_string(i) + "," + std::to_string(s) + "," +
                   io::format_double_exact(scores.layout[s]) + "," +
                   io::format_double_exact(scores.detail[s]) + "\n";
        }
    }
    const std::string stem = std::filesystem::path(checkpoint_name).stem().string();
    io::write_file(ws.metrics() / ("stepwise_" + stem + ".csv"), csv);
    write_stage_config(cfg, "stepwise", ws.metrics() / ("stepwise_" + stem + ".csv"));
}

void cmd_activations(const RunConfig& cfg, const std::string& checkpoint_name,
                     const std::filesystem::path& clusters_file) {
    WorkspaceLock lock(cfg.workspace);
    Workspace ws{cfg.workspace};
    ws.ensure_layout();
    const auto path = ws.checkpoints() / checkpoint_name;
    require_artifact(path, "activations", "run pretrain/train first");

    ModelConfig mcfg;
    const VelocityModel model = load_checkpoint(path, &mcfg);
    auto suite = eval_specs(cfg);
    if (static_cast<int>(suite.size()) > cfg.activation_spec_count) {
        suite.resize(static_cast<std::size_t>(cfg.activation_spec_count));
    }
    ActivationTrace trace =
        record_activations(model, mcfg, suite, cfg.activation_layer, cfg.activation_t,
                           seed_combine(cfg.seed, stream::kStepwise + 1), "eval-suite");

    std::vector<std::string> cluster_names;
    if (!clusters_file.empty()) {
        // {"clusters": {"name": [indices...]}}
        const auto j = nlohmann::json::parse(io::read_file(clusters_file));
        for (const auto& [name, indices] : j.at("clusters").items()) {
            cluster_names.push_back(name);
            trace.clusters.push_back(indices.get<std::vector<int>>());
        }
    } else {
        // Default probe: the two halves of the recorded layer.
        const int width = static_cast<int>(trace.samples.front().size());
        std::vector<int> lo;
        std::vector<int> hi;
        for (int i = 0; i < width; ++i) {
            (i < width / 2 ? lo : hi).push_back(i);
        }
        cluster_names = {"first_half", "second_half"};
        trace.clusters = {std::move(lo), std::move(hi)};
    }
    const auto strengths = average_activation_strength(trace);

    nlohmann::ordered_json out;
    out["checkpoint"] = checkpoint_name;
    out["dataset_tag"] = trace.dataset_tag;
    out["sample_count"] = trace.samples.size();
    out["layer_index"] = cfg.activation_layer;
    out["strengths"] = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < strengths.size(); ++i) {
        out["strengths"][cluster_names[i]] = strengths[i];
    }
    out["effective_config"] = serialize_config(cfg);
    const std::string stem = std::filesystem::path(checkpoint_name).stem().string();
    io::write_file(ws.reports() / ("activations_" + stem + ".json"), out.dump(2) + "\n");
}

void cmd_plot(const RunConfig& cfg) {
    WorkspaceLock lock(cfg.workspace);
    Workspace ws{cfg.workspace};
    ws.ensure_layout();

    std::vector<BenchmarkReport> reports;
    const auto bench_path = ws.reports() / "benchmark.json";
    if (std::filesystem::exists(bench_path)) {
        const auto j = nlohmann::json::parse(io::read_file(bench_path));
        for (const auto& r : j.at("reports")) {
            reports.push_back(report_from_json(r));
        }
    }

    std::vector<Curve> curves;
    std::vector<std::filesystem::path> csvs;
    if (std::filesystem::exists(ws.metrics())) {
        for (const auto& entry : std::filesystem::directory_iterator(ws.metrics())) {
            if (entry.path().extension() == ".csv" &&
                entry.path().filename().string().rfind("stepwise_", 0) != 0) {
                csvs.push_back(entry.path());
            }
        }
    }
    std::sort(csvs.begin(), csvs.end());
    for (const auto& csv_path : csvs) {
        Curve c;
        c.metric = csv_path.stem().string() + ".l_total";
        c.seed = cfg.seed;
        std::istringstream lines(io::read_file(csv_path));
        std::string line;
        bool header = true;
        while (std::getline(lines, line)) {
            if (header) {
                header = false;
                continue;
            }
            std::stringstream row(line);
            std::string field;
            std::vector<std::string> fields;
            while (std::getline(row, field, ',')) fields.push_back(field);
            if (fields.size() < 4) continue;
            c.points.emplace_back(std::stod(fields[0]), std::stod(fields[3]));
        }
        if (!c.points.empty()) curves.push_back(std::move(c));
    }

    if (reports.empty() && curves.empty()) {
        throw std::runtime_error(
            "stage plot requires artifact reports/benchmark.json or metrics/*.csv "
            "(run eval or train first)");
    }
    emit_plots(reports, curves, ws.plots());
}

} // namespace srum::cli
