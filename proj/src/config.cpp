// Copyright 2026 The SRUM Authors
// SPDX-License-Identifier: Apache-2.0
#include "srum/config.hpp"

#include <cstdlib>
#include <sstream>
#include <stdexcept>

#include "srum/io.hpp"

namespace srum {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

double parse_double(const std::string& key, const std::string& value) {
    char* end = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (end != value.c_str() + value.size() || value.empty()) {
        throw std::invalid_argument("config key '" + key + "': bad number '" + value + "'");
    }
    return v;
}

int parse_int(const std::string& key, const std::string& value) {
    const double v = parse_double(key, value);
    const int i = static_cast<int>(v);
    if (static_cast<double>(i) != v) {
        throw std::invalid_argument("config key '" + key + "': expected integer, got '" + value +
                                    "'");
    }
    return i;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const std::uint64_t v = std::stoull(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("config key '" + key + "': bad unsigned '" + value + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw std::invalid_argument("config key '" + key + "': expected true/false, got '" + value +
                                "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
    std::vector<int> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(parse_int(key, item));
    }
    if (out.empty()) {
        throw std::invalid_argument("config key '" + key + "': empty list");
    }
    return out;
}

} // namespace

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream lines(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(lines, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        if (hash != std::string::npos) raw = raw.substr(0, hash);
        const std::string line = trim(raw);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config line " + std::to_string(line_no) +
                                        " is not key=value: '" + line + "'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));

        if (key == "workspace") cfg.workspace = value;
        else if (key == "seed") cfg.seed = parse_u64(key, value);
        else if (key == "raster_height") cfg.scene.height = parse_int(key, value);
        else if (key == "raster_width") cfg.scene.width = parse_int(key, value);
        else if (key == "grid") cfg.scene.grid = parse_int(key, value);
        else if (key == "hidden_sizes") cfg.hidden = parse_int_list(key, value);
        else if (key == "preset") {
            if (value == "paper") {
                const auto preset = TrainConfig::paper_preset();
                cfg.train.learning_rate = preset.learning_rate;
                cfg.train.warmup_steps = preset.warmup_steps;
            } else if (value != "toy") {
                throw std::invalid_argument("config key 'preset': unknown preset '" + value +
                                            "'");
            }
        }
        else if (key == "lambda_c") cfg.train.lambda_c = parse_double(key, value);
        else if (key == "learning_rate") cfg.train.learning_rate = parse_double(key, value);
        else if (key == "beta1") cfg.train.beta1 = parse_double(key, value);
        else if (key == "beta2") cfg.train.beta2 = parse_double(key, value);
        else if (key == "adam_epsilon") cfg.train.adam_epsilon = parse_double(key, value);
        else if (key == "weight_decay") cfg.train.weight_decay = parse_double(key, value);
        else if (key == "grad_clip") cfg.train.grad_clip = parse_double(key, value);
        else if (key == "warmup_steps") cfg.train.warmup_steps = parse_int(key, value);
        else if (key == "timestep_shift") cfg.train.timestep_shift = parse_double(key, value);
        else if (key == "batch_size") cfg.train.batch_size = parse_int(key, value);
        else if (key == "total_steps") cfg.train.total_steps = parse_int(key, value);
        else if (key == "mode") cfg.train.mode = mode_from_name(value);
        else if (key == "pretrain_steps") cfg.pretrain_steps = parse_int(key, value);
        else if (key == "pretrain_target_lref")
            cfg.pretrain_target_lref = parse_double(key, value);
        else if (key == "pretrain_batch_size") cfg.pretrain_batch_size = parse_int(key, value);
        else if (key == "train_spec_count") cfg.train_spec_count = parse_int(key, value);
        else if (key == "eval_spec_count") cfg.eval_spec_count = parse_int(key, value);
        else if (key == "k_per_spec") cfg.k_per_spec = parse_int(key, value);
        else if (key == "sample_steps") cfg.sample_steps = parse_int(key, value);
        else if (key == "eval_sample_steps") cfg.eval_sample_steps = parse_int(key, value);
        else if (key == "eval_seed_count") cfg.eval_seed_count = parse_int(key, value);
        else if (key == "eval_png_count") cfg.eval_png_count = parse_int(key, value);
        else if (key == "stepwise_spec_count") cfg.stepwise_spec_count = parse_int(key, value);
        else if (key == "activation_spec_count")
            cfg.activation_spec_count = parse_int(key, value);
        else if (key == "activation_layer") cfg.activation_layer = parse_int(key, value);
        else if (key == "activation_t") cfg.activation_t = parse_double(key, value);
        else if (key == "checkpoint_every") cfg.checkpoint_every = parse_int(key, value);
        else if (key == "judge_enabled") cfg.judge.enabled = parse_bool(key, value);
        else if (key == "judge_base_url") cfg.judge.base_url = value;
        else if (key == "judge_cache_dir") cfg.judge.cache_dir = value;
        else if (key == "judge_max_attempts") cfg.judge.max_attempts = parse_int(key, value);
        else {
            throw std::invalid_argument("unknown config key '" + key + "'");
        }
    }

    if (cfg.train.lambda_c < 0.0) throw std::invalid_argument("lambda_c must be >= 0");
    if (cfg.train.learning_rate <= 0.0) throw std::invalid_argument("learning_rate must be > 0");
    if (cfg.train.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (cfg.train.timestep_shift <= 0.0)
        throw std::invalid_argument("timestep_shift must be > 0");
    if (cfg.scene.grid < 1) throw std::invalid_argument("grid must be >= 1");
    if (cfg.k_per_spec < 1) throw std::invalid_argument("k_per_spec must be >= 1");
    return cfg;
}

RunConfig load_config_file(const std::filesystem::path& path) {
    return parse_config_text(io::read_file(path));
}

std::string serialize_config(const RunConfig& cfg) {
    std::string out;
    auto kv = [&out](const std::string& k, const std::string& v) { out += k + " = " + v + "\n"; };
    kv("workspace", cfg.workspace.string());
    kv("seed", std::to_string(cfg.seed));
    kv("raster_height", std::to_string(cfg.scene.height));
    kv("raster_width", std::to_string(cfg.scene.width));
    kv("grid", std::to_string(cfg.scene.grid));
    {
        std::string hs;
        for (std::size_t i = 0; i < cfg.hidden.size(); ++i) {
            if (i > 0) hs += ",";
            hs += std::to_string(cfg.hidden[i]);
        }
        kv("hidden_sizes", hs);
    }
    kv("lambda_c", io::format_double_exact(cfg.train.lambda_c));
    kv("learning_rate", io::format_double_exact(cfg.train.learning_rate));
    kv("beta1", io::format_double_exact(cfg.train.beta1));
    kv("beta2", io::format_double_exact(cfg.train.beta2));
    kv("adam_epsilon", io::format_double_exact(cfg.train.adam_epsilon));
    kv("weight_decay", io::format_double_exact(cfg.train.weight_decay));
    kv("grad_clip", io::format_double_exact(cfg.train.grad_clip));
    kv("warmup_steps", std::to_string(cfg.train.warmup_steps));
    kv("timestep_shift", io::format_double_exact(cfg.train.timestep_shift));
    kv("batch_size", std::to_string(cfg.train.batch_size));
    kv("total_steps", std::to_string(cfg.train.total_steps));
    kv("mode", mode_name(cfg.train.mode));
    kv("pretrain_steps", std::to_string(cfg.pretrain_steps));
    kv("pretrain_target_lref", io::format_double_exact(cfg.pretrain_target_lref));
    kv("pretrain_batch_size", std::to_string(cfg.pretrain_batch_size));
    kv("train_spec_count", std::to_string(cfg.train_spec_count));
    kv("eval_spec_count", std::to_string(cfg.eval_spec_count));
    kv("k_per_spec", std::to_string(cfg.k_per_spec));
    kv("sample_steps", std::to_string(cfg.sample_steps));
    kv("eval_sample_steps", std::to_string(cfg.eval_sample_steps));
    kv("eval_seed_count", std::to_string(cfg.eval_seed_count));
    kv("eval_png_count", std::to_string(cfg.eval_png_count));
    kv("stepwise_spec_count", std::to_string(cfg.stepwise_spec_count));
    kv("activation_spec_count", std::to_string(cfg.activation_spec_count));
    kv("activation_layer", std::to_string(cfg.activation_layer));
    kv("activation_t", io::format_double_exact(cfg.activation_t));
    kv("checkpoint_every", std::to_string(cfg.checkpoint_every));
    kv("judge_enabled", cfg.judge.enabled ? "true" : "false");
    kv("judge_base_url", cfg.judge.base_url);
    kv("judge_cache_dir", cfg.judge.cache_dir.string());
    kv("judge_max_attempts", std::to_string(cfg.judge.max_attempts));
    return out;
}

ModelConfig model_config(const RunConfig& cfg) {
    ModelConfig m;
    m.raster_height = cfg.scene.height;
    m.raster_width = cfg.scene.width;
    m.grid = cfg.scene.grid;
    m.hidden = cfg.hidden;
    return m;
}

} // namespace srum
