// Copyright 2026 The SRUM Authors
// SPDX-License-Identifier: Apache-2.0
#include "srum/selfdata.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "srum/io.hpp"

namespace srum {

SampleFn model_sampler(const VelocityModel& model, const ModelConfig& cfg, int steps) {
    return [model, cfg, steps](const SceneSpec& spec, std::uint64_t seed) {
        Rng rng(seed);
        const CondVector cond = encode_condition(spec, cfg.grid);
        return sample(model, cfg, cond, steps, rng);
    };
}

std::vector<Candidate> generate_candidates(const SampleFn& sampler,
                                           const std::vector<SceneSpec>& specs, int k_per_spec,
                                           std::uint64_t base_seed) {
    if (k_per_spec < 1) {
        throw std::invalid_argument("k_per_spec must be >= 1");
    }
    std::vector<Candidate> out;
    out.reserve(specs.size() * static_cast<std::size_t>(k_per_spec));
    for (std::size_t i = 0; i < specs.size(); ++i) {
        for (int k = 0; k < k_per_spec; ++k) {
            Candidate c;
            c.spec = specs[i];
            c.spec_index = static_cast<int>(i);
            c.candidate_index = k;
            c.seed = seed_combine(seed_combine(base_seed, i), static_cast<std::uint64_t>(k));
            c.raster = sampler(specs[i], c.seed);
            out.push_back(std::move(c));
        }
    }
    return out;
}

std::vector<TrainingRecord> curate(const std::vector<Candidate>& candidates,
                                   const std::string& checkpoint_id) {
    std::vector<TrainingRecord> records;
    for (const auto& cand : candidates) {
        const auto proposals = propose_boxes(cand.raster);
        const auto verified = verify_boxes(cand.spec, cand.raster, proposals);
        const GlobalJudgment global = judge_global(cand.raster, cand.spec);
        if (verified.empty() && global.score <= -0.9) {
            continue; // unusable: nothing locatable and the layout is hopeless
        }
        TrainingRecord rec;
        rec.spec = cand.spec;
        rec.prompt = canonical_prompt(cand.spec);
        rec.raster = cand.raster;
        rec.verified_boxes = verified;
        for (std::size_t b = 0; b < verified.size(); ++b) {
            rec.region_judgments.push_back(
                judge_region(cand.raster, verified[b], cand.spec, static_cast<int>(b) + 1));
        }
        rec.global_judgment = global;
        rec.reward_map =
            rasterize_rewards(rec.region_judgments, cand.raster.height, cand.raster.width);
        rec.alpha = normalize_global(global.score).alpha;
        rec.provenance.checkpoint_id = checkpoint_id;
        rec.provenance.base_seed = cand.seed;
        rec.provenance.spec_index = cand.spec_index;
        rec.provenance.candidate_index = cand.candidate_index;
        validate_record(rec);
        records.push_back(std::move(rec));
    }
    return records;
}

void validate_record(const TrainingRecord& record) {
    if (record.reward_map.height != record.raster.height ||
        record.reward_map.width != record.raster.width) {
        throw std::runtime_error("record reward map dimensions do not match raster");
    }
    if (record.alpha < 0.0 || record.alpha > 1.0) {
        throw std::runtime_error("record alpha outside [0,1]");
    }
    for (float v : record.raster.values) {
        if (!std::isfinite(v) || v < 0.0f || v > 1.0f) {
            throw std::runtime_error("record raster value outside [0,1]");
        }
    }
    for (float v : record.reward_map.values) {
        if (!std::isfinite(v) || v < -1.0f || v > 1.0f) {
            throw std::runtime_error("record reward value outside [-1,1]");
        }
    }
    for (const auto& j : record.region_judgments) {
        if (j.score < -1.0 || j.score > 1.0) {
            throw std::runtime_error("region judgment score outside [-1,1]");
        }
        if (std::find(record.verified_boxes.begin(), record.verified_boxes.end(), j.bbox) ==
            record.verified_boxes.end()) {
            throw std::runtime_error("region judgment bbox not among verified boxes");
        }
    }
    if (record.global_judgment.score < -1.0 || record.global_judgment.score > 1.0) {
        throw std::runtime_error("global judgment score outside [-1,1]");
    }
}

namespace {

nlohmann::ordered_json bbox_json(const BBox& b) {
    return nlohmann::ordered_json::array({b.x0, b.y0, b.x1, b.y1});
}

BBox bbox_from_json(const nlohmann::json& j) {
    return BBox{j.at(0).get<int>(), j.at(1).get<int>(), j.at(2).get<int>(), j.at(3).get<int>()};
}

nlohmann::ordered_json region_judgment_json(const RegionJudgment& r) {
    nlohmann::ordered_json j;
    j["region_id"] = r.region_id;
    j["bbox"] = bbox_json(r.bbox);
    j["identified_object"] = r.identified_object;
    j["score"] = r.score;
    j["reason"] = r.reason.has_value() ? nlohmann::ordered_json(*r.reason)
                                       : nlohmann::ordered_json(nullptr);
    return j;
}

} // namespace

void write_dataset(const std::vector<TrainingRecord>& records,
                   const std::filesystem::path& root) {
    const std::filesystem::path dir = root / "data";
    std::filesystem::create_directories(dir / "rasters");
    std::filesystem::create_directories(root / "rewards");
    std::string manifest;
    std::string judgments;
    std::string content_hash_input;
    for (const auto& rec : records) {
        const std::string raster_bytes =
            io::grid_f32_bytes(rec.raster.height, rec.raster.width, rec.raster.values);
        const std::string reward_bytes = io::grid_f32_bytes(
            rec.reward_map.height, rec.reward_map.width, rec.reward_map.values);
        const std::string raster_rel =
            "data/rasters/" + io::hex64(io::fnv1a64(raster_bytes)) + ".bin";
        const std::string reward_rel =
            "rewards/" + io::hex64(io::fnv1a64(reward_bytes)) + ".bin";
        io::write_file(root / raster_rel, raster_bytes);
        io::write_file(root / reward_rel, reward_bytes);

        nlohmann::ordered_json j;
        j["spec"] = spec_to_json(rec.spec);
        j["prompt"] = rec.prompt;
        j["raster_path"] = raster_rel;
        j["reward_path"] = reward_rel;
        j["verified_boxes"] = nlohmann::ordered_json::array();
        for (const auto& b : rec.verified_boxes) j["verified_boxes"].push_back(bbox_json(b));
        j["region_judgments"] = nlohmann::ordered_json::array();
        for (const auto& r : rec.region_judgments) {
            j["region_judgments"].push_back(region_judgment_json(r));
        }
        j["global_judgment"] = {{"score", rec.global_judgment.score},
                                {"reason", rec.global_judgment.reason}};
        j["alpha"] = rec.alpha;
        j["provenance"] = {{"checkpoint_id", rec.provenance.checkpoint_id},
                           {"base_seed", rec.provenance.base_seed},
                           {"spec_index", rec.provenance.spec_index},
                           {"candidate_index", rec.provenance.candidate_index},
                           {"stage", rec.provenance.stage}};
        manifest += j.dump() + "\n";

        for (const auto& r : rec.region_judgments) {
            judgments += region_judgment_json(r).dump() + "\n";
        }
        nlohmann::ordered_json g;
        g["global_score"] = rec.global_judgment.score;
        g["reason"] = rec.global_judgment.reason;
        judgments += g.dump() + "\n";

        content_hash_input += raster_bytes;
        content_hash_input += reward_bytes;
    }
    io::write_file(dir / "manifest.jsonl", manifest);
    io::write_file(dir / "judgments.jsonl", judgments);
    content_hash_input += manifest;
    io::write_file(dir / "index.txt", io::hex64(io::fnv1a64(content_hash_input)) + "\n");
}

std::vector<TrainingRecord> load_dataset(const std::filesystem::path& root) {
    const std::filesystem::path dir = root / "data";
    const std::string manifest = io::read_file(dir / "manifest.jsonl");
    std::vector<TrainingRecord> records;
    std::istringstream lines(manifest);
    std::string line;
    while (std::getline(lines, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        TrainingRecord rec;
        rec.spec = spec_from_json(j.at("spec"));
        rec.prompt = j.at("prompt").get<std::string>();
        {
            int h = 0;
            int w = 0;
            auto values =
                io::read_grid_f32(root / j.at("raster_path").get<std::string>(), &h, &w);
            rec.raster.height = h;
            rec.raster.width = w;
            rec.raster.values = std::move(values);
        }
        {
            int h = 0;
            int w = 0;
            auto values =
                io::read_grid_f32(root / j.at("reward_path").get<std::string>(), &h, &w);
            rec.reward_map.height = h;
            rec.reward_map.width = w;
            rec.reward_map.values = std::move(values);
        }
        for (const auto& b : j.at("verified_boxes")) {
            rec.verified_boxes.push_back(bbox_from_json(b));
        }
        for (const auto& r : j.at("region_judgments")) {
            RegionJudgment rj;
            rj.region_id = r.at("region_id").get<int>();
            rj.bbox = bbox_from_json(r.at("bbox"));
            rj.identified_object = r.at("identified_object").get<std::string>();
            rj.score = r.at("score").get<double>();
            if (!r.at("reason").is_null()) {
                rj.reason = r.at("reason").get<std::string>();
            }
            rec.region_judgments.push_back(std::move(rj));
        }
        rec.global_judgment.score = j.at("global_judgment").at("score").get<double>();
        rec.global_judgment.reason = j.at("global_judgment").at("reason").get<std::string>();
        rec.alpha = j.at("alpha").get<double>();
        const auto& p = j.at("provenance");
        rec.provenance.checkpoint_id = p.at("checkpoint_id").get<std::string>();
        rec.provenance.base_seed = p.at("base_seed").get<std::uint64_t>();
        rec.provenance.spec_index = p.at("spec_index").get<int>();
        rec.provenance.candidate_index = p.at("candidate_index").get<int>();
        rec.provenance.stage = p.at("stage").get<std::string>();
        validate_record(rec);
        records.push_back(std::move(rec));
    }
    return records;
}

} // namespace srum
