// Copyright 2026 The SRUM Authors
// SPDX-License-Identifier: Apache-2.0
//
// Self-data generation pipeline: sample candidates from the current
// model, box/judge/reward them and persist training records.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "srum/genmodel.hpp"
#include "srum/judge.hpp"
#include "srum/reward.hpp"

namespace srum {

struct Provenance {
    std::string checkpoint_id;
    std::uint64_t base_seed = 0;
    int spec_index = 0;
    int candidate_index = 0;
    // Logical stage marker instead of wall-clock time so reruns of the
    // pipeline are byte-identical.
    std::string stage = "curate-v1";
};

struct TrainingRecord {
    SceneSpec spec;
    std::string prompt;
    Raster raster; // the candidate image, used as x0 ground truth
    std::vector<BBox> verified_boxes;
    std::vector<RegionJudgment> region_judgments;
    GlobalJudgment global_judgment;
    RewardMap reward_map;
    double alpha = 0.0;
    Provenance provenance;
};

struct Candidate {
    SceneSpec spec;
    int spec_index = 0;
    int candidate_index = 0;
    std::uint64_t seed = 0;
    Raster raster;
};

// Produces a raster for a spec from a derived seed; the model-backed
// sampler is the production path, tests may inject oracle fields.
using SampleFn = std::function<Raster(const SceneSpec& spec, std::uint64_t seed)>;
SampleFn model_sampler(const VelocityModel& model, const ModelConfig& cfg, int steps);

// k samples per spec, seeded from (base_seed, spec index, candidate index).
std::vector<Candidate> generate_candidates(const SampleFn& sampler,
                                           const std::vector<SceneSpec>& specs, int k_per_spec,
                                           std::uint64_t base_seed);

// Runs propose/verify/judge/reward per candidate. Candidates with no
// verified boxes and a global score at or below -0.9 are unusable and
// dropped; negative-reward candidates are kept.
std::vector<TrainingRecord> curate(const std::vector<Candidate>& candidates,
                                   const std::string& checkpoint_id);

// Validates the in-memory record against its invariants; throws on violation.
void validate_record(const TrainingRecord& record);

// Dataset layout under `root`: data/manifest.jsonl (one record per line
// with root-relative binary paths), data/judgments.jsonl, content-hashed
// float32 binaries under data/rasters/ and rewards/, and data/index.txt
// with a content hash of the whole dataset for cache invalidation.
void write_dataset(const std::vector<TrainingRecord>& records,
                   const std::filesystem::path& root);
std::vector<TrainingRecord> load_dataset(const std::filesystem::path& root);

} // namespace srum
