// Copyright 2026 The SRUM Authors
// SPDX-License-Identifier: Apache-2.0
//
// The understanding-module surrogate: programmatic box proposal and
// verification, region and global layout scoring, and the plain-text
// judgment document format those scores travel in.
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "srum/bbox.hpp"
#include "srum/scene.hpp"

namespace srum {

struct RegionJudgment {
    int region_id = 1;
    BBox bbox;
    std::string identified_object;
    double score = 0.0;
    std::optional<std::string> reason;
    bool operator==(const RegionJudgment&) const = default;
};

struct GlobalJudgment {
    double score = 0.0;
    std::string reason;
    bool operator==(const GlobalJudgment&) const = default;
};

// Scores are emitted at fixed band anchors so the pipeline is reproducible.
namespace band {
constexpr double kClean = 0.95;
constexpr double kDegraded = 0.5;
constexpr double kBackground = 0.0;
constexpr double kNeutralFloor = -0.4;
constexpr double kContradictory = -0.7;
constexpr double kSevere = -0.9;
constexpr double kNoObjects = -1.0;
} // namespace band

// Connected components of pixels deviating from background gray by more
// than 0.15 (per-channel max), as tight boxes sorted by area descending.
std::vector<BBox> propose_boxes(const Raster& raster);

// Keeps a box when its region judgment clears the neutral floor or its
// identified object mentions a prompt keyword; overlapping duplicates
// (IoU > 0.9) collapse to the smaller box.
std::vector<BBox> verify_boxes(const SceneSpec& spec, const Raster& raster,
                               const std::vector<BBox>& boxes);

RegionJudgment judge_region(const Raster& raster, const BBox& bbox, const SceneSpec& spec,
                            int region_id = 1);
GlobalJudgment judge_global(const Raster& raster, const SceneSpec& spec);

// Wire format: region blocks then one global block, "---" separator
// lines, scores printed with exactly two decimals.
std::string emit_document(const std::vector<RegionJudgment>& regions,
                          const GlobalJudgment& global);

struct ParsedDocument {
    std::vector<RegionJudgment> regions;
    GlobalJudgment global;
    bool clamped = false; // some score was outside [-1,1] and pulled back in
};

// Throws std::runtime_error naming the offending line on malformed score
// tokens and on structural problems (duplicate region ids, missing global
// block).
ParsedDocument parse_document(const std::string& text);

// Prompt templates filled for the external scorer.
std::string hybrid_evaluation_prompt(const std::string& original_prompt,
                                     const std::vector<BBox>& boxes);
std::string global_layout_prompt(const std::string& original_prompt);

struct JudgeClientConfig {
    bool enabled = false;
    std::string base_url;          // e.g. http://127.0.0.1:8080
    std::filesystem::path cache_dir = "judge_cache";
    int max_attempts = 3;
    int backoff_initial_ms = 100;
};

// Client for an external scorer endpoint. Responses are cached on disk by
// request content hash; with no endpoint configured only the cache is
// consulted. The bearer token comes from SRUM_JUDGE_TOKEN.
class ExternalJudgeClient {
public:
    explicit ExternalJudgeClient(JudgeClientConfig cfg);

    // Sends one request per template (region analysis, then global layout)
    // and returns the two response texts joined by a separator line.
    std::string request(const std::string& prompt_text, const Raster& image,
                        const std::vector<BBox>& boxes);

    // The JSON body sent for one filled template; cache keys hash this.
    static std::string request_payload(const std::string& filled_prompt, const Raster& image,
                                       const std::vector<BBox>& boxes);
    std::filesystem::path cache_path(const std::string& payload) const;

private:
    std::string request_one(const std::string& filled_prompt, const Raster& image,
                            const std::vector<BBox>& boxes);
    JudgeClientConfig cfg_;
};

} // namespace srum
