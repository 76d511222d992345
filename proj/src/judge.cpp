// Copyright 2026 The SRUM Authors
// SPDX-License-Identifier: Apache-2.0
#include "srum/judge.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <mutex>
#include <queue>
#include <set>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "srum/io.hpp"

namespace srum {

namespace {

constexpr double kDeviationThreshold = 0.15;

double deviation(const Raster& r, int y, int x) {
    double d = 0.0;
    for (int c = 0; c < 3; ++c) {
        d = std::max(d, std::abs(static_cast<double>(r.at(y, x, c)) - 0.5));
    }
    return d;
}

bool box_order(const BBox& a, const BBox& b) {
    if (a.area() != b.area()) return a.area() > b.area();
    if (a.y0 != b.y0) return a.y0 < b.y0;
    if (a.x0 != b.x0) return a.x0 < b.x0;
    if (a.y1 != b.y1) return a.y1 < b.y1;
    return a.x1 < b.x1;
}

} // namespace

std::vector<BBox> propose_boxes(const Raster& raster) {
    const int h = raster.height;
    const int w = raster.width;
    std::vector<std::uint8_t> fg(static_cast<std::size_t>(h) * w, 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            fg[static_cast<std::size_t>(y) * w + x] = deviation(raster, y, x) > kDeviationThreshold;
        }
    }
    std::vector<int> label(static_cast<std::size_t>(h) * w, -1);
    std::vector<BBox> boxes;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t idx = static_cast<std::size_t>(y) * w + x;
            if (!fg[idx] || label[idx] >= 0) continue;
            const int id = static_cast<int>(boxes.size());
            BBox box{x, y, x + 1, y + 1};
            std::queue<std::pair<int, int>> q;
            q.push({y, x});
            label[idx] = id;
            while (!q.empty()) {
                const auto [cy, cx] = q.front();
                q.pop();
                box.x0 = std::min(box.x0, cx);
                box.y0 = std::min(box.y0, cy);
                box.x1 = std::max(box.x1, cx + 1);
                box.y1 = std::max(box.y1, cy + 1);
                constexpr int dy[4] = {-1, 1, 0, 0};
                constexpr int dx[4] = {0, 0, -1, 1};
                for (int k = 0; k < 4; ++k) {
                    const int ny = cy + dy[k];
                    const int nx = cx + dx[k];
                    if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
                    const std::size_t nidx = static_cast<std::size_t>(ny) * w + nx;
                    if (fg[nidx] && label[nidx] < 0) {
                        label[nidx] = id;
                        q.push({ny, nx});
                    }
                }
            }
            boxes.push_back(box);
        }
    }
    std::sort(boxes.begin(), boxes.end(), box_order);
    return boxes;
}

namespace {

std::vector<std::string> prompt_keywords(const SceneSpec& spec) {
    std::set<std::string> words;
    for (const auto& o : spec.objects) {
        words.insert(shape_name(o.shape));
        words.insert(color_name(o.color));
    }
    return {words.begin(), words.end()};
}

bool identity_prompted(const SceneSpec& spec, Shape s, Color c) {
    for (const auto& o : spec.objects) {
        if (o.shape == s && o.color == c) return true;
    }
    return false;
}

} // namespace

RegionJudgment judge_region(const Raster& raster, const BBox& bbox, const SceneSpec& spec,
                            int region_id) {
    require_valid(bbox, raster.height, raster.width);
    RegionJudgment j;
    j.region_id = region_id;
    j.bbox = bbox;
    if (bbox.width() < 2 || bbox.height() < 2) {
        j.identified_object = "unidentifiable artifact";
        j.score = band::kSevere;
        return j;
    }
    const TemplateMatch m = best_template_match(raster, bbox);
    if (!m.occupied) {
        j.identified_object = "background region";
        j.score = band::kBackground;
        return j;
    }
    if (m.cosine < 0.3) {
        j.identified_object = "distorted region";
        j.score = band::kSevere;
        return j;
    }
    j.identified_object = "a " + color_name(m.color) + " " + shape_name(m.shape);
    if (!identity_prompted(spec, m.shape, m.color)) {
        j.score = band::kContradictory;
        return j;
    }
    // Prompted object: clean at full contrast and confident geometry,
    // degraded when the match is weak or the color is washed out.
    j.score = (m.cosine >= 0.8 && m.amplitude >= 0.5) ? band::kClean : band::kDegraded;
    return j;
}

std::vector<BBox> verify_boxes(const SceneSpec& spec, const Raster& raster,
                               const std::vector<BBox>& boxes) {
    const auto keywords = prompt_keywords(spec);
    std::vector<BBox> kept;
    for (const auto& box : boxes) {
        const RegionJudgment j = judge_region(raster, box, spec);
        bool keep = j.score >= band::kNeutralFloor;
        if (!keep) {
            for (const auto& kw : keywords) {
                if (j.identified_object.find(kw) != std::string::npos) {
                    keep = true;
                    break;
                }
            }
        }
        if (keep) kept.push_back(box);
    }
    // Duplicate suppression: smaller box wins above IoU 0.9.
    std::sort(kept.begin(), kept.end(), [](const BBox& a, const BBox& b) {
        if (a.area() != b.area()) return a.area() < b.area();
        if (a.y0 != b.y0) return a.y0 < b.y0;
        if (a.x0 != b.x0) return a.x0 < b.x0;
        if (a.y1 != b.y1) return a.y1 < b.y1;
        return a.x1 < b.x1;
    });
    std::vector<BBox> unique;
    for (const auto& box : kept) {
        bool duplicate = false;
        for (const auto& u : unique) {
            if (iou(box, u) > 0.9) {
                duplicate = true;
                break;
            }
        }
        if (!duplicate) unique.push_back(box);
    }
    std::sort(unique.begin(), unique.end(), box_order);
    return unique;
}

namespace {

std::vector<Detection> detect_components(const Raster& raster) {
    std::vector<Detection> dets;
    for (const auto& box : propose_boxes(raster)) {
        const TemplateMatch m = best_template_match(raster, box);
        if (m.occupied && m.cosine >= 0.5) {
            dets.push_back({m.shape, m.color, (box.y0 + box.y1) / 2.0, (box.x0 + box.x1) / 2.0,
                            m.cosine});
        }
    }
    return dets;
}

enum class RelationStatus { satisfied, contradicted, unverifiable };

RelationStatus relation_status(const Relation& rel, const SceneSpec& spec,
                               const std::vector<Detection>& dets) {
    const auto& subj = spec.objects[rel.subject];
    const auto& obj = spec.objects[rel.object];
    bool subj_found = false;
    bool obj_found = false;
    bool pair_found = false;
    for (std::size_t i = 0; i < dets.size(); ++i) {
        const bool is_subj = dets[i].shape == subj.shape && dets[i].color == subj.color;
        const bool is_obj = dets[i].shape == obj.shape && dets[i].color == obj.color;
        subj_found = subj_found || is_subj;
        obj_found = obj_found || is_obj;
        if (!is_subj) continue;
        for (std::size_t k = 0; k < dets.size(); ++k) {
            if (i == k) continue;
            if (dets[k].shape != obj.shape || dets[k].color != obj.color) continue;
            if (relation_holds(rel.predicate, dets[i].cy, dets[i].cx, dets[k].cy, dets[k].cx)) {
                pair_found = true;
            }
        }
    }
    if (pair_found) return RelationStatus::satisfied;
    if (subj_found && obj_found) return RelationStatus::contradicted;
    return RelationStatus::unverifiable;
}

} // namespace

GlobalJudgment judge_global(const Raster& raster, const SceneSpec& spec) {
    const auto dets = detect_components(raster);
    GlobalJudgment g;
    if (spec.has_spatial_directive) {
        if (dets.empty()) {
            g.score = band::kNoObjects;
            g.reason = "No prompted objects detected.";
            return g;
        }
        int satisfied = 0;
        std::optional<Predicate> contradicted;
        for (const auto& rel : spec.relations) {
            switch (relation_status(rel, spec, dets)) {
            case RelationStatus::satisfied:
                ++satisfied;
                break;
            case RelationStatus::contradicted:
                if (!contradicted) contradicted = rel.predicate;
                break;
            case RelationStatus::unverifiable:
                break;
            }
        }
        const int total = static_cast<int>(spec.relations.size());
        if (contradicted) {
            g.score = band::kContradictory;
            g.reason = "Relation '" + predicate_name(*contradicted) +
                       "' is contradicted by the detected layout.";
        } else if (satisfied == total) {
            g.score = band::kClean;
            g.reason = "All " + std::to_string(total) +
                       " spatial relation(s) satisfied by the detected layout.";
        } else {
            g.score = 0.5 + 0.4 * (static_cast<double>(satisfied) / total);
            g.reason = std::to_string(satisfied) + " of " + std::to_string(total) +
                       " spatial relation(s) satisfied; some prompted objects were not detected.";
        }
        return g;
    }
    // Neutral band for prompts with no spatial directive.
    std::map<std::pair<int, int>, int> expected;
    for (const auto& o : spec.objects) {
        ++expected[{static_cast<int>(o.shape), static_cast<int>(o.color)}];
    }
    std::map<std::pair<int, int>, int> found;
    for (const auto& d : dets) {
        ++found[{static_cast<int>(d.shape), static_cast<int>(d.color)}];
    }
    int matched = 0;
    for (const auto& [key, n] : expected) {
        auto it = found.find(key);
        matched += std::min(n, it == found.end() ? 0 : it->second);
    }
    const double frac = static_cast<double>(matched) / static_cast<double>(spec.objects.size());
    g.score = std::clamp(0.8 * frac - 0.4, -0.4, 0.4);
    g.reason = "No spatial directive; " + std::to_string(matched) + " of " +
               std::to_string(spec.objects.size()) + " prompted object(s) detected.";
    return g;
}

namespace {

std::string score_text(double s) {
    // Avoid "-0.00" for tiny negative values.
    if (s == 0.0) s = 0.0;
    return io::format_double(s, 2);
}

} // namespace

std::string emit_document(const std::vector<RegionJudgment>& regions,
                          const GlobalJudgment& global) {
    std::string out;
    for (const auto& r : regions) {
        out += "Region ID: " + std::to_string(r.region_id) + "\n";
        out += "Identified Object: " + r.identified_object + "\n";
        out += "Score: " + score_text(r.score) + "\n";
        if (r.reason) {
            out += "Reason: " + *r.reason + "\n";
        }
        out += "---\n";
    }
    out += "Score: " + score_text(global.score) + "\n";
    out += "Reason: " + global.reason + "\n";
    return out;
}

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::string strip_emphasis(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && s[b] == '*') ++b;
    while (e > b && s[e - 1] == '*') --e;
    return trim(s.substr(b, e - b));
}

bool is_separator(const std::string& line) {
    if (line.size() < 3) return false;
    return line.find_first_not_of('-') == std::string::npos;
}

struct RawLine {
    std::string text;
    int number;
};

double parse_score_token(const std::string& token, int line_number) {
    const std::string t = trim(token);
    if (t.empty()) {
        throw std::runtime_error("malformed score token at line " + std::to_string(line_number) +
                                 ": empty value");
    }
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size()) {
        throw std::runtime_error("malformed score token at line " + std::to_string(line_number) +
                                 ": '" + t + "'");
    }
    return v;
}

} // namespace

ParsedDocument parse_document(const std::string& text) {
    std::vector<std::vector<RawLine>> blocks(1);
    {
        std::size_t pos = 0;
        int line_number = 0;
        while (pos <= text.size()) {
            const std::size_t nl = text.find('\n', pos);
            const std::string raw =
                nl == std::string::npos ? text.substr(pos) : text.substr(pos, nl - pos);
            ++line_number;
            const std::string line = strip_emphasis(trim(raw));
            if (is_separator(line)) {
                blocks.emplace_back();
            } else if (!line.empty()) {
                blocks.back().push_back({line, line_number});
            }
            if (nl == std::string::npos) break;
            pos = nl + 1;
        }
    }

    ParsedDocument doc;
    bool have_global = false;
    std::set<int> seen_ids;
    for (const auto& block : blocks) {
        if (block.empty()) continue;
        std::optional<int> region_id;
        std::optional<std::string> identified;
        std::optional<double> score;
        std::optional<std::string> reason;
        int score_line = 0;
        for (const auto& [line, number] : block) {
            const auto colon = line.find(':');
            if (colon == std::string::npos) continue;
            const std::string key = trim(line.substr(0, colon));
            const std::string value = trim(line.substr(colon + 1));
            if (key == "Region ID") {
                try {
                    region_id = std::stoi(value);
                } catch (const std::exception&) {
                    throw std::runtime_error("malformed region id at line " +
                                             std::to_string(number) + ": '" + value + "'");
                }
            } else if (key == "Identified Object") {
                identified = value;
            } else if (key == "Score") {
                score = parse_score_token(value, number);
                score_line = number;
            } else if (key == "Reason") {
                reason = value;
            }
        }
        if (!score.has_value()) {
            throw std::runtime_error("block starting at line " + std::to_string(block[0].number) +
                                     " has no Score line");
        }
        double s = *score;
        if (s < -1.0 || s > 1.0) {
            s = std::clamp(s, -1.0, 1.0);
            doc.clamped = true;
            (void)score_line;
        }
        if (region_id.has_value()) {
            if (*region_id < 1) {
                throw std::runtime_error("region id must be >= 1 (block at line " +
                                         std::to_string(block[0].number) + ")");
            }
            if (!seen_ids.insert(*region_id).second) {
                throw std::runtime_error("duplicate region id " + std::to_string(*region_id));
            }
            if (!identified.has_value() || identified->empty()) {
                throw std::runtime_error("region block at line " +
                                         std::to_string(block[0].number) +
                                         " has no Identified Object line");
            }
            RegionJudgment r;
            r.region_id = *region_id;
            r.identified_object = *identified;
            r.score = s;
            r.reason = reason;
            doc.regions.push_back(std::move(r));
        } else {
            if (have_global) {
                throw std::runtime_error("multiple global blocks in document");
            }
            if (!reason.has_value()) {
                throw std::runtime_error("global block is missing its Reason line");
            }
            doc.global.score = s;
            doc.global.reason = *reason;
            have_global = true;
        }
    }
    if (!have_global) {
        throw std::runtime_error("document has no global block");
    }
    return doc;
}

namespace {

const char* kHybridTemplate = R"(# TASK: Integrated Region Analysis and Scoring
You are an expert AI image analyst.
Your task is to analyze unlabeled regions in an image
based on a user's prompt.
For each region, you will perform a two-stage analysis.

**Original Prompt:** "{original_prompt}"
---
**UNLABELED REGIONS FOR YOUR ANALYSIS:**
{regions_text}
---
## YOUR TWO-STAGE TASK & OUTPUT FORMAT
For **every Region ID** listed above,
you must perform the following steps.

### STAGE 1: Identify Object
First, identify the primary object within the bounding box.
* **Output Line:**
`Identified Object: [Your description of the object]`

### STAGE 2: Score and Justify
Provide a single, overall score
from **-1.0 to 1.0** that considers BOTH the object's
**relevance** to the prompt and its **visual quality**.
You must provide a clear reason for your score.
Be as strict as possible and only give full marks
when the image quality is beyond doubt.

* **Scoring Guide:**
    * **1.0:** Perfect. The object is exactly what the
    prompt asks for and is technically flawless and perfect.
    * **0.5 to 0.9:** Very good. A highly relevant object
    with minor flaws, or a well-executed secondary element.
    * **-0.4 to 0.4:** Neutral/Acceptable. A moderately
    relevant object, an object with mixed qualities, or an
    irrelevant but harmless background element.
    A score of 0.0 is perfectly neutral.
    * **-0.9 to -0.5:** Bad. The object is irrelevant
    and distracting, or it is a relevant object with
    severe visual artifacts/flaws.
    * **-1.0:** Very Bad. The object actively
    undermines the image and directly
    contradicts the prompt's intent.

* **Output Lines:**
    `Score: [A single number between -1.0 and 1.0]`
---
## EXAMPLE OUTPUT STRUCTURE
**Region ID: 1**
Identified Object: A running golden retriever.
Score: 0.95
---
**Region ID: 2**
Identified Object: A tall green tree in the background.
Score: 0.2
---
Begin your analysis now.
)";

const char* kGlobalTemplate = R"(# TASK: Global Layout and Composition Analysis
You are an expert image analyst.

Your task is to score the overall composition
of an image based on a user's prompt. Focus solely
on how the arrangement of elements and scene structure
align with the prompt's spatial intent.

**Original Prompt:** "{original_prompt}"
---
## YOUR TASK & OUTPUT FORMAT
Provide a single score from **-1.0 to 1.0** and a brief reason.

* **Scoring Guide:**
* **1.0:** Perfect alignment with the prompt's
spatial intent.
* **0.5 to 0.9:** Mostly correct layout
with minor flaws.
* **-0.4 to 0.4:** Neutral. No specific spatial
info in prompt, or generic layout.
* **-0.9 to -0.5:** Incorrect layout or
contradictory to the prompt.
* **-1.0:** Fundamentally contradicts the
prompt's spatial intent.

* **Output Lines:**
    `Score: [A single number between -1.0 and 1.0]`
    `Reason: [Your justification]`
---
## DIVERSE EXAMPLES

### Example 1 (Perfect Alignment)
Score: 0.95
Reason: The wide shot of a sunset over the ocean perfectly
matches the prompt's implied composition.

### Example 2 (Contradictory Layout)
Score: -0.7
Reason: The cat is on the right of the dog, but the prompt
asked for the cat on the left.
---
Begin your analysis now.
)";

std::string replace_slot(std::string text, const std::string& slot, const std::string& value) {
    const auto pos = text.find(slot);
    if (pos != std::string::npos) {
        text.replace(pos, slot.size(), value);
    }
    return text;
}

} // namespace

std::string hybrid_evaluation_prompt(const std::string& original_prompt,
                                     const std::vector<BBox>& boxes) {
    std::string regions_text;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        const auto& b = boxes[i];
        regions_text += "Region ID: " + std::to_string(i + 1) + " | BBox: [" +
                        std::to_string(b.x0) + ", " + std::to_string(b.y0) + ", " +
                        std::to_string(b.x1) + ", " + std::to_string(b.y1) + "]\n";
    }
    std::string out = replace_slot(kHybridTemplate, "{original_prompt}", original_prompt);
    return replace_slot(std::move(out), "{regions_text}", regions_text);
}

std::string global_layout_prompt(const std::string& original_prompt) {
    return replace_slot(kGlobalTemplate, "{original_prompt}", original_prompt);
}

ExternalJudgeClient::ExternalJudgeClient(JudgeClientConfig cfg) : cfg_(std::move(cfg)) {}

std::filesystem::path ExternalJudgeClient::cache_path(const std::string& payload) const {
    return cfg_.cache_dir / (io::hex64(io::fnv1a64(payload)) + ".txt");
}

namespace {
std::mutex g_cache_write_mutex;
} // namespace

std::string ExternalJudgeClient::request_payload(const std::string& filled_prompt,
                                                 const Raster& image,
                                                 const std::vector<BBox>& boxes) {
    nlohmann::ordered_json body;
    body["prompt"] = filled_prompt;
    body["image_hex"] = [&image] {
        const std::string bytes = io::grid_f32_bytes(image.height, image.width, image.values);
        static const char* digits = "0123456789abcdef";
        std::string hex;
        hex.reserve(bytes.size() * 2);
        for (unsigned char ch : bytes) {
            hex.push_back(digits[ch >> 4]);
            hex.push_back(digits[ch & 0xf]);
        }
        return hex;
    }();
    body["boxes"] = nlohmann::ordered_json::array();
    for (const auto& b : boxes) {
        body["boxes"].push_back({b.x0, b.y0, b.x1, b.y1});
    }
    return body.dump();
}

std::string ExternalJudgeClient::request_one(const std::string& filled_prompt,
                                             const Raster& image,
                                             const std::vector<BBox>& boxes) {
    const std::string payload = request_payload(filled_prompt, image, boxes);
    const auto cached = cache_path(payload);
    if (std::filesystem::exists(cached)) {
        return io::read_file(cached);
    }
    if (!cfg_.enabled || cfg_.base_url.empty()) {
        throw std::runtime_error("external judge unavailable: offline and no cached response");
    }

    httplib::Client client(cfg_.base_url);
    client.set_connection_timeout(5, 0);
    client.set_read_timeout(30, 0);
    httplib::Headers headers;
    if (const char* token = std::getenv("SRUM_JUDGE_TOKEN")) {
        headers.emplace("Authorization", std::string("Bearer ") + token);
    }
    int backoff_ms = cfg_.backoff_initial_ms;
    for (int attempt = 1; attempt <= cfg_.max_attempts; ++attempt) {
        auto res = client.Post("/v1/score", headers, payload, "application/json");
        if (res && res->status == 200) {
            std::lock_guard<std::mutex> lock(g_cache_write_mutex);
            io::write_file(cached, res->body);
            return res->body;
        }
        if (attempt < cfg_.max_attempts) {
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
            backoff_ms *= 2;
        }
    }
    throw std::runtime_error("external judge request failed after " +
                             std::to_string(cfg_.max_attempts) + " attempts");
}

std::string ExternalJudgeClient::request(const std::string& prompt_text, const Raster& image,
                                         const std::vector<BBox>& boxes) {
    const std::string regions = request_one(hybrid_evaluation_prompt(prompt_text, boxes), image,
                                            boxes);
    const std::string layout = request_one(global_layout_prompt(prompt_text), image, boxes);
    std::string out = regions;
    if (!out.empty() && out.back() != '\n') out += "\n";
    out += "---\n";
    out += layout;
    return out;
}

} // namespace srum
