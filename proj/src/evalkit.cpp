// Copyright 2026 The SRUM Authors
// SPDX-License-Identifier: Apache-2.0
#include "srum/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "srum/io.hpp"
#include "srum/judge.hpp"

namespace srum {

namespace {

CategoryStats stats_over_seeds(const std::vector<double>& values, bool present) {
    CategoryStats s;
    s.present = present;
    if (!present || values.empty()) return s;
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    if (values.size() > 1) {
        double acc = 0.0;
        for (double v : values) acc += (v - s.mean) * (v - s.mean);
        s.stddev = std::sqrt(acc / static_cast<double>(values.size() - 1));
    }
    return s;
}

nlohmann::ordered_json stats_json(const CategoryStats& s) {
    nlohmann::ordered_json j;
    j["present"] = s.present;
    j["mean"] = s.mean;
    j["stddev"] = s.stddev;
    return j;
}

CategoryStats stats_from_json(const nlohmann::json& j) {
    CategoryStats s;
    s.present = j.at("present").get<bool>();
    s.mean = j.at("mean").get<double>();
    s.stddev = j.at("stddev").get<double>();
    return s;
}

} // namespace

nlohmann::ordered_json report_to_json(const BenchmarkReport& report) {
    nlohmann::ordered_json j;
    j["model_id"] = report.model_id;
    j["sample_count"] = report.sample_count;
    j["color"] = stats_json(report.color);
    j["shape"] = stats_json(report.shape);
    j["spatial"] = stats_json(report.spatial);
    j["counting"] = stats_json(report.counting);
    j["overall"] = stats_json(report.overall);
    return j;
}

BenchmarkReport report_from_json(const nlohmann::json& j) {
    BenchmarkReport r;
    r.model_id = j.at("model_id").get<std::string>();
    r.sample_count = j.at("sample_count").get<int>();
    r.color = stats_from_json(j.at("color"));
    r.shape = stats_from_json(j.at("shape"));
    r.spatial = stats_from_json(j.at("spatial"));
    r.counting = stats_from_json(j.at("counting"));
    r.overall = stats_from_json(j.at("overall"));
    return r;
}

BenchmarkReport run_benchmark(const SampleFn& sampler, const std::vector<SceneSpec>& suite,
                              const SceneConfig& scene_cfg,
                              const std::vector<std::uint64_t>& seeds,
                              const std::string& model_id) {
    if (suite.empty() || seeds.empty()) {
        throw std::invalid_argument("run_benchmark: empty suite or seed list");
    }
    std::vector<double> color_acc;
    std::vector<double> shape_acc;
    std::vector<double> spatial_acc;
    std::vector<double> counting_acc;
    std::vector<double> overall_acc;
    bool any_spatial = false;
    bool any_counting = false;
    for (const std::uint64_t seed : seeds) {
        int color_ok = 0;
        int shape_ok = 0;
        int spatial_ok = 0;
        int spatial_n = 0;
        int count_ok = 0;
        int count_n = 0;
        for (std::size_t i = 0; i < suite.size(); ++i) {
            const Raster raster = sampler(suite[i], seed_combine(seed, i));
            const CategoryVerdicts v = check_ground_truth(raster, suite[i], scene_cfg);
            color_ok += v.color_ok;
            shape_ok += v.shape_ok;
            if (suite[i].has_spatial_directive) {
                ++spatial_n;
                spatial_ok += v.spatial_ok;
            }
            if (!suite[i].count_constraints.empty()) {
                ++count_n;
                count_ok += v.count_ok;
            }
        }
        const double n = static_cast<double>(suite.size());
        const double c_color = 100.0 * color_ok / n;
        const double c_shape = 100.0 * shape_ok / n;
        color_acc.push_back(c_color);
        shape_acc.push_back(c_shape);
        double sum = c_color + c_shape;
        int cats = 2;
        if (spatial_n > 0) {
            any_spatial = true;
            const double c = 100.0 * spatial_ok / spatial_n;
            spatial_acc.push_back(c);
            sum += c;
            ++cats;
        }
        if (count_n > 0) {
            any_counting = true;
            const double c = 100.0 * count_ok / count_n;
            counting_acc.push_back(c);
            sum += c;
            ++cats;
        }
        overall_acc.push_back(sum / cats);
    }
    BenchmarkReport report;
    report.model_id = model_id;
    report.sample_count = static_cast<int>(suite.size() * seeds.size());
    report.color = stats_over_seeds(color_acc, true);
    report.shape = stats_over_seeds(shape_acc, true);
    report.spatial = stats_over_seeds(spatial_acc, any_spatial);
    report.counting = stats_over_seeds(counting_acc, any_counting);
    report.overall = stats_over_seeds(overall_acc, true);
    return report;
}

StepScores stepwise_scores(const VelocityModel& model, const ModelConfig& cfg,
                           const SceneSpec& spec, int steps, Rng& rng) {
    if (steps < 1) {
        throw std::invalid_argument("stepwise_scores: steps must be >= 1");
    }
    const SceneConfig scene_cfg{cfg.raster_height, cfg.raster_width, cfg.grid};
    std::vector<BBox> true_boxes;
    for (const auto& obj : spec.objects) {
        true_boxes.push_back(stamp_box(scene_cfg, obj.row, obj.col));
    }
    const CondVector cond = encode_condition(spec, cfg.grid);
    StepScores scores;
    scores.layout.reserve(static_cast<std::size_t>(steps));
    scores.detail.reserve(static_cast<std::size_t>(steps));

    Vec eps(static_cast<std::size_t>(cfg.data_dim()));
    for (auto& e : eps) e = rng.normal();
    euler_integrate(
        [&](const Vec& x, double t) {
            Vec v = velocity(model, x, t, cond);
            const Vec x0_hat = predict_x0(x, t, v);
            const Raster snapshot = to_raster(x0_hat, cfg.raster_height, cfg.raster_width);
            scores.layout.push_back(judge_global(snapshot, spec).score);
            double detail = 0.0;
            for (const auto& box : true_boxes) {
                detail += judge_region(snapshot, box, spec).score;
            }
            scores.detail.push_back(detail / static_cast<double>(true_boxes.size()));
            return v;
        },
        eps, steps);
    return scores;
}

std::vector<double> average_activation_strength(const ActivationTrace& trace) {
    if (trace.samples.empty()) {
        throw std::invalid_argument("activation trace has no samples");
    }
    std::vector<double> out;
    out.reserve(trace.clusters.size());
    for (const auto& cluster : trace.clusters) {
        if (cluster.empty()) {
            throw std::invalid_argument("activation cluster is empty");
        }
        double dataset_sum = 0.0;
        for (const auto& sample : trace.samples) {
            double cluster_sum = 0.0;
            for (int idx : cluster) {
                if (idx < 0 || static_cast<std::size_t>(idx) >= sample.size()) {
                    throw std::invalid_argument("cluster index outside recorded neurons");
                }
                cluster_sum += sample[static_cast<std::size_t>(idx)];
            }
            dataset_sum += cluster_sum / static_cast<double>(cluster.size());
        }
        out.push_back(dataset_sum / static_cast<double>(trace.samples.size()));
    }
    return out;
}

ActivationTrace record_activations(const VelocityModel& model, const ModelConfig& cfg,
                                   const std::vector<SceneSpec>& specs, int layer_index,
                                   double t, std::uint64_t seed, std::string dataset_tag) {
    if (layer_index < 1 || layer_index >= model.layer_count()) {
        throw std::invalid_argument("layer index does not address a hidden layer");
    }
    ActivationTrace trace;
    trace.dataset_tag = std::move(dataset_tag);
    const SceneConfig scene_cfg{cfg.raster_height, cfg.raster_width, cfg.grid};
    for (std::size_t i = 0; i < specs.size(); ++i) {
        Rng rng(seed_combine(seed, i));
        const Vec x0 = flatten(render(specs[i], scene_cfg));
        Vec eps(x0.size());
        for (auto& e : eps) e = rng.normal();
        const NoisySample noisy = interpolate(x0, eps, t);
        ForwardTrace ft;
        velocity_traced(model, noisy.x_t, t, encode_condition(specs[i], cfg.grid), ft);
        trace.samples.push_back(ft.activations[static_cast<std::size_t>(layer_index)]);
    }
    return trace;
}

namespace {

const char* kPalette[6] = {"#4269d0", "#efb118", "#ff725c", "#6cc5b0", "#3ca951", "#ff8ab7"};

std::string svg_header(int w, int h) {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) +
           "\" height=\"" + std::to_string(h) + "\" viewBox=\"0 0 " + std::to_string(w) + " " +
           std::to_string(h) + "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

std::string num(double v) { return io::format_double(v, 3); }

struct NamedStat {
    const char* name;
    const CategoryStats* stats;
};

std::vector<NamedStat> named_stats(const BenchmarkReport& r) {
    return {{"color", &r.color},
            {"shape", &r.shape},
            {"spatial", &r.spatial},
            {"counting", &r.counting},
            {"overall", &r.overall}};
}

std::string render_benchmark_bars(const std::vector<BenchmarkReport>& reports) {
    const int width = 720;
    const int height = 360;
    const int margin_left = 50;
    const int margin_bottom = 40;
    const int margin_top = 30;
    const double plot_w = width - margin_left - 20;
    const double plot_h = height - margin_top - margin_bottom;
    std::string svg = svg_header(width, height);
    const int categories = 5;
    const double group_w = plot_w / categories;
    const double bar_w = group_w / (reports.size() + 1);
    const char* cat_names[5] = {"color", "shape", "spatial", "counting", "overall"};
    for (int g = 0; g < categories; ++g) {
        const double gx = margin_left + g * group_w;
        svg += "<text x=\"" + num(gx + group_w / 2) + "\" y=\"" +
               std::to_string(height - margin_bottom + 18) +
               "\" font-size=\"12\" text-anchor=\"middle\">" + cat_names[g] + "</text>\n";
        for (std::size_t m = 0; m < reports.size(); ++m) {
            const auto stats = named_stats(reports[m]);
            const CategoryStats& s = *stats[static_cast<std::size_t>(g)].stats;
            if (!s.present) continue;
            const double bh = plot_h * s.mean / 100.0;
            const double x = gx + bar_w * (static_cast<double>(m) + 0.5);
            const double y = margin_top + plot_h - bh;
            svg += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(bar_w * 0.9) +
                   "\" height=\"" + num(bh) + "\" fill=\"" + kPalette[m % 6] + "\"/>\n";
        }
    }
    // y axis with 0/50/100 ticks
    for (int tick = 0; tick <= 100; tick += 50) {
        const double y = margin_top + plot_h * (1.0 - tick / 100.0);
        svg += "<line x1=\"" + std::to_string(margin_left) + "\" y1=\"" + num(y) + "\" x2=\"" +
               std::to_string(width - 20) + "\" y2=\"" + num(y) +
               "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
        svg += "<text x=\"" + std::to_string(margin_left - 8) + "\" y=\"" + num(y + 4) +
               "\" font-size=\"11\" text-anchor=\"end\">" + std::to_string(tick) + "</text>\n";
    }
    for (std::size_t m = 0; m < reports.size(); ++m) {
        svg += "<text x=\"" + std::to_string(margin_left + 4) + "\" y=\"" +
               std::to_string(margin_top - 12 + static_cast<int>(m) * 14) +
               "\" font-size=\"11\" fill=\"" + kPalette[m % 6] + "\">" + reports[m].model_id +
               "</text>\n";
    }
    svg += "</svg>\n";
    return svg;
}

std::string render_curves(const std::vector<Curve>& curves) {
    const int width = 720;
    const int height = 360;
    const int margin_left = 60;
    const int margin_bottom = 40;
    const int margin_top = 20;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& c : curves) {
        for (const auto& [x, y] : c.points) {
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    }
    if (xmax <= xmin) xmax = xmin + 1.0;
    if (ymax <= ymin) ymax = ymin + 1.0;
    const double plot_w = width - margin_left - 20;
    const double plot_h = height - margin_top - margin_bottom;
    std::string svg = svg_header(width, height);
    svg += "<line x1=\"" + std::to_string(margin_left) + "\" y1=\"" +
           num(margin_top + plot_h) + "\" x2=\"" + std::to_string(width - 20) + "\" y2=\"" +
           num(margin_top + plot_h) + "\" stroke=\"black\"/>\n";
    svg += "<line x1=\"" + std::to_string(margin_left) + "\" y1=\"" + std::to_string(margin_top) +
           "\" x2=\"" + std::to_string(margin_left) + "\" y2=\"" + num(margin_top + plot_h) +
           "\" stroke=\"black\"/>\n";
    for (std::size_t i = 0; i < curves.size(); ++i) {
        const auto& c = curves[i];
        if (c.points.empty()) continue;
        std::string pts;
        for (const auto& [x, y] : c.points) {
            const double px = margin_left + plot_w * (x - xmin) / (xmax - xmin);
            const double py = margin_top + plot_h * (1.0 - (y - ymin) / (ymax - ymin));
            pts += num(px) + "," + num(py) + " ";
        }
        svg += "<polyline fill=\"none\" stroke=\"" + std::string(kPalette[i % 6]) +
               "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
        svg += "<text x=\"" + std::to_string(margin_left + 6) + "\" y=\"" +
               std::to_string(margin_top + 14 + static_cast<int>(i) * 14) +
               "\" font-size=\"11\" fill=\"" + kPalette[i % 6] + "\">" + c.metric + " (seed " +
               std::to_string(c.seed) + ")</text>\n";
    }
    svg += "<text x=\"" + std::to_string(margin_left) + "\" y=\"" + num(margin_top + plot_h + 16) +
           "\" font-size=\"11\">" + num(xmin) + "</text>\n";
    svg += "<text x=\"" + std::to_string(width - 40) + "\" y=\"" + num(margin_top + plot_h + 16) +
           "\" font-size=\"11\" text-anchor=\"end\">" + num(xmax) + "</text>\n";
    svg += "</svg>\n";
    return svg;
}

} // namespace

void emit_plots(const std::vector<BenchmarkReport>& reports, const std::vector<Curve>& curves,
                const std::filesystem::path& out_dir) {
    if (reports.empty() && curves.empty()) {
        throw std::invalid_argument("emit_plots: nothing to plot");
    }
    std::filesystem::create_directories(out_dir);

    if (!reports.empty()) {
        std::string csv = "model_id,category,mean,stddev\n";
        for (const auto& r : reports) {
            for (const auto& [name, stats] : named_stats(r)) {
                if (!stats->present) continue;
                csv += r.model_id + "," + name + "," + io::format_double_exact(stats->mean) +
                       "," + io::format_double_exact(stats->stddev) + "\n";
            }
        }
        io::write_file(out_dir / "benchmark.csv", csv);
        io::write_file(out_dir / "benchmark_bars.svg", render_benchmark_bars(reports));
    }
    if (!curves.empty()) {
        std::string csv = "step,metric,value,seed\n";
        for (const auto& c : curves) {
            for (const auto& [x, y] : c.points) {
                csv += io::format_double_exact(x) + "," + c.metric + "," +
                       io::format_double_exact(y) + "," + std::to_string(c.seed) + "\n";
            }
        }
        io::write_file(out_dir / "curves.csv", csv);
        io::write_file(out_dir / "curves.svg", render_curves(curves));
    }
}

} // namespace srum
