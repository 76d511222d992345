// Copyright 2026 The SRUM Authors
// SPDX-License-Identifier: Apache-2.0
#include "srum/genmodel.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "srum/io.hpp"

namespace srum {

long long VelocityModel::parameter_count() const {
    long long n = 0;
    for (const auto& w : weights) n += static_cast<long long>(w.rows) * w.cols;
    for (const auto& b : biases) n += static_cast<long long>(b.size());
    n += static_cast<long long>(skip_weight.rows) * skip_weight.cols;
    n += static_cast<long long>(skip_bias.size());
    return n;
}

namespace {

void fill_scaled_normal(std::vector<double>& values, int fan_in, Rng& rng) {
    const double std_dev = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& x : values) {
        x = static_cast<double>(static_cast<float>(rng.normal() * std_dev));
    }
}

} // namespace

VelocityModel init_model(const ModelConfig& cfg, Rng& rng) {
    VelocityModel m;
    m.layer_sizes.push_back(cfg.input_dim());
    for (int h : cfg.hidden) m.layer_sizes.push_back(h);
    m.layer_sizes.push_back(cfg.data_dim());
    for (std::size_t k = 0; k + 1 < m.layer_sizes.size(); ++k) {
        const int in = m.layer_sizes[k];
        const int out = m.layer_sizes[k + 1];
        Matrix w = Matrix::zeros(out, in);
        // The trunk's output layer starts at zero so the field begins as
        // the pure bypass; hidden layers carry the scaled random init.
        if (k + 2 < m.layer_sizes.size()) {
            fill_scaled_normal(w.a, in, rng);
        }
        m.weights.push_back(std::move(w));
        m.biases.emplace_back(out, 0.0);
    }
    // The bypass starts at the analytic prior for an empty canvas:
    // identity on the x_t block and the background level in the bias,
    // so v(x_t, t) = (x_t - 0.5)/max(t, floor) before any training.
    m.skip_weight = Matrix::zeros(cfg.data_dim(), cfg.input_dim());
    for (int i = 0; i < cfg.data_dim(); ++i) {
        m.skip_weight.at(i, i) = 1.0;
    }
    m.skip_bias.assign(static_cast<std::size_t>(cfg.data_dim()), -0.5);
    m.bypass_t_floor = cfg.bypass_t_floor;
    return m;
}

CondVector encode_condition(const SceneSpec& spec, int grid) {
    validate_spec(spec, grid);
    CondVector c;
    c.v.assign(static_cast<std::size_t>(kShapeCount) * kColorCount * grid * grid +
                   kPredicateCount,
               0.0);
    for (const auto& o : spec.objects) {
        const int cell = o.row * grid + o.col;
        const std::size_t idx =
            (static_cast<std::size_t>(o.shape) * kColorCount + static_cast<int>(o.color)) *
                grid * grid +
            cell;
        c.v[idx] = 1.0;
    }
    const std::size_t rel_base = c.v.size() - kPredicateCount;
    for (const auto& r : spec.relations) {
        c.v[rel_base + static_cast<int>(r.predicate)] = 1.0;
    }
    return c;
}

SceneSpec decode_condition(const CondVector& cond, int grid) {
    const std::size_t expected =
        static_cast<std::size_t>(kShapeCount) * kColorCount * grid * grid + kPredicateCount;
    if (cond.v.size() != expected) {
        throw std::invalid_argument("condition vector length mismatch");
    }
    SceneSpec spec;
    for (int s = 0; s < kShapeCount; ++s) {
        for (int c = 0; c < kColorCount; ++c) {
            for (int cell = 0; cell < grid * grid; ++cell) {
                const std::size_t idx =
                    (static_cast<std::size_t>(s) * kColorCount + c) * grid * grid + cell;
                if (cond.v[idx] != 0.0) {
                    spec.objects.push_back({static_cast<Shape>(s), static_cast<Color>(c),
                                            cell / grid, cell % grid});
                }
            }
        }
    }
    const std::size_t rel_base = cond.v.size() - kPredicateCount;
    for (int p = 0; p < kPredicateCount; ++p) {
        if (cond.v[rel_base + p] == 0.0) continue;
        bool placed = false;
        const int n = static_cast<int>(spec.objects.size());
        for (int i = 0; i < n && !placed; ++i) {
            for (int j = 0; j < n && !placed; ++j) {
                if (i == j) continue;
                Relation r{i, static_cast<Predicate>(p), j};
                const auto& subj = spec.objects[i];
                const auto& obj = spec.objects[j];
                const bool ok = (r.predicate == Predicate::left_of && subj.col < obj.col) ||
                                (r.predicate == Predicate::right_of && subj.col > obj.col) ||
                                (r.predicate == Predicate::above && subj.row < obj.row) ||
                                (r.predicate == Predicate::below && subj.row > obj.row);
                if (ok) {
                    spec.relations.push_back(r);
                    placed = true;
                }
            }
        }
        if (!placed) {
            throw std::invalid_argument("relation flag with no consistent object pair");
        }
    }
    spec.has_spatial_directive = !spec.relations.empty();
    if (spec.relations.empty() && spec.objects.size() >= 2) {
        bool uniform = true;
        for (const auto& o : spec.objects) {
            if (o.shape != spec.objects[0].shape || o.color != spec.objects[0].color) {
                uniform = false;
            }
        }
        if (uniform) {
            spec.count_constraints.push_back({spec.objects[0].shape, spec.objects[0].color,
                                              static_cast<int>(spec.objects.size())});
        }
    }
    return spec;
}

NoisySample interpolate(const Vec& x0, const Vec& epsilon, double t) {
    if (x0.size() != epsilon.size()) {
        throw std::invalid_argument("interpolate: shape mismatch");
    }
    if (t < 0.0 || t > 1.0) {
        throw std::invalid_argument("interpolate: t outside [0,1]");
    }
    NoisySample s;
    s.t = t;
    s.epsilon = epsilon;
    s.x_t.resize(x0.size());
    for (std::size_t i = 0; i < x0.size(); ++i) {
        s.x_t[i] = (1.0 - t) * x0[i] + t * epsilon[i];
    }
    return s;
}

Vec assemble_input(const Vec& x_t, double t, const CondVector& cond) {
    Vec in;
    in.reserve(x_t.size() + 3 + cond.v.size());
    in.insert(in.end(), x_t.begin(), x_t.end());
    const double two_pi_t = 2.0 * 3.14159265358979323846 * t;
    in.push_back(t);
    in.push_back(std::sin(two_pi_t));
    in.push_back(std::cos(two_pi_t));
    in.insert(in.end(), cond.v.begin(), cond.v.end());
    return in;
}

namespace {

void affine(const Matrix& w, const Vec& b, const Vec& in, Vec& out) {
    out.assign(static_cast<std::size_t>(w.rows), 0.0);
    for (int r = 0; r < w.rows; ++r) {
        const double* wr = w.a.data() + static_cast<std::size_t>(r) * w.cols;
        double acc = b[r];
        for (int c = 0; c < w.cols; ++c) {
            acc += wr[c] * in[c];
        }
        out[r] = acc;
    }
}

void check_finite(const Vec& v, const char* what) {
    for (double x : v) {
        if (!std::isfinite(x)) {
            throw std::runtime_error(std::string("non-finite value in ") + what);
        }
    }
}

} // namespace

Vec velocity_traced(const VelocityModel& model, const Vec& x_t, double t,
                    const CondVector& cond, ForwardTrace& trace) {
    Vec in = assemble_input(x_t, t, cond);
    if (static_cast<int>(in.size()) != model.input_dim()) {
        throw std::invalid_argument("velocity: input dimension mismatch");
    }
    check_finite(in, "velocity input");
    trace.activations.clear();
    trace.activations.push_back(std::move(in));
    const int layers = model.layer_count();
    for (int k = 0; k < layers; ++k) {
        Vec out;
        affine(model.weights[k], model.biases[k], trace.activations.back(), out);
        if (k + 1 < layers) {
            for (auto& x : out) x = std::tanh(x);
        }
        trace.activations.push_back(std::move(out));
    }

    const Vec& input = trace.activations.front();
    Vec skip_out;
    affine(model.skip_weight, model.skip_bias, input, skip_out);
    trace.gain = 1.0 / std::max(t, model.bypass_t_floor);

    Vec v = trace.activations.back();
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] += trace.gain * skip_out[i];
    }
    return v;
}

Vec velocity(const VelocityModel& model, const Vec& x_t, double t, const CondVector& cond) {
    ForwardTrace trace;
    return velocity_traced(model, x_t, t, cond, trace);
}

void Gradients::scale(double s) {
    for (auto& w : weights) {
        for (auto& x : w.a) x *= s;
    }
    for (auto& b : biases) {
        for (auto& x : b) x *= s;
    }
    for (auto& x : skip_weight.a) x *= s;
    for (auto& x : skip_bias) x *= s;
}

double Gradients::norm() const {
    double acc = 0.0;
    auto add = [&acc](const std::vector<double>& v) {
        for (double x : v) acc += x * x;
    };
    for (const auto& w : weights) add(w.a);
    for (const auto& b : biases) add(b);
    add(skip_weight.a);
    add(skip_bias);
    return std::sqrt(acc);
}

Gradients zero_gradients(const VelocityModel& model) {
    Gradients g;
    for (std::size_t k = 0; k < model.weights.size(); ++k) {
        g.weights.push_back(Matrix::zeros(model.weights[k].rows, model.weights[k].cols));
        g.biases.emplace_back(model.biases[k].size(), 0.0);
    }
    g.skip_weight = Matrix::zeros(model.skip_weight.rows, model.skip_weight.cols);
    g.skip_bias.assign(model.skip_bias.size(), 0.0);
    return g;
}

void backward(const VelocityModel& model, const ForwardTrace& trace, const Vec& output_grad,
              Gradients& grads) {
    const int layers = model.layer_count();
    if (static_cast<int>(trace.activations.size()) != layers + 1) {
        throw std::invalid_argument("backward: trace does not match model");
    }
    check_finite(output_grad, "output gradient");

    // Bypass path: v += gain * (W_skip * in + b_skip).
    const Vec& input = trace.activations.front();
    for (int r = 0; r < model.skip_weight.rows; ++r) {
        const double ds = trace.gain * output_grad[static_cast<std::size_t>(r)];
        grads.skip_bias[static_cast<std::size_t>(r)] += ds;
        double* gw =
            grads.skip_weight.a.data() + static_cast<std::size_t>(r) * model.skip_weight.cols;
        for (int c = 0; c < model.skip_weight.cols; ++c) {
            gw[c] += ds * input[static_cast<std::size_t>(c)];
        }
    }

    // Trunk path.
    Vec delta = output_grad;
    for (int k = layers - 1; k >= 0; --k) {
        const Vec& input_act = trace.activations[k];
        const Matrix& w = model.weights[k];
        Matrix& gw = grads.weights[k];
        Vec& gb = grads.biases[k];
        for (int r = 0; r < w.rows; ++r) {
            const double d = delta[r];
            gb[r] += d;
            double* gwr = gw.a.data() + static_cast<std::size_t>(r) * w.cols;
            for (int c = 0; c < w.cols; ++c) {
                gwr[c] += d * input_act[c];
            }
        }
        if (k == 0) break;
        Vec prev(static_cast<std::size_t>(w.cols), 0.0);
        for (int r = 0; r < w.rows; ++r) {
            const double d = delta[r];
            const double* wr = w.a.data() + static_cast<std::size_t>(r) * w.cols;
            for (int c = 0; c < w.cols; ++c) {
                prev[c] += wr[c] * d;
            }
        }
        // input_act of layer k is the post-tanh output of layer k-1
        for (int c = 0; c < w.cols; ++c) {
            prev[c] *= 1.0 - input_act[c] * input_act[c];
        }
        delta = std::move(prev);
    }
}

Vec predict_x0(const Vec& x_t, double t, const Vec& v) {
    if (x_t.size() != v.size()) {
        throw std::invalid_argument("predict_x0: shape mismatch");
    }
    Vec out(x_t.size());
    for (std::size_t i = 0; i < x_t.size(); ++i) {
        out[i] = x_t[i] - t * v[i];
    }
    return out;
}

double timestep_from_uniform(double u, double shift) {
    if (shift <= 0.0) {
        throw std::invalid_argument("timestep shift must be positive");
    }
    return shift * u / (1.0 + (shift - 1.0) * u);
}

double sample_timestep(Rng& rng, double shift) {
    return timestep_from_uniform(rng.uniform(), shift);
}

Vec euler_integrate(const VelocityFn& field, Vec x_init, int steps) {
    if (steps < 1) {
        throw std::invalid_argument("euler_integrate: steps must be >= 1");
    }
    const double dt = 1.0 / steps;
    Vec x = std::move(x_init);
    for (int i = steps; i >= 1; --i) {
        const double t = static_cast<double>(i) / steps;
        const Vec v = field(x, t);
        for (std::size_t j = 0; j < x.size(); ++j) {
            x[j] -= dt * v[j];
        }
    }
    return x;
}

Vec flatten(const Raster& raster) {
    Vec x(raster.values.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = static_cast<double>(raster.values[i]);
    }
    return x;
}

Raster to_raster(const Vec& x, int height, int width) {
    if (x.size() != static_cast<std::size_t>(height) * width * 3) {
        throw std::invalid_argument("to_raster: size mismatch");
    }
    Raster r;
    r.height = height;
    r.width = width;
    r.values.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        r.values[i] = static_cast<float>(std::clamp(x[i], 0.0, 1.0));
    }
    return r;
}

Raster sample(const VelocityModel& model, const ModelConfig& cfg, const CondVector& cond,
              int steps, Rng& rng) {
    Vec eps(static_cast<std::size_t>(cfg.data_dim()));
    for (auto& e : eps) e = rng.normal();
    Vec x0 = euler_integrate(
        [&](const Vec& x, double t) { return velocity(model, x, t, cond); }, std::move(eps),
        steps);
    return to_raster(x0, cfg.raster_height, cfg.raster_width);
}

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;

void put_u32(std::string& s, std::uint32_t v) {
    s.push_back(static_cast<char>(v & 0xff));
    s.push_back(static_cast<char>((v >> 8) & 0xff));
    s.push_back(static_cast<char>((v >> 16) & 0xff));
    s.push_back(static_cast<char>((v >> 24) & 0xff));
}

std::uint32_t take_u32(const std::string& s, std::size_t& off) {
    if (off + 4 > s.size()) throw std::runtime_error("checkpoint truncated");
    const auto* p = reinterpret_cast<const unsigned char*>(s.data() + off);
    off += 4;
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

} // namespace

void save_checkpoint(const VelocityModel& model, const ModelConfig& cfg,
                     const std::filesystem::path& path, const nlohmann::ordered_json& extra) {
    std::string out = "SRUM";
    put_u32(out, kCheckpointVersion);
    put_u32(out, static_cast<std::uint32_t>(model.layer_sizes.size()));
    for (int s : model.layer_sizes) put_u32(out, static_cast<std::uint32_t>(s));
    auto append_f32 = [&out](const double* data, std::size_t n) {
        const std::size_t base = out.size();
        out.resize(base + n * 4);
        auto* dst = reinterpret_cast<float*>(out.data() + base);
        for (std::size_t i = 0; i < n; ++i) dst[i] = static_cast<float>(data[i]);
    };
    append_f32(&model.bypass_t_floor, 1);
    for (std::size_t k = 0; k < model.weights.size(); ++k) {
        append_f32(model.weights[k].a.data(), model.weights[k].a.size());
        append_f32(model.biases[k].data(), model.biases[k].size());
    }
    append_f32(model.skip_weight.a.data(), model.skip_weight.a.size());
    append_f32(model.skip_bias.data(), model.skip_bias.size());
    io::write_file(path, out);

    nlohmann::ordered_json sidecar;
    sidecar["format_version"] = kCheckpointVersion;
    sidecar["raster_height"] = cfg.raster_height;
    sidecar["raster_width"] = cfg.raster_width;
    sidecar["grid"] = cfg.grid;
    sidecar["hidden"] = cfg.hidden;
    sidecar["bypass_t_floor"] = cfg.bypass_t_floor;
    sidecar["layer_sizes"] = model.layer_sizes;
    sidecar["train_steps"] = model.train_steps;
    sidecar["checkpoint_id"] = io::hex64(io::fnv1a64(out));
    for (const auto& [key, value] : extra.items()) {
        sidecar[key] = value;
    }
    io::write_file(path.string() + ".json", sidecar.dump(2) + "\n");
}

VelocityModel load_checkpoint(const std::filesystem::path& path, ModelConfig* cfg_out) {
    const std::string bytes = io::read_file(path);
    if (bytes.size() < 8 || bytes.compare(0, 4, "SRUM") != 0) {
        throw std::runtime_error("not a SRUM checkpoint: " + path.string());
    }
    std::size_t off = 4;
    const std::uint32_t version = take_u32(bytes, off);
    if (version != kCheckpointVersion) {
        throw std::runtime_error("unsupported checkpoint version");
    }
    const std::uint32_t n_sizes = take_u32(bytes, off);
    VelocityModel m;
    for (std::uint32_t i = 0; i < n_sizes; ++i) {
        m.layer_sizes.push_back(static_cast<int>(take_u32(bytes, off)));
    }
    auto take_f32 = [&bytes, &off](double* dst, std::size_t n) {
        if (off + n * 4 > bytes.size()) throw std::runtime_error("checkpoint truncated");
        const auto* src = reinterpret_cast<const float*>(bytes.data() + off);
        for (std::size_t i = 0; i < n; ++i) dst[i] = static_cast<double>(src[i]);
        off += n * 4;
    };
    take_f32(&m.bypass_t_floor, 1);
    for (std::size_t k = 0; k + 1 < m.layer_sizes.size(); ++k) {
        const int in = m.layer_sizes[k];
        const int out = m.layer_sizes[k + 1];
        Matrix w = Matrix::zeros(out, in);
        take_f32(w.a.data(), w.a.size());
        m.weights.push_back(std::move(w));
        Vec b(static_cast<std::size_t>(out), 0.0);
        take_f32(b.data(), b.size());
        m.biases.push_back(std::move(b));
    }
    m.skip_weight = Matrix::zeros(m.layer_sizes.back(), m.layer_sizes.front());
    take_f32(m.skip_weight.a.data(), m.skip_weight.a.size());
    m.skip_bias.assign(static_cast<std::size_t>(m.layer_sizes.back()), 0.0);
    take_f32(m.skip_bias.data(), m.skip_bias.size());
    if (off != bytes.size()) {
        throw std::runtime_error("checkpoint has trailing bytes");
    }
    const auto sidecar_path = path.string() + ".json";
    if (std::filesystem::exists(sidecar_path)) {
        const auto sidecar = nlohmann::json::parse(io::read_file(sidecar_path));
        m.train_steps = sidecar.value("train_steps", std::uint64_t{0});
        if (cfg_out) {
            cfg_out->raster_height = sidecar.at("raster_height").get<int>();
            cfg_out->raster_width = sidecar.at("raster_width").get<int>();
            cfg_out->grid = sidecar.at("grid").get<int>();
            cfg_out->hidden = sidecar.at("hidden").get<std::vector<int>>();
            cfg_out->bypass_t_floor = sidecar.at("bypass_t_floor").get<double>();
        }
    } else if (cfg_out) {
        throw std::runtime_error("checkpoint sidecar missing: " + sidecar_path);
    }
    return m;
}

} // namespace srum
