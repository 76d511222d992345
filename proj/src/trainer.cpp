// Copyright 2026 The SRUM Authors
// SPDX-License-Identifier: Apache-2.0
#include "srum/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "srum/io.hpp"

namespace srum {

std::string mode_name(AblationMode m) {
    switch (m) {
    case AblationMode::full: return "full";
    case AblationMode::no_global: return "no_global";
    case AblationMode::no_constraint: return "no_constraint";
    case AblationMode::sparse: return "sparse";
    }
    throw std::invalid_argument("bad ablation mode");
}

AblationMode mode_from_name(const std::string& name) {
    if (name == "full") return AblationMode::full;
    if (name == "no_global") return AblationMode::no_global;
    if (name == "no_constraint") return AblationMode::no_constraint;
    if (name == "sparse") return AblationMode::sparse;
    throw std::invalid_argument("unknown ablation mode: " + name);
}

LossBreakdown weighted_flow_loss(const Vec& v, const Vec& u, const RewardMap& reward,
                                 double alpha, double lambda_c) {
    if (v.size() != u.size() ||
        v.size() != static_cast<std::size_t>(reward.height) * reward.width * 3) {
        throw std::invalid_argument("weighted_flow_loss: shape mismatch");
    }
    LossBreakdown out;
    out.weighted_error.assign(static_cast<std::size_t>(reward.height) * reward.width, 0.0);
    const std::size_t n = v.size();
    double acc_r = 0.0;
    double acc_ref = 0.0;
    for (std::size_t p = 0; p < out.weighted_error.size(); ++p) {
        const double w = alpha * static_cast<double>(reward.values[p]);
        double pixel = 0.0;
        for (int c = 0; c < 3; ++c) {
            const double r = v[p * 3 + c] - u[p * 3 + c];
            const double sq = r * r;
            acc_ref += sq;
            acc_r += w * sq;
            pixel += w * sq;
        }
        out.weighted_error[p] = pixel / 3.0;
    }
    out.l_r = acc_r / static_cast<double>(n);
    out.l_ref = acc_ref / static_cast<double>(n);
    out.l_total = out.l_r + lambda_c * out.l_ref;
    return out;
}

namespace {

struct EffectiveSignals {
    RewardMap reward;
    double alpha = 0.0;
    double lambda_c = 0.0;
};

EffectiveSignals apply_mode(const TrainingRecord& record, double lambda_c, AblationMode mode) {
    EffectiveSignals s;
    s.reward = record.reward_map;
    s.alpha = record.alpha;
    s.lambda_c = lambda_c;
    switch (mode) {
    case AblationMode::full:
        break;
    case AblationMode::no_global:
        s.alpha = 1.0;
        break;
    case AblationMode::no_constraint:
        s.lambda_c = 0.0;
        break;
    case AblationMode::sparse: {
        auto [map, weight] = sparsify(record.reward_map, GlobalWeight{record.alpha});
        s.reward = std::move(map);
        s.alpha = weight.alpha;
        break;
    }
    }
    return s;
}

Vec forward_residual(const VelocityModel& model, const ModelConfig& cfg,
                     const TrainingRecord& record, const Vec& epsilon, double t, Vec* u_out,
                     ForwardTrace* trace_out) {
    const Vec x0 = flatten(record.raster);
    const NoisySample noisy = interpolate(x0, epsilon, t);
    Vec u(x0.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        u[i] = epsilon[i] - x0[i];
    }
    const CondVector cond = encode_condition(record.spec, cfg.grid);
    Vec v;
    if (trace_out) {
        v = velocity_traced(model, noisy.x_t, t, cond, *trace_out);
    } else {
        v = velocity(model, noisy.x_t, t, cond);
    }
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] -= u[i];
    }
    if (u_out) *u_out = std::move(u);
    return v; // residual v_theta - u
}

} // namespace

double loss_reward(const VelocityModel& model, const ModelConfig& cfg,
                   const TrainingRecord& record, const Vec& epsilon, double t) {
    const Vec residual = forward_residual(model, cfg, record, epsilon, t, nullptr, nullptr);
    double acc = 0.0;
    for (std::size_t p = 0; p < record.reward_map.values.size(); ++p) {
        const double w = record.alpha * static_cast<double>(record.reward_map.values[p]);
        for (int c = 0; c < 3; ++c) {
            const double r = residual[p * 3 + c];
            acc += w * r * r;
        }
    }
    return acc / static_cast<double>(residual.size());
}

double loss_ref(const VelocityModel& model, const ModelConfig& cfg,
                const TrainingRecord& record, const Vec& epsilon, double t) {
    const Vec residual = forward_residual(model, cfg, record, epsilon, t, nullptr, nullptr);
    double acc = 0.0;
    for (double r : residual) {
        acc += r * r;
    }
    return acc / static_cast<double>(residual.size());
}

LossBreakdown loss_total(const VelocityModel& model, const ModelConfig& cfg,
                         const TrainingRecord& record, const Vec& epsilon, double t,
                         const TrainConfig& config) {
    const EffectiveSignals sig = apply_mode(record, config.lambda_c, config.mode);
    const Vec residual = forward_residual(model, cfg, record, epsilon, t, nullptr, nullptr);
    const Vec zero(residual.size(), 0.0);
    return weighted_flow_loss(residual, zero, sig.reward, sig.alpha, sig.lambda_c);
}

Gradients loss_gradients(const VelocityModel& model, const ModelConfig& cfg,
                         const TrainingRecord& record, const Vec& epsilon, double t,
                         const TrainConfig& config, LossTerm term) {
    ForwardTrace trace;
    Vec u;
    const Vec residual = forward_residual(model, cfg, record, epsilon, t, &u, &trace);
    const EffectiveSignals sig = apply_mode(record, config.lambda_c, config.mode);
    const std::size_t n = residual.size();
    Vec output_grad(n);
    const double scale = 2.0 / static_cast<double>(n);
    for (std::size_t p = 0; p < n / 3; ++p) {
        double w = 0.0;
        switch (term) {
        case LossTerm::reward:
            w = record.alpha * static_cast<double>(record.reward_map.values[p]);
            break;
        case LossTerm::reference:
            w = 1.0;
            break;
        case LossTerm::total:
            w = sig.alpha * static_cast<double>(sig.reward.values[p]) + sig.lambda_c;
            break;
        }
        for (int c = 0; c < 3; ++c) {
            output_grad[p * 3 + c] = scale * w * residual[p * 3 + c];
        }
    }
    Gradients grads = zero_gradients(model);
    backward(model, trace, output_grad, grads);
    return grads;
}

namespace {

// AdamW with bias correction; weight decay is decoupled (0.0 by default).
struct AdamW {
    explicit AdamW(const VelocityModel& model, const TrainConfig& cfg)
        : cfg_(cfg), m_(zero_gradients(model)), v_(zero_gradients(model)) {}

    void step(VelocityModel& model, const Gradients& g, double lr) {
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t k = 0; k < model.weights.size(); ++k) {
            update(model.weights[k].a, g.weights[k].a, m_.weights[k].a, v_.weights[k].a, lr,
                   bc1, bc2);
            update(model.biases[k], g.biases[k], m_.biases[k], v_.biases[k], lr, bc1, bc2);
        }
        update(model.skip_weight.a, g.skip_weight.a, m_.skip_weight.a, v_.skip_weight.a, lr,
               bc1, bc2);
        update(model.skip_bias, g.skip_bias, m_.skip_bias, v_.skip_bias, lr, bc1, bc2);
    }

private:
    void update(std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
                std::vector<double>& v, double lr, double bc1, double bc2) {
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            p[i] -= lr * (m_hat / (std::sqrt(v_hat) + cfg_.adam_epsilon) +
                          cfg_.weight_decay * p[i]);
        }
    }

    TrainConfig cfg_;
    Gradients m_;
    Gradients v_;
    long long t_ = 0;
};

TrainResult run_loop(VelocityModel& model, const ModelConfig& cfg,
                     const std::vector<TrainingRecord>& dataset, const TrainConfig& config,
                     bool sft_objective, const StepCallback& callback) {
    if (dataset.empty()) {
        throw std::invalid_argument("training dataset is empty");
    }
    if (config.learning_rate < 0.0) {
        throw std::invalid_argument("learning rate must be non-negative");
    }
    const int n_records = static_cast<int>(dataset.size());
    const std::size_t data_dim = static_cast<std::size_t>(cfg.data_dim());

    // Per-record tensors are reused across steps.
    std::vector<Vec> x0s;
    std::vector<CondVector> conds;
    std::vector<EffectiveSignals> signals;
    x0s.reserve(dataset.size());
    conds.reserve(dataset.size());
    signals.reserve(dataset.size());
    for (const auto& rec : dataset) {
        if (rec.raster.values.size() != data_dim) {
            throw std::invalid_argument("record raster does not match model config");
        }
        x0s.push_back(flatten(rec.raster));
        conds.push_back(encode_condition(rec.spec, cfg.grid));
        if (sft_objective) {
            EffectiveSignals s;
            s.reward = RewardMap::filled(rec.raster.height, rec.raster.width, 1.0f);
            s.alpha = 1.0;
            s.lambda_c = 0.0;
            signals.push_back(std::move(s));
        } else {
            signals.push_back(apply_mode(rec, config.lambda_c, config.mode));
        }
    }

    AdamW optimizer(model, config);
    TrainResult result;
    result.log.reserve(static_cast<std::size_t>(config.total_steps));
    ForwardTrace trace;
    for (int step = 0; step < config.total_steps; ++step) {
        Rng step_rng(seed_combine(seed_combine(config.seed, 0x5eedu), static_cast<std::uint64_t>(step)));
        std::vector<int> batch(static_cast<std::size_t>(config.batch_size));
        for (auto& idx : batch) {
            idx = step_rng.uniform_int(0, n_records - 1);
        }
        // Fixed accumulation order: ascending record index.
        std::sort(batch.begin(), batch.end());

        Gradients grads = zero_gradients(model);
        double l_r = 0.0;
        double l_ref = 0.0;
        double l_total = 0.0;
        const double inv_batch = 1.0 / static_cast<double>(config.batch_size);
        for (int idx : batch) {
            const auto& sig = signals[static_cast<std::size_t>(idx)];
            Vec eps(data_dim);
            for (auto& e : eps) e = step_rng.normal();
            const double t = sample_timestep(step_rng, config.timestep_shift);

            const Vec& x0 = x0s[static_cast<std::size_t>(idx)];
            Vec x_t(data_dim);
            Vec u(data_dim);
            for (std::size_t i = 0; i < data_dim; ++i) {
                x_t[i] = (1.0 - t) * x0[i] + t * eps[i];
                u[i] = eps[i] - x0[i];
            }
            const Vec v =
                velocity_traced(model, x_t, t, conds[static_cast<std::size_t>(idx)], trace);

            double ex_r = 0.0;
            double ex_ref = 0.0;
            Vec output_grad(data_dim);
            const double grad_scale = 2.0 / static_cast<double>(data_dim) * inv_batch;
            for (std::size_t p = 0; p < data_dim / 3; ++p) {
                const double w = sig.alpha * static_cast<double>(sig.reward.values[p]);
                for (int c = 0; c < 3; ++c) {
                    const std::size_t i = p * 3 + c;
                    const double r = v[i] - u[i];
                    ex_r += w * r * r;
                    ex_ref += r * r;
                    output_grad[i] = grad_scale * (w + sig.lambda_c) * r;
                }
            }
            ex_r /= static_cast<double>(data_dim);
            ex_ref /= static_cast<double>(data_dim);
            const double ex_total = ex_r + sig.lambda_c * ex_ref;
            if (!std::isfinite(ex_total)) {
                throw std::runtime_error("non-finite loss at record index " +
                                         std::to_string(idx));
            }
            l_r += ex_r * inv_batch;
            l_ref += ex_ref * inv_batch;
            l_total += ex_total * inv_batch;
            backward(model, trace, output_grad, grads);
        }

        const double grad_norm = grads.norm();
        if (config.grad_clip > 0.0 && grad_norm > config.grad_clip) {
            grads.scale(config.grad_clip / grad_norm);
        }
        double lr = config.learning_rate;
        if (config.warmup_steps > 0 && step < config.warmup_steps) {
            lr *= static_cast<double>(step + 1) / static_cast<double>(config.warmup_steps);
        }
        optimizer.step(model, grads, lr);
        model.train_steps += 1;

        StepMetrics metrics{step, l_r, l_ref, l_total, grad_norm, lr};
        result.log.push_back(metrics);
        if (callback && !callback(metrics, model)) {
            break;
        }
    }
    return result;
}

} // namespace

TrainResult train(VelocityModel& model, const ModelConfig& cfg,
                  const std::vector<TrainingRecord>& dataset, const TrainConfig& config,
                  const StepCallback& callback) {
    return run_loop(model, cfg, dataset, config, false, callback);
}

TrainResult train_sft(VelocityModel& model, const ModelConfig& cfg,
                      const std::vector<TrainingRecord>& dataset, const TrainConfig& config,
                      const StepCallback& callback) {
    return run_loop(model, cfg, dataset, config, true, callback);
}

void write_metrics_csv(const TrainResult& result, const std::filesystem::path& path) {
    std::string out = "step,l_r,l_ref,l_total,grad_norm,lr\n";
    for (const auto& m : result.log) {
        out += std::to_string(m.step) + "," + io::format_double_exact(m.l_r) + "," +
               io::format_double_exact(m.l_ref) + "," + io::format_double_exact(m.l_total) +
               "," + io::format_double_exact(m.grad_norm) + "," +
               io::format_double_exact(m.lr) + "\n";
    }
    io::write_file(path, out);
}

} // namespace srum
