#include "dropkit/trainer.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "dropkit/error.hpp"
#include "dropkit/rng.hpp"

namespace dropkit {

namespace {

constexpr std::uint64_t kInitStream = 0x1a17;
constexpr std::uint64_t kShuffleStream = 0x5f1e;

void fill_weights(ParamVector& params, Eigen::Index offset, std::size_t fan_in,
                  std::size_t fan_out, InitScheme scheme, Rng& rng) {
    const auto count = static_cast<Eigen::Index>(fan_in * fan_out);
    if (scheme == InitScheme::scaled_normal_fan_in) {
        const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
        for (Eigen::Index i = 0; i < count; ++i) params[offset + i] = sd * rng.normal();
    } else {
        const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (Eigen::Index i = 0; i < count; ++i) params[offset + i] = rng.uniform(-a, a);
    }
}

}  // namespace

std::string to_string(InitScheme s) {
    return s == InitScheme::scaled_normal_fan_in ? "scaled-normal-fan-in"
                                                 : "scaled-uniform-fan-avg";
}

InitScheme parse_init_scheme(const std::string& s) {
    if (s == "scaled-normal-fan-in") return InitScheme::scaled_normal_fan_in;
    if (s == "scaled-uniform-fan-avg") return InitScheme::scaled_uniform_fan_avg;
    throw ConfigError("unknown init scheme '" + s + "'");
}

void validate(const TrainConfig& c) {
    if (c.batch_size == 0) throw ConfigError("batch_size must be positive");
    if (c.lr_schedule.empty() || c.lr_schedule.front().epoch_start != 0) {
        throw ConfigError("lr_schedule must start at epoch 0");
    }
    for (std::size_t i = 0; i < c.lr_schedule.size(); ++i) {
        if (!(c.lr_schedule[i].learning_rate > 0.0) ||
            !std::isfinite(c.lr_schedule[i].learning_rate)) {
            throw ConfigError("learning rates must be finite and positive");
        }
        if (i > 0 && c.lr_schedule[i].epoch_start <= c.lr_schedule[i - 1].epoch_start) {
            throw ConfigError("lr_schedule must be sorted by strictly increasing epoch_start");
        }
    }
    if (!(c.momentum >= 0.0 && c.momentum < 1.0)) throw ConfigError("momentum must be in [0, 1)");
    if (!(c.weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
}

double learning_rate_at(const TrainConfig& config, std::size_t epoch) {
    double lr = config.lr_schedule.front().learning_rate;
    for (const auto& step : config.lr_schedule) {
        if (step.epoch_start <= epoch) lr = step.learning_rate;
    }
    return lr;
}

ModelSpec objective_spec(const ModelSpec& spec, const TrainConfig& config) {
    ModelSpec s = spec;
    s.l2_reg += config.weight_decay;
    return s;
}

ParamVector init_params(const ModelSpec& spec, const TrainConfig& config) {
    validate(spec);
    ParamVector params = ParamVector::Zero(static_cast<Eigen::Index>(param_count(spec)));
    Rng rng(mix_seed(config.seed, kInitStream));
    const auto in = spec.input_dim, out = spec.output_dim;
    if (spec.kind == ModelKind::mlp) {
        const auto hid = spec.hidden_dim;
        fill_weights(params, 0, in, hid, config.init, rng);
        const auto w2 = static_cast<Eigen::Index>(hid * in + (spec.bias ? hid : 0));
        fill_weights(params, w2, hid, out, config.init, rng);
    } else {
        fill_weights(params, 0, in, out, config.init, rng);
    }
    return params;
}

ParamVector train(const ModelSpec& spec, const Dataset& data, const TrainConfig& config) {
    validate(config);
    const ModelSpec objective = objective_spec(spec, config);
    validate(objective);
    if (data.input_dim() != spec.input_dim) {
        throw ShapeError("dataset has " + std::to_string(data.input_dim()) +
                         " features, model expects " + std::to_string(spec.input_dim));
    }

    ParamVector params = init_params(objective, config);
    ParamVector velocity = ParamVector::Zero(params.size());
    const std::size_t n = data.size();
    const std::uint64_t shuffle_seed = mix_seed(config.seed, kShuffleStream);

    std::vector<std::size_t> order(n);
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const double lr = learning_rate_at(config, epoch);
        if (config.shuffle) {
            Rng rng(mix_seed(shuffle_seed, epoch));
            order = rng.permutation(n);
        } else {
            std::iota(order.begin(), order.end(), std::size_t{0});
        }
        for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
            const std::size_t end = std::min(n, begin + config.batch_size);
            const std::span<const std::size_t> batch(order.data() + begin, end - begin);

            double batch_loss = 0.0;
            for (std::size_t pos : batch) batch_loss += data_loss(objective, params, data[pos]);
            const ParamVector g = batch_grad(objective, params, data, batch);
            if (!std::isfinite(batch_loss) || !g.allFinite()) {
                throw NumericError("non-finite loss at training step " + std::to_string(step) +
                                   " (epoch " + std::to_string(epoch) + ")");
            }
            velocity = config.momentum * velocity + g;
            params -= lr * velocity;
            ++step;
        }
    }
    if (!params.allFinite()) {
        throw NumericError("non-finite parameters after training step " + std::to_string(step));
    }
    return params;
}

Metrics evaluate(const ModelSpec& spec, const ParamVector& params, const Dataset& data) {
    Metrics m;
    m.n_evaluated = data.size();
    double sum = 0.0;
    std::size_t correct = 0;
    const bool classifier = is_classifier(spec.kind);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Sample s = data[i];
        sum += data_loss(spec, params, s);
        if (classifier) {
            Eigen::Index arg = 0;
            forward(spec, params, s.features).maxCoeff(&arg);
            if (static_cast<double>(arg) == s.label) ++correct;
        }
    }
    m.mean_loss = sum / static_cast<double>(data.size());
    if (classifier) m.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
    return m;
}

FullBatchResult train_full_batch(const ModelSpec& spec, const Dataset& data,
                                 const ParamVector& start, const FullBatchConfig& config) {
    validate(spec);
    std::vector<std::size_t> all(data.size());
    std::iota(all.begin(), all.end(), std::size_t{0});

    // Largest Hessian eigenvalue at the start point by power iteration.
    ParamVector q = ParamVector::Ones(start.size()).normalized();
    double lambda = 0.0;
    for (int it = 0; it < 50; ++it) {
        const ParamVector hq = hvp(spec, start, data, q);
        const double norm = hq.norm();
        if (norm == 0.0) break;
        lambda = q.dot(hq);
        q = hq / norm;
    }
    double step = 1.0 / std::max(lambda, 1e-8);

    FullBatchResult r;
    r.params = start;
    double f = mean_loss(spec, r.params, data);
    for (;;) {
        const ParamVector g = batch_grad(spec, r.params, data, all);
        r.grad_norm = g.norm();
        if (!std::isfinite(r.grad_norm)) throw NumericError("non-finite gradient in full-batch descent");
        if (r.grad_norm < config.grad_tol) {
            r.converged = true;
            break;
        }
        if (r.iterations >= config.max_iter) break;
        ParamVector candidate = r.params - step * g;
        double fc = mean_loss(spec, candidate, data);
        const double slack = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(f));
        while (!(fc <= f + slack) && step > 1e-12) {
            step *= 0.5;
            candidate = r.params - step * g;
            fc = mean_loss(spec, candidate, data);
        }
        r.params = std::move(candidate);
        f = fc;
        ++r.iterations;
    }
    return r;
}

}  // namespace dropkit
