#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dropkit/dataset.hpp"
#include "dropkit/model.hpp"

namespace dropkit {

enum class InitScheme {
    /// N(0, 2 / fan_in) weights.
    scaled_normal_fan_in,
    /// U(-a, a) weights with a = sqrt(6 / (fan_in + fan_out)).
    scaled_uniform_fan_avg,
};

std::string to_string(InitScheme s);
InitScheme parse_init_scheme(const std::string& s);

struct LrStep {
    std::size_t epoch_start = 0;
    double learning_rate = 0.1;
    bool operator==(const LrStep&) const = default;
};

struct TrainConfig {
    std::size_t epochs = 20;
    std::size_t batch_size = 32;
    std::vector<LrStep> lr_schedule{{0, 0.1}};
    double momentum = 0.0;
    /// Added to the model's l2_reg, so it is part of the differentiated objective.
    double weight_decay = 0.0;
    std::uint64_t seed = 0;
    InitScheme init = InitScheme::scaled_normal_fan_in;
    bool shuffle = true;
};

void validate(const TrainConfig& config);

/// Learning rate in effect during `epoch`.
double learning_rate_at(const TrainConfig& config, std::size_t epoch);

/// The objective actually minimized by train(): spec with weight decay folded
/// into l2_reg. Influence scores must be computed against this spec.
ModelSpec objective_spec(const ModelSpec& spec, const TrainConfig& config);

struct Metrics {
    /// Mean per-sample loss without the regularization term.
    double mean_loss = 0.0;
    /// Argmax accuracy; present iff the model is a classifier.
    std::optional<double> accuracy;
    std::size_t n_evaluated = 0;
};

/// Deterministic given (spec, config.seed, config.init). Biases are zero.
ParamVector init_params(const ModelSpec& spec, const TrainConfig& config);

/// Minibatch SGD with momentum from init_params(). Runs
/// epochs * ceil(n / batch_size) steps; the last batch of an epoch may be
/// short. Throws NumericError naming the step on a non-finite loss.
ParamVector train(const ModelSpec& spec, const Dataset& data, const TrainConfig& config);

Metrics evaluate(const ModelSpec& spec, const ParamVector& params, const Dataset& data);

struct FullBatchConfig {
    std::size_t max_iter = 200000;
    /// Stop once |grad of the mean objective| falls below this.
    double grad_tol = 1e-8;
};

struct FullBatchResult {
    ParamVector params;
    std::size_t iterations = 0;
    double grad_norm = 0.0;
    bool converged = false;
};

/// Deterministic full-batch gradient descent on the mean objective, starting
/// from `start`. The step is 1 / (largest Hessian eigenvalue at `start`),
/// halved whenever the objective increases.
FullBatchResult train_full_batch(const ModelSpec& spec, const Dataset& data,
                                 const ParamVector& start, const FullBatchConfig& config = {});

}  // namespace dropkit
