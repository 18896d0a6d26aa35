#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "dropkit/dataset.hpp"
#include "dropkit/ihvp.hpp"
#include "dropkit/influence.hpp"
#include "dropkit/trainer.hpp"

namespace dropkit {

struct LooEntry {
    std::int64_t id = 0;
    double influence_total = 0.0;
    /// Sum over validation samples of L(theta) - L(theta without this sample).
    double delta = 0.0;
    bool converged = false;
    std::size_t iterations = 0;
};

struct LooSummary {
    FullBatchResult full;
    InfluenceReport report;
    std::vector<LooEntry> entries;
    /// Over converged entries.
    double spearman = 0.0;
    /// Fraction of converged entries with |delta| > sign_threshold whose
    /// influence total has the same sign as delta.
    double sign_agreement = 0.0;
    std::size_t sign_considered = 0;
    std::size_t excluded = 0;
    double sign_threshold = 0.0;
};

struct LooOptions {
    FullBatchConfig optimizer;
    /// Concurrent retrains; results do not depend on it.
    std::size_t workers = 1;
    ScoreOptions score;
};

/// Ground truth for the influence scores: trains to convergence on the full
/// set, scores it, then retrains once per training sample with that sample
/// removed (warm-started at the full optimum) and measures the actual change
/// in total validation loss. `spec` is the objective being minimized.
LooSummary loo_oracle(const ModelSpec& spec, const Dataset& train, const Dataset& validation,
                      const IhvpConfig& ihvp_config, const LooOptions& options = {});

/// Total unregularized loss over a dataset.
double total_loss(const ModelSpec& spec, const ParamVector& params, const Dataset& data);

}  // namespace dropkit
