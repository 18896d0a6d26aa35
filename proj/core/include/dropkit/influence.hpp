#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "dropkit/dataset.hpp"
#include "dropkit/error.hpp"
#include "dropkit/ihvp.hpp"
#include "dropkit/model.hpp"

namespace dropkit {

struct InfluenceScore {
    std::int64_t sample_id = 0;
    /// Sum over validation samples of I_loss(x, x_j).
    double total = 0.0;
    /// I_loss(x, x_j) for each validation sample j, in validation order.
    /// Empty when the report was produced without per-validation detail.
    std::vector<double> per_validation;
};

struct InfluenceReport {
    std::vector<InfluenceScore> scores;
    std::size_t n_train = 0;
    std::size_t k_validation = 0;
    /// Inverse-HVP solves performed: k, plus one per CG fallback.
    std::size_t ihvp_solve_count = 0;
    std::vector<double> ihvp_residuals;
    std::vector<std::size_t> ihvp_iterations;
    /// Validation indices whose solve fell back to CG after the stochastic
    /// solver diverged.
    std::vector<std::size_t> cg_fallbacks;
    IhvpConfig config_echo;
    std::uint64_t model_hash = 0;
    /// The s_j vectors, kept only on request.
    std::vector<ParamVector> s_vectors;
};

struct ScoreOptions {
    bool keep_per_validation = true;
    bool keep_s_vectors = false;
    /// Cache the n training gradients across the k passes. When unset the cache
    /// is used iff n * param_count <= 1e7.
    std::optional<bool> cache_train_grads;
    /// Threads used for the k validation passes. Results do not depend on it.
    std::size_t workers = 1;
    /// Re-solve with CG when the stochastic solver diverges.
    bool cg_fallback = true;
};

/// Raised when scoring cannot complete; carries whatever was computed.
class InfluenceError : public NumericError {
public:
    InfluenceError(const std::string& what, InfluenceReport partial)
        : NumericError(what), partial_(std::move(partial)) {}
    const InfluenceReport& partial() const { return partial_; }

private:
    InfluenceReport partial_;
};

/// (H + damping I)^{-1} applied to the validation sample's unregularized loss
/// gradient. H is symmetric, so this is the s_j row vector stored as a column.
IhvpResult s_vector(const ModelSpec& spec, const ParamVector& params, const Dataset& train,
                    const Sample& validation_sample, const IhvpConfig& config);

/// -s_j . grad L(x). Throws ShapeError on length mismatch.
double influence_pair(const ParamVector& s_j, const ParamVector& train_grad);

/// Scores every training sample against every validation sample using
/// exactly k inverse-HVP solves: fix s_j, sweep all training gradients,
/// repeat for the next j. Totals are accumulated in validation order.
InfluenceReport score_all(const ModelSpec& spec, const ParamVector& params, const Dataset& train,
                          const Dataset& validation, const IhvpConfig& config,
                          const ScoreOptions& options = {});

/// Ids whose total influence is strictly positive, in report order.
std::vector<std::int64_t> select_unfavorable(const InfluenceReport& report);

}  // namespace dropkit
