#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "dropkit/model.hpp"

namespace dropkit {

enum class IhvpMethod {
    cg,
    lissa,
    /// Run both solvers and keep the solution with the lower residual.
    both,
};

struct IhvpConfig {
    IhvpMethod method = IhvpMethod::cg;
    double damping = 0.01;
    double cg_tol = 1e-10;
    std::size_t cg_max_iter = 1000;
    std::size_t lissa_depth = 1000;
    double lissa_scale = 10.0;
    std::size_t lissa_repeats = 4;
    std::size_t lissa_batch = 8;
    std::uint64_t seed = 0;
};

void validate(const IhvpConfig& config);
std::string to_string(IhvpMethod m);
IhvpMethod parse_ihvp_method(const std::string& s);

struct IhvpResult {
    ParamVector solution;
    /// |(H + damping I) solution - v| / |v|, measured with one exact product.
    double residual = 0.0;
    std::size_t iterations = 0;
    IhvpMethod method_used = IhvpMethod::cg;
    bool diverged = false;
};

/// v -> (H + damping I) v. The damping is part of the operator.
using HvpOracle = std::function<ParamVector(const ParamVector&)>;

/// (rows, v) -> H_rows v, the undamped Hessian of the mean objective over the
/// given rows.
using BatchHvpOracle =
    std::function<ParamVector(std::span<const std::size_t>, const ParamVector&)>;

/// Matrix-free conjugate gradient for (H + damping I) s = v.
///
/// Stops when the relative residual falls to cg_tol or after cg_max_iter
/// iterations; in the latter case the iterate with the smallest recursive
/// residual is returned. NaN from the oracle raises NumericError.
IhvpResult solve_cg(const HvpOracle& damped_hvp, const ParamVector& v, const IhvpConfig& config);

/// Stochastic Neumann-series estimate of (H + damping I)^{-1} v over a
/// dataset of `n_samples` rows.
///
/// Each repeat runs s_0 = v, s_t = v + s_{t-1} - (H_t + damping I) s_{t-1} / scale
/// with H_t the Hessian of a seeded random minibatch, and contributes s_T / scale.
/// A repeat whose iterate norm exceeds 1e6 |v| stops and flags divergence.
IhvpResult solve_lissa(const BatchHvpOracle& batch_hvp, std::size_t n_samples,
                       const ParamVector& v, const IhvpConfig& config);

/// Dispatches on config.method using the model's exact products.
IhvpResult solve_ihvp(const ModelSpec& spec, const ParamVector& params, const Dataset& train,
                      const ParamVector& v, const IhvpConfig& config);

}  // namespace dropkit
