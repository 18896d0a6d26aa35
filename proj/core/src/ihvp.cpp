#include "dropkit/ihvp.hpp"

#include <cassert>
#include <cmath>
#include <vector>

#include "dropkit/error.hpp"
#include "dropkit/rng.hpp"

namespace dropkit {

namespace {

void require_finite(const ParamVector& x, const char* what) {
    if (!x.allFinite()) throw NumericError(std::string("non-finite values in ") + what);
}

double relative_residual(const ParamVector& applied, const ParamVector& v) {
    return (applied - v).norm() / v.norm();
}

}  // namespace

void validate(const IhvpConfig& c) {
    if (!(c.damping >= 0.0)) throw ConfigError("damping must be non-negative");
    if (!(c.cg_tol > 0.0)) throw ConfigError("cg_tol must be positive");
    if (c.cg_max_iter == 0) throw ConfigError("cg_max_iter must be positive");
    if (c.lissa_depth == 0) throw ConfigError("lissa_depth must be positive");
    if (!(c.lissa_scale > 0.0)) throw ConfigError("lissa_scale must be positive");
    if (c.lissa_repeats == 0) throw ConfigError("lissa_repeats must be positive");
    if (c.lissa_batch == 0) throw ConfigError("lissa_batch must be positive");
}

std::string to_string(IhvpMethod m) {
    switch (m) {
        case IhvpMethod::cg: return "cg";
        case IhvpMethod::lissa: return "lissa";
        case IhvpMethod::both: return "both";
    }
    return "unknown";
}

IhvpMethod parse_ihvp_method(const std::string& s) {
    if (s == "cg") return IhvpMethod::cg;
    if (s == "lissa") return IhvpMethod::lissa;
    if (s == "both") return IhvpMethod::both;
    throw ConfigError("unknown inverse-HVP method '" + s + "'");
}

IhvpResult solve_cg(const HvpOracle& damped_hvp, const ParamVector& v, const IhvpConfig& config) {
    IhvpResult result;
    result.method_used = IhvpMethod::cg;
    const double v_norm = v.norm();
    if (v_norm == 0.0) {
        result.solution = ParamVector::Zero(v.size());
        return result;
    }

    ParamVector x = ParamVector::Zero(v.size());
    ParamVector r = v;
    ParamVector p = r;
    double rr = r.squaredNorm();
    ParamVector best = x;
    double best_res = 1.0;
    // Energy 0.5 x'Ax - x'v; CG decreases it monotonically on SPD operators.
    [[maybe_unused]] double energy = 0.0;

    std::size_t iter = 0;
    while (iter < config.cg_max_iter) {
        const ParamVector Ap = damped_hvp(p);
        require_finite(Ap, "Hessian-vector product");
        const double pAp = p.dot(Ap);
        if (!(pAp > 0.0)) {
            throw NumericError("conjugate gradient met a non-positive curvature direction; "
                               "increase the damping");
        }
        const double alpha = rr / pAp;
        x += alpha * p;
        r -= alpha * Ap;
        ++iter;
#ifndef NDEBUG
        const double energy_next = -0.5 * x.dot(r + v);
        assert(energy_next <= energy + 1e-12 * std::abs(energy) + 1e-300);
        energy = energy_next;
#endif
        const double rr_next = r.squaredNorm();
        const double res = std::sqrt(rr_next) / v_norm;
        if (res < best_res) {
            best_res = res;
            best = x;
        }
        if (res <= config.cg_tol) break;
        p = r + (rr_next / rr) * p;
        rr = rr_next;
    }

    result.solution = std::move(best);
    result.iterations = iter;
    result.residual = relative_residual(damped_hvp(result.solution), v);
    return result;
}

IhvpResult solve_lissa(const BatchHvpOracle& batch_hvp, std::size_t n_samples,
                       const ParamVector& v, const IhvpConfig& config) {
    IhvpResult result;
    result.method_used = IhvpMethod::lissa;
    const double v_norm = v.norm();
    if (v_norm == 0.0) {
        result.solution = ParamVector::Zero(v.size());
        return result;
    }
    if (n_samples == 0) throw ConfigError("stochastic inverse-HVP needs a non-empty dataset");

    const std::size_t batch = std::min(config.lissa_batch, n_samples);
    const double blowup = 1e6 * v_norm;
    ParamVector sum = ParamVector::Zero(v.size());
    std::vector<std::size_t> rows(batch);

    for (std::size_t rep = 0; rep < config.lissa_repeats; ++rep) {
        Rng rng(mix_seed(config.seed, rep));
        ParamVector s = v;
        for (std::size_t t = 0; t < config.lissa_depth; ++t) {
            for (auto& row : rows) row = rng.index(n_samples);
            const ParamVector hs = batch_hvp(rows, s);
            require_finite(hs, "Hessian-vector product");
            s = v + s - (hs + config.damping * s) / config.lissa_scale;
            ++result.iterations;
            if (!(s.norm() <= blowup)) {
                result.diverged = true;
                break;
            }
        }
        if (result.diverged) break;
        sum += s / config.lissa_scale;
    }

    result.solution = result.diverged
                          ? ParamVector::Zero(v.size())
                          : ParamVector(sum / static_cast<double>(config.lissa_repeats));
    std::vector<std::size_t> all(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) all[i] = i;
    const ParamVector applied =
        batch_hvp(all, result.solution) + config.damping * result.solution;
    result.residual = relative_residual(applied, v);
    return result;
}

IhvpResult solve_ihvp(const ModelSpec& spec, const ParamVector& params, const Dataset& train,
                      const ParamVector& v, const IhvpConfig& config) {
    const HvpOracle full = [&](const ParamVector& x) {
        return hvp(spec, params, train, x, config.damping);
    };
    const BatchHvpOracle batched = [&](std::span<const std::size_t> rows, const ParamVector& x) {
        return batch_hvp(spec, params, train, rows, x);
    };
    switch (config.method) {
        case IhvpMethod::cg:
            return solve_cg(full, v, config);
        case IhvpMethod::lissa:
            return solve_lissa(batched, train.size(), v, config);
        case IhvpMethod::both: {
            IhvpResult cg = solve_cg(full, v, config);
            IhvpResult ls = solve_lissa(batched, train.size(), v, config);
            if (!ls.diverged && ls.residual < cg.residual) return ls;
            return cg;
        }
    }
    throw ConfigError("unknown inverse-HVP method");
}

}  // namespace dropkit
