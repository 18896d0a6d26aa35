#include "dropkit/selfcheck.hpp"

#include <algorithm>
#include <cmath>

#include "dropkit/ihvp.hpp"
#include "dropkit/model.hpp"
#include "dropkit/rng.hpp"

namespace dropkit {

namespace {

struct Problem {
    ModelSpec spec;
    ParamVector params;
    Dataset data;
};

Problem random_problem(ModelKind kind, Rng& rng) {
    ModelSpec spec;
    const std::size_t dim = 3;
    switch (kind) {
        case ModelKind::linear_mse: spec = ModelSpec::linear_mse(dim, 0.1); break;
        case ModelKind::logistic: spec = ModelSpec::logistic(dim, 0.1); break;
        case ModelKind::softmax: spec = ModelSpec::softmax(dim, 3, 0.1); break;
        case ModelKind::mlp: spec = ModelSpec::mlp(dim, 4, 3, Activation::tanh, 0.1); break;
    }
    ParamVector params(static_cast<Eigen::Index>(param_count(spec)));
    for (auto& p : params) p = 0.5 * rng.normal();
    const Eigen::Index n = 6;
    FeatureMatrix x(n, static_cast<Eigen::Index>(dim));
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = rng.normal();
        y[i] = is_classifier(kind) ? static_cast<double>(rng.index(spec.output_dim)) : rng.normal();
    }
    return Problem{spec, params, Dataset(std::move(x), std::move(y), "selfcheck")};
}

double rel(const ParamVector& a, const ParamVector& b) { return (a - b).norm() / (b.norm() + 1e-12); }

}  // namespace

std::vector<CheckResult> run_self_checks(const SelfCheckOptions& options) {
    const ModelKind kinds[] = {ModelKind::linear_mse, ModelKind::logistic, ModelKind::softmax,
                               ModelKind::mlp};
    std::vector<CheckResult> results;
    for (ModelKind kind : kinds) {
        Rng rng(mix_seed(options.seed, static_cast<std::uint64_t>(kind)));
        CheckResult g{"gradient/" + to_string(kind), true, 0.0, 1e-5};
        CheckResult h{"hvp/" + to_string(kind), true, 0.0, 1e-4};
        CheckResult sym{"hvp-symmetry/" + to_string(kind), true, 0.0, 1e-10};
        for (std::size_t d = 0; d < options.draws; ++d) {
            const Problem p = random_problem(kind, rng);
            const Sample s = p.data[0];
            ParamVector analytic = grad(p.spec, p.params, s);
            if (options.inject_fault) analytic[0] += 1e-3 * (1.0 + std::abs(analytic[0]));
            ParamVector fd(analytic.size());
            const double eps = 1e-5;
            for (Eigen::Index i = 0; i < fd.size(); ++i) {
                ParamVector up = p.params, down = p.params;
                up[i] += eps;
                down[i] -= eps;
                fd[i] = (loss(p.spec, up, s) - loss(p.spec, down, s)) / (2 * eps);
            }
            g.worst = std::max(g.worst, (analytic - fd).norm() / (analytic.norm() + 1e-12));

            ParamVector u(analytic.size()), v(analytic.size());
            for (auto& e : u) e = rng.normal();
            for (auto& e : v) e = rng.normal();
            const ParamVector hv = hvp(p.spec, p.params, p.data, v, 0.01);
            const double step = 1e-4;
            std::vector<std::size_t> all(p.data.size());
            for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
            const ParamVector fdh =
                (batch_grad(p.spec, p.params + step * v, p.data, all) -
                 batch_grad(p.spec, p.params - step * v, p.data, all)) / (2 * step) + 0.01 * v;
            h.worst = std::max(h.worst, rel(hv, fdh));

            const ParamVector hu = hvp(p.spec, p.params, p.data, u, 0.01);
            const double a = u.dot(hv), b = v.dot(hu);
            sym.worst = std::max(sym.worst, std::abs(a - b) / (std::abs(a) + std::abs(b) + 1e-300));
        }
        g.passed = g.worst < g.tolerance;
        h.passed = h.worst < h.tolerance;
        sym.passed = sym.worst < sym.tolerance;
        results.push_back(g);
        results.push_back(h);
        results.push_back(sym);
    }

    // CG against a dense solve on a regularized logistic problem.
    Rng rng(mix_seed(options.seed, 99));
    const Problem p = random_problem(ModelKind::logistic, rng);
    const auto pc = static_cast<Eigen::Index>(param_count(p.spec));
    Eigen::MatrixXd dense(pc, pc);
    for (Eigen::Index c = 0; c < pc; ++c) {
        dense.col(c) = hvp(p.spec, p.params, p.data, ParamVector::Unit(pc, c), 0.01);
    }
    ParamVector rhs(pc);
    for (auto& e : rhs) e = rng.normal();
    IhvpConfig cfg;
    const IhvpResult cg = solve_cg(
        [&](const ParamVector& x) { return hvp(p.spec, p.params, p.data, x, 0.01); }, rhs, cfg);
    const ParamVector direct = dense.ldlt().solve(rhs);
    CheckResult c{"cg-vs-dense/logistic", true, rel(cg.solution, direct), 1e-6};
    c.passed = c.worst < c.tolerance;
    results.push_back(c);
    return results;
}

}  // namespace dropkit
