#include "dropkit/influence.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "dropkit/rng.hpp"

namespace dropkit {

IhvpResult s_vector(const ModelSpec& spec, const ParamVector& params, const Dataset& train,
                    const Sample& validation_sample, const IhvpConfig& config) {
    const ParamVector g = data_grad(spec, params, validation_sample);
    return solve_ihvp(spec, params, train, g, config);
}

double influence_pair(const ParamVector& s_j, const ParamVector& train_grad) {
    if (s_j.size() != train_grad.size()) {
        throw ShapeError("influence_pair length mismatch: " + std::to_string(s_j.size()) +
                         " vs " + std::to_string(train_grad.size()));
    }
    return -s_j.dot(train_grad);
}

InfluenceReport score_all(const ModelSpec& spec, const ParamVector& params, const Dataset& train,
                          const Dataset& validation, const IhvpConfig& config,
                          const ScoreOptions& options) {
    validate(spec);
    validate(config);
    const std::size_t n = train.size();
    const std::size_t k = validation.size();
    const std::size_t pc = param_count(spec);

    InfluenceReport report;
    report.n_train = n;
    report.k_validation = k;
    report.config_echo = config;
    report.model_hash = fnv1a(params);
    report.ihvp_residuals.assign(k, 0.0);
    report.ihvp_iterations.assign(k, 0);
    if (options.keep_s_vectors) report.s_vectors.resize(k);

    const bool cache = options.cache_train_grads.value_or(
        static_cast<double>(n) * static_cast<double>(pc) <= 1e7);
    std::vector<ParamVector> train_grads;
    if (cache) {
        train_grads.reserve(n);
        for (std::size_t i = 0; i < n; ++i) train_grads.push_back(grad(spec, params, train[i]));
    }

    // contributions[j][i] = I_loss(x_i, x_j)
    std::vector<std::vector<double>> contributions(k, std::vector<double>(n, 0.0));
    std::vector<char> diverged(k, 0);
    std::vector<char> fell_back(k, 0);
    std::atomic<std::size_t> solves{0};
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto work = [&] {
        for (;;) {
            const std::size_t j = next.fetch_add(1);
            if (j >= k) return;
            try {
                IhvpConfig local = config;
                local.seed = mix_seed(config.seed, j);
                IhvpResult s = s_vector(spec, params, train, validation[j], local);
                solves.fetch_add(1);
                if (s.diverged) {
                    if (!options.cg_fallback) {
                        diverged[j] = 1;
                        report.ihvp_residuals[j] = s.residual;
                        continue;
                    }
                    local.method = IhvpMethod::cg;
                    s = s_vector(spec, params, train, validation[j], local);
                    solves.fetch_add(1);
                    fell_back[j] = 1;
                }
                report.ihvp_residuals[j] = s.residual;
                report.ihvp_iterations[j] = s.iterations;
                auto& row = contributions[j];
                for (std::size_t i = 0; i < n; ++i) {
                    row[i] = cache ? influence_pair(s.solution, train_grads[i])
                                   : influence_pair(s.solution, grad(spec, params, train[i]));
                }
                if (options.keep_s_vectors) report.s_vectors[j] = std::move(s.solution);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(k);
                return;
            }
        }
    };

    const std::size_t workers = std::max<std::size_t>(1, std::min(options.workers, k));
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    for (std::size_t j = 0; j < k; ++j) {
        if (fell_back[j]) report.cg_fallbacks.push_back(j);
    }
    report.ihvp_solve_count = solves.load();

    report.scores.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& score = report.scores[i];
        score.sample_id = train.ids()[i];
        double total = 0.0;
        for (std::size_t j = 0; j < k; ++j) total += contributions[j][i];
        score.total = total;
        if (options.keep_per_validation) {
            score.per_validation.resize(k);
            for (std::size_t j = 0; j < k; ++j) score.per_validation[j] = contributions[j][i];
        }
    }

    for (std::size_t j = 0; j < k; ++j) {
        if (diverged[j]) {
            throw InfluenceError("stochastic inverse-HVP diverged for validation sample " +
                                     std::to_string(validation.ids()[j]) +
                                     " and CG fallback is disabled",
                                 std::move(report));
        }
    }
    return report;
}

std::vector<std::int64_t> select_unfavorable(const InfluenceReport& report) {
    std::vector<std::int64_t> ids;
    for (const auto& s : report.scores) {
        if (s.total > 0.0) ids.push_back(s.sample_id);
    }
    return ids;
}

}  // namespace dropkit
