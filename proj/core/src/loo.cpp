#include "dropkit/loo.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "dropkit/stats.hpp"

namespace dropkit {

double total_loss(const ModelSpec& spec, const ParamVector& params, const Dataset& data) {
    double sum = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) sum += data_loss(spec, params, data[i]);
    return sum;
}

LooSummary loo_oracle(const ModelSpec& spec, const Dataset& train, const Dataset& validation,
                      const IhvpConfig& ihvp_config, const LooOptions& options) {
    validate(spec);
    if (train.size() < 2) throw ConfigError("leave-one-out needs at least two training samples");

    LooSummary out;
    const ParamVector zero = ParamVector::Zero(static_cast<Eigen::Index>(param_count(spec)));
    out.full = train_full_batch(spec, train, zero, options.optimizer);
    if (!out.full.converged) {
        throw NumericError("full-data training did not converge (gradient norm " +
                           std::to_string(out.full.grad_norm) + ")");
    }
    out.report = score_all(spec, out.full.params, train, validation, ihvp_config, options.score);
    const double base = total_loss(spec, out.full.params, validation);

    const std::size_t n = train.size();
    out.entries.resize(n);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                const std::int64_t id = train.ids()[i];
                const Dataset reduced = train.without(std::span(&id, 1));
                const FullBatchResult r = train_full_batch(spec, reduced, out.full.params, options.optimizer);
                auto& e = out.entries[i];
                e.id = id;
                e.influence_total = out.report.scores[i].total;
                e.delta = base - total_loss(spec, r.params, validation);
                e.converged = r.converged;
                e.iterations = r.iterations;
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(n);
                return;
            }
        }
    };
    const std::size_t workers = std::max<std::size_t>(1, std::min(options.workers, n));
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    std::vector<double> totals, deltas;
    out.sign_threshold = 10.0 * options.optimizer.grad_tol;
    std::size_t agree = 0;
    for (const auto& e : out.entries) {
        if (!e.converged) {
            ++out.excluded;
            continue;
        }
        totals.push_back(e.influence_total);
        deltas.push_back(e.delta);
        if (std::abs(e.delta) > out.sign_threshold) {
            ++out.sign_considered;
            if ((e.delta > 0.0) == (e.influence_total > 0.0)) ++agree;
        }
    }
    out.spearman = spearman(totals, deltas);
    out.sign_agreement = out.sign_considered == 0
                             ? 1.0
                             : static_cast<double>(agree) / static_cast<double>(out.sign_considered);
    return out;
}

}  // namespace dropkit
