#include "dropkit/pipeline.hpp"

#include "dropkit/io.hpp"
#include "dropkit/rng.hpp"

namespace dropkit {

namespace {

constexpr std::uint64_t kSplitStream = 0x5917;

void check_compatible(const Dataset& train, const Dataset& validation) {
    if (train.input_dim() != validation.input_dim()) {
        throw ShapeError("training data has " + std::to_string(train.input_dim()) +
                         " features but validation data has " +
                         std::to_string(validation.input_dim()));
    }
}

Dataset drop_all_at_once(const Dataset& train, const std::vector<std::int64_t>& dropped,
                         const InfluenceReport& report) {
    if (dropped.empty()) return train;
    if (dropped.size() >= train.size()) {
        throw PipelineError("every training sample was flagged unfavorable; the reduced set is empty",
                            report);
    }
    return train.without(dropped);
}

}  // namespace

Split resolve_validation(const ModelSpec& spec, const Dataset& train,
                         const std::optional<Dataset>& validation, const TrainConfig& train_config,
                         const PipelineOptions& options) {
    if (validation) {
        check_compatible(train, *validation);
        return Split{train, *validation};
    }
    return split(train, options.val_fraction, mix_seed(train_config.seed, kSplitStream),
                 is_classifier(spec.kind));
}

TwoRoundResult two_round(const ModelSpec& spec, const Dataset& train_in,
                         const std::optional<Dataset>& validation, const TrainConfig& train_config,
                         const IhvpConfig& ihvp_config, const PipelineOptions& options) {
    validate(spec);
    validate(train_config);
    validate(ihvp_config);
    const auto [train_set, val_set] = resolve_validation(spec, train_in, validation, train_config, options);
    const ModelSpec objective = objective_spec(spec, train_config);

    TwoRoundResult r;
    r.train_size = train_set.size();
    r.validation_ids = val_set.ids();
    r.config_round1 = train_config;

    r.params_round1 = train(spec, train_set, train_config);
    r.metrics_round1 = evaluate(spec, r.params_round1, val_set);
    r.report = score_all(objective, r.params_round1, train_set, val_set, ihvp_config, options.score);
    r.dropped_ids = select_unfavorable(r.report);

    const Dataset reduced = drop_all_at_once(train_set, r.dropped_ids, r.report);
    r.reduced_train_size = reduced.size();

    // Round 2 starts from init_params() inside train(); round-1 weights are
    // only used for scoring.
    r.config_round2 = train_config;
    if (options.round2_seed) r.config_round2.seed = *options.round2_seed;
    r.params_round2 = train(spec, reduced, r.config_round2);
    r.metrics_round2 = evaluate(spec, r.params_round2, val_set);
    return r;
}

RoundCountSeries multi_round(const ModelSpec& spec, const Dataset& train_in,
                             const std::optional<Dataset>& validation,
                             const TrainConfig& train_config, const IhvpConfig& ihvp_config,
                             std::size_t rounds, const PipelineOptions& options) {
    if (rounds == 0) throw ConfigError("rounds must be at least 1");
    validate(spec);
    validate(train_config);
    validate(ihvp_config);
    const auto [train_set, val_set] = resolve_validation(spec, train_in, validation, train_config, options);
    const ModelSpec objective = objective_spec(spec, train_config);

    RoundCountSeries series;
    series.train_config = train_config;
    series.ihvp_config = ihvp_config;

    Dataset current = train_set;
    for (std::size_t round = 0; round < rounds; ++round) {
        TrainConfig cfg = train_config;
        if (round > 0 && options.round2_seed) cfg.seed = *options.round2_seed;
        const ParamVector params = train(spec, current, cfg);
        const InfluenceReport report = score_all(objective, params, current, val_set, ihvp_config,
                                                 options.score);
        const auto dropped = select_unfavorable(report);
        series.counts.push_back(dropped.size());
        series.train_sizes.push_back(current.size());
        series.validation_metrics.push_back(evaluate(spec, params, val_set));
        if (dropped.empty()) break;
        if (round + 1 < rounds) current = drop_all_at_once(current, dropped, report);
    }
    return series;
}

}  // namespace dropkit
