#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "dropkit/dataset.hpp"
#include "dropkit/error.hpp"
#include "dropkit/ihvp.hpp"
#include "dropkit/influence.hpp"
#include "dropkit/io.hpp"
#include "dropkit/trainer.hpp"

namespace dropkit {

struct PipelineOptions {
    /// Seed for round-2 training. Unset means "same as round 1", which makes a
    /// round that drops nothing reproduce round 1 bit for bit.
    std::optional<std::uint64_t> round2_seed;
    /// Used only when no validation set is supplied: a seeded split (stratified
    /// for classifiers) is carved from the training set.
    double val_fraction = 0.1;
    ScoreOptions score;
};

struct TwoRoundResult {
    ParamVector params_round1;
    InfluenceReport report;
    std::vector<std::int64_t> dropped_ids;
    ParamVector params_round2;
    /// Validation metrics of each round's model.
    Metrics metrics_round1;
    Metrics metrics_round2;
    std::size_t train_size = 0;
    std::size_t reduced_train_size = 0;
    TrainConfig config_round1;
    TrainConfig config_round2;
    /// Validation ids actually used (differs from the input when carved).
    std::vector<std::int64_t> validation_ids;
};

struct RoundCountSeries {
    /// Unfavorable samples found after each round of training.
    std::vector<std::size_t> counts;
    std::vector<std::size_t> train_sizes;
    std::vector<Metrics> validation_metrics;
    TrainConfig train_config;
    IhvpConfig ihvp_config;
};

/// Pipeline abort. Carries the influence report when scoring had finished.
class PipelineError : public NumericError {
public:
    PipelineError(const std::string& what, std::optional<InfluenceReport> report)
        : NumericError(what), report_(std::move(report)) {}
    const std::optional<InfluenceReport>& report() const { return report_; }

private:
    std::optional<InfluenceReport> report_;
};

/// Train on the full set, score every training sample against the validation
/// set, drop all unfavorable samples at once, then train again from a fresh
/// initialization with the same configuration (batch size included).
TwoRoundResult two_round(const ModelSpec& spec, const Dataset& train,
                         const std::optional<Dataset>& validation, const TrainConfig& train_config,
                         const IhvpConfig& ihvp_config, const PipelineOptions& options = {});

/// Repeats train -> score -> drop for up to `rounds` rounds, recording how
/// many samples each round flags; stops after the first round that flags none.
/// The validation set is held fixed across rounds.
RoundCountSeries multi_round(const ModelSpec& spec, const Dataset& train,
                             const std::optional<Dataset>& validation,
                             const TrainConfig& train_config, const IhvpConfig& ihvp_config,
                             std::size_t rounds, const PipelineOptions& options = {});

/// The train/validation pair a pipeline run uses.
Split resolve_validation(const ModelSpec& spec, const Dataset& train,
                         const std::optional<Dataset>& validation, const TrainConfig& train_config,
                         const PipelineOptions& options);

}  // namespace dropkit
