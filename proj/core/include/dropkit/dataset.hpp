#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dropkit {

using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Provenance { csv, idx, synthetic, derived };

/// Read-only view of one row of a Dataset.
struct Sample {
    std::span<const double> features;
    /// Class index (stored exactly as a double) or real regression target.
    double label = 0.0;
    std::int64_t id = 0;
};

/// Feature matrix, labels and stable sample identifiers.
///
/// Invariants enforced on construction: at least one row, ids strictly
/// increasing, all features and labels finite.
class Dataset {
public:
    Dataset(FeatureMatrix features, Eigen::VectorXd labels, std::vector<std::int64_t> ids,
            std::string name = {}, Provenance provenance = Provenance::derived);

    /// Convenience constructor assigning ids 0..n-1.
    Dataset(FeatureMatrix features, Eigen::VectorXd labels, std::string name = {},
            Provenance provenance = Provenance::derived);

    std::size_t size() const { return ids_.size(); }
    std::size_t input_dim() const { return static_cast<std::size_t>(features_.cols()); }

    Sample sample(std::size_t i) const;
    Sample operator[](std::size_t i) const { return sample(i); }

    const FeatureMatrix& features() const { return features_; }
    const Eigen::VectorXd& labels() const { return labels_; }
    const std::vector<std::int64_t>& ids() const { return ids_; }
    const std::string& name() const { return name_; }
    Provenance provenance() const { return provenance_; }

    /// Rows at the given positions, in the given order. Positions must be
    /// strictly increasing so the id invariant is preserved.
    Dataset subset(std::span<const std::size_t> positions) const;

    /// Copy without the rows whose id is listed; survivors keep their order.
    /// Throws ConfigError if nothing would remain.
    Dataset without(std::span<const std::int64_t> drop_ids) const;

    /// Number of distinct classes implied by the labels (max label + 1).
    std::size_t class_count() const;

    /// FNV-1a over features, labels and ids.
    std::uint64_t checksum() const;

private:
    FeatureMatrix features_;
    Eigen::VectorXd labels_;
    std::vector<std::int64_t> ids_;
    std::string name_;
    Provenance provenance_;
};

/// Per-feature mean/std computed on one dataset and applied to others.
class Standardizer {
public:
    static Standardizer fit(const Dataset& train);
    Dataset apply(const Dataset& data) const;

    const Eigen::VectorXd& mean() const { return mean_; }
    const Eigen::VectorXd& stddev() const { return stddev_; }

private:
    Eigen::VectorXd mean_;
    Eigen::VectorXd stddev_;
};

/// 64-bit FNV-1a over a byte range, chainable through `basis`.
std::uint64_t fnv1a(std::span<const std::byte> bytes,
                    std::uint64_t basis = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a(const Eigen::VectorXd& values, std::uint64_t basis = 0xcbf29ce484222325ULL);

std::string to_string(Provenance p);

}  // namespace dropkit
