#include "dropkit/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "dropkit/error.hpp"

namespace dropkit {

namespace {

std::vector<std::int64_t> iota_ids(Eigen::Index n) {
    std::vector<std::int64_t> ids(static_cast<std::size_t>(n));
    std::iota(ids.begin(), ids.end(), std::int64_t{0});
    return ids;
}

}  // namespace

Dataset::Dataset(FeatureMatrix features, Eigen::VectorXd labels, std::vector<std::int64_t> ids,
                 std::string name, Provenance provenance)
    : features_(std::move(features)),
      labels_(std::move(labels)),
      ids_(std::move(ids)),
      name_(std::move(name)),
      provenance_(provenance) {
    const auto n = static_cast<Eigen::Index>(ids_.size());
    if (n == 0) throw ConfigError("dataset must contain at least one sample");
    if (features_.rows() != n || labels_.size() != n) {
        throw ShapeError("dataset shape mismatch: " + std::to_string(features_.rows()) +
                         " feature rows, " + std::to_string(labels_.size()) + " labels, " +
                         std::to_string(n) + " ids");
    }
    if (features_.cols() == 0) throw ShapeError("dataset has zero feature columns");
    for (std::size_t i = 1; i < ids_.size(); ++i) {
        if (ids_[i] <= ids_[i - 1]) throw ConfigError("dataset ids must be strictly increasing");
    }
    if (!features_.allFinite()) throw ConfigError("dataset features contain non-finite values");
    if (!labels_.allFinite()) throw ConfigError("dataset labels contain non-finite values");
}

Dataset::Dataset(FeatureMatrix features, Eigen::VectorXd labels, std::string name,
                 Provenance provenance)
    : Dataset(features, labels, iota_ids(features.rows()), std::move(name), provenance) {}

Sample Dataset::sample(std::size_t i) const {
    const auto row = static_cast<Eigen::Index>(i);
    return Sample{std::span<const double>(features_.data() + row * features_.cols(),
                                          static_cast<std::size_t>(features_.cols())),
                  labels_[row], ids_[i]};
}

Dataset Dataset::subset(std::span<const std::size_t> positions) const {
    FeatureMatrix f(static_cast<Eigen::Index>(positions.size()), features_.cols());
    Eigen::VectorXd l(static_cast<Eigen::Index>(positions.size()));
    std::vector<std::int64_t> ids;
    ids.reserve(positions.size());
    for (std::size_t k = 0; k < positions.size(); ++k) {
        const auto src = static_cast<Eigen::Index>(positions[k]);
        if (positions[k] >= size()) throw ConfigError("subset position out of range");
        f.row(static_cast<Eigen::Index>(k)) = features_.row(src);
        l[static_cast<Eigen::Index>(k)] = labels_[src];
        ids.push_back(ids_[positions[k]]);
    }
    return Dataset(std::move(f), std::move(l), std::move(ids), name_, Provenance::derived);
}

Dataset Dataset::without(std::span<const std::int64_t> drop_ids) const {
    const std::unordered_set<std::int64_t> drop(drop_ids.begin(), drop_ids.end());
    std::vector<std::size_t> keep;
    keep.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) {
        if (!drop.contains(ids_[i])) keep.push_back(i);
    }
    if (keep.empty()) throw ConfigError("removing the requested ids leaves an empty dataset");
    return subset(keep);
}

std::size_t Dataset::class_count() const {
    return static_cast<std::size_t>(std::max(0.0, labels_.maxCoeff())) + 1;
}

std::uint64_t fnv1a(std::span<const std::byte> bytes, std::uint64_t basis) {
    std::uint64_t h = basis;
    for (std::byte b : bytes) {
        h ^= static_cast<std::uint64_t>(b);
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t fnv1a(const Eigen::VectorXd& values, std::uint64_t basis) {
    return fnv1a(std::as_bytes(std::span<const double>(values.data(),
                                                       static_cast<std::size_t>(values.size()))),
                 basis);
}

std::uint64_t Dataset::checksum() const {
    std::uint64_t h = fnv1a(std::as_bytes(std::span<const double>(
        features_.data(), static_cast<std::size_t>(features_.size()))));
    h = fnv1a(labels_, h);
    return fnv1a(std::as_bytes(std::span<const std::int64_t>(ids_)), h);
}

Standardizer Standardizer::fit(const Dataset& train) {
    Standardizer s;
    const auto& x = train.features();
    s.mean_ = x.colwise().mean().transpose();
    s.stddev_.resize(x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        const double var = (x.col(c).array() - s.mean_[c]).square().mean();
        const double sd = std::sqrt(var);
        s.stddev_[c] = sd > 0.0 ? sd : 1.0;
    }
    return s;
}

Dataset Standardizer::apply(const Dataset& data) const {
    if (static_cast<Eigen::Index>(data.input_dim()) != mean_.size()) {
        throw ShapeError("standardizer fitted on " + std::to_string(mean_.size()) +
                         " features, dataset has " + std::to_string(data.input_dim()));
    }
    FeatureMatrix f = data.features();
    for (Eigen::Index r = 0; r < f.rows(); ++r) {
        f.row(r) = (f.row(r).transpose() - mean_).cwiseQuotient(stddev_).transpose();
    }
    return Dataset(std::move(f), data.labels(), data.ids(), data.name(), data.provenance());
}

std::string to_string(Provenance p) {
    switch (p) {
        case Provenance::csv: return "csv";
        case Provenance::idx: return "idx";
        case Provenance::synthetic: return "synthetic";
        case Provenance::derived: return "derived";
    }
    return "unknown";
}

}  // namespace dropkit
