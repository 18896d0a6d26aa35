#include <algorithm>
#include <cmath>
#include <limits>

#include "dropkit/error.hpp"
#include "dropkit/io.hpp"
#include "dropkit/rng.hpp"

namespace dropkit {

Blobs synth_blobs(const BlobsParams& p) {
    if (p.n == 0 || p.input_dim == 0 || p.classes == 0) {
        throw ConfigError("blobs need positive n, input_dim and classes");
    }
    if (p.classes > p.n) throw ConfigError("more classes than samples");
    if (!(p.flip_fraction >= 0.0 && p.flip_fraction < 0.5)) {
        throw ConfigError("flip_fraction must lie in [0, 0.5)");
    }
    if (p.flip_fraction > 0.0 && p.classes < 2) throw ConfigError("label flips need at least two classes");
    if (!(p.separation >= 0.0)) throw ConfigError("separation must be non-negative");

    const auto k = static_cast<Eigen::Index>(p.classes);
    const auto d = static_cast<Eigen::Index>(p.input_dim);

    // Random centers, rescaled so the closest pair sits exactly `separation` apart.
    Rng center_rng(mix_seed(p.seed, 0xce));
    Eigen::MatrixXd centers(k, d);
    for (Eigen::Index c = 0; c < k; ++c)
        for (Eigen::Index j = 0; j < d; ++j) centers(c, j) = center_rng.normal();
    if (k > 1) {
        double min_dist = std::numeric_limits<double>::infinity();
        for (Eigen::Index a = 0; a < k; ++a)
            for (Eigen::Index b = a + 1; b < k; ++b)
                min_dist = std::min(min_dist, (centers.row(a) - centers.row(b)).norm());
        centers *= p.separation / min_dist;
    } else {
        centers.setZero();
    }

    const std::uint64_t sample_seed = p.sample_seed.value_or(p.seed);
    Rng rng(mix_seed(sample_seed, 0x5a));
    FeatureMatrix f(static_cast<Eigen::Index>(p.n), d);
    Eigen::VectorXd labels(static_cast<Eigen::Index>(p.n));
    for (std::size_t i = 0; i < p.n; ++i) {
        const auto c = static_cast<Eigen::Index>(i % p.classes);
        const auto row = static_cast<Eigen::Index>(i);
        labels[row] = static_cast<double>(c);
        for (Eigen::Index j = 0; j < d; ++j) f(row, j) = centers(c, j) + p.cluster_std * rng.normal();
    }

    PlantedTruth truth;
    const auto flips = static_cast<std::size_t>(std::floor(p.flip_fraction * static_cast<double>(p.n)));
    if (flips > 0) {
        Rng flip_rng(mix_seed(sample_seed, 0xf1));
        const auto perm = flip_rng.permutation(p.n);
        for (std::size_t t = 0; t < flips; ++t) {
            const auto row = static_cast<Eigen::Index>(perm[t]);
            const auto old = static_cast<std::size_t>(labels[row]);
            const std::size_t shift = 1 + flip_rng.index(p.classes - 1);
            labels[row] = static_cast<double>((old + shift) % p.classes);
            truth.flipped_ids.push_back(static_cast<std::int64_t>(perm[t]));
        }
        std::sort(truth.flipped_ids.begin(), truth.flipped_ids.end());
    }

    return Blobs{Dataset(std::move(f), std::move(labels), "blobs", Provenance::synthetic),
                 std::move(truth), std::move(centers)};
}

}  // namespace dropkit
