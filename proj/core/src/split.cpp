#include <algorithm>
#include <cmath>
#include <map>

#include "dropkit/error.hpp"
#include "dropkit/io.hpp"
#include "dropkit/rng.hpp"

namespace dropkit {

Split split(const Dataset& data, double val_fraction, std::uint64_t seed, bool stratified) {
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
        throw ConfigError("validation fraction must lie strictly between 0 and 1");
    }
    const std::size_t n = data.size();
    std::vector<char> to_val(n, 0);
    Rng rng(seed);

    if (stratified) {
        std::map<double, std::vector<std::size_t>> by_class;
        for (std::size_t i = 0; i < n; ++i) by_class[data.labels()[static_cast<Eigen::Index>(i)]].push_back(i);
        for (auto& [label, members] : by_class) {
            const auto take = static_cast<std::size_t>(
                std::llround(val_fraction * static_cast<double>(members.size())));
            const auto perm = rng.permutation(members.size());
            for (std::size_t t = 0; t < take; ++t) to_val[members[perm[t]]] = 1;
        }
    } else {
        const auto take = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n)));
        const auto perm = rng.permutation(n);
        for (std::size_t t = 0; t < take; ++t) to_val[perm[t]] = 1;
    }

    std::vector<std::size_t> train_pos, val_pos;
    for (std::size_t i = 0; i < n; ++i) (to_val[i] ? val_pos : train_pos).push_back(i);
    if (train_pos.empty() || val_pos.empty()) {
        throw ConfigError("validation fraction " + std::to_string(val_fraction) + " on " +
                          std::to_string(n) + " samples leaves one side of the split empty");
    }
    return Split{data.subset(train_pos), data.subset(val_pos)};
}

}  // namespace dropkit
