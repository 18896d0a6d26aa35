#pragma once

#include <span>
#include <vector>

namespace dropkit {

/// 1-based ranks; tied values share their average rank.
std::vector<double> average_ranks(std::span<const double> values);

double pearson(std::span<const double> x, std::span<const double> y);

/// Pearson correlation of average ranks. NaN when either side is constant.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace dropkit
