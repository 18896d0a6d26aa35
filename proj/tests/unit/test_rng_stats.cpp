#include <cmath>
#include <limits>
#include <numeric>

#include <gtest/gtest.h>

#include "dropkit/rng.hpp"
#include "dropkit/stats.hpp"

using namespace dropkit;

TEST(RngTest, MatchesReferenceEngineOutput) {
    // The 10000th output of mt19937_64 with the default seed is fixed by the standard.
    Rng rng(5489u);
    std::uint64_t x = 0;
    for (int i = 0; i < 10000; ++i) x = rng.next_u64();
    EXPECT_EQ(x, 9981545732273789042ULL);
}

TEST(RngTest, UniformAndNormalMoments) {
    Rng rng(1);
    const int n = 200000;
    double su = 0, sn = 0, qn = 0;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        su += u;
        const double z = rng.normal();
        sn += z;
        qn += z * z;
    }
    EXPECT_NEAR(su / n, 0.5, 0.005);
    EXPECT_NEAR(sn / n, 0.0, 0.01);
    EXPECT_NEAR(qn / n, 1.0, 0.02);
}

TEST(RngTest, IndexIsUnbiasedAndPermutationValid) {
    Rng rng(2);
    std::vector<int> counts(3, 0);
    for (int i = 0; i < 30000; ++i) ++counts[rng.index(3)];
    for (int c : counts) EXPECT_NEAR(c, 10000, 400);
    auto p = rng.permutation(50);
    std::sort(p.begin(), p.end());
    std::vector<std::size_t> iota(50);
    std::iota(iota.begin(), iota.end(), 0);
    EXPECT_EQ(p, iota);
}

TEST(RngTest, MixSeedSeparatesStreams) {
    EXPECT_NE(mix_seed(0, 0), mix_seed(0, 1));
    EXPECT_NE(mix_seed(0, 1), mix_seed(1, 0));
    EXPECT_EQ(mix_seed(7, 3), mix_seed(7, 3));
}

TEST(StatsTest, AverageRanksWithTies) {
    const std::vector<double> v{10, 20, 10, 30};
    EXPECT_EQ(average_ranks(v), (std::vector<double>{1.5, 3, 1.5, 4}));
}

TEST(StatsTest, SpearmanIsRankBased) {
    const std::vector<double> x{1, 2, 3, 4, 5}, y{1, 8, 27, 64, 125}, z{5, 4, 3, 2, 1};
    EXPECT_DOUBLE_EQ(spearman(x, y), 1.0);
    EXPECT_DOUBLE_EQ(spearman(x, z), -1.0);
    EXPECT_LT(pearson(x, y), 1.0);
    const std::vector<double> flat{2, 2, 2, 2, 2};
    EXPECT_TRUE(std::isnan(spearman(x, flat)));
}
