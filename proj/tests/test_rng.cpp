#include "spinsim/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

using namespace spinsim;

TEST(Rng, StreamsAreDeterministic) {
    Rng a = Rng::stream(42, 7);
    Rng b = Rng::stream(42, 7);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, StreamsDifferByIndexAndSeed) {
    std::set<uint64_t> firsts;
    for (uint64_t idx = 0; idx < 64; ++idx) firsts.insert(Rng::stream(1, idx).next_u64());
    EXPECT_EQ(firsts.size(), 64u);
    EXPECT_NE(Rng::stream(1, 0).next_u64(), Rng::stream(2, 0).next_u64());
}

TEST(Rng, DoublesInUnitInterval) {
    Rng rng(5);
    double mean = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        double u = rng.next_double();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        mean += u;
    }
    mean /= n;
    EXPECT_NEAR(mean, 0.5, 3.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST(Rng, BernoulliPositionsEdgeCases) {
    Rng rng(1);
    std::vector<uint64_t> out;
    bernoulli_positions(100, 0.0, rng, out);
    EXPECT_TRUE(out.empty());
    bernoulli_positions(5, 1.0, rng, out);
    EXPECT_EQ(out, (std::vector<uint64_t>{0, 1, 2, 3, 4}));
}

TEST(Rng, BernoulliPositionsRateWithinBinomialBounds) {
    Rng rng(123);
    const uint64_t trials = 100000;
    const double p = 0.2;
    std::vector<uint64_t> out;
    bernoulli_positions(trials, p, rng, out);
    const double rate = static_cast<double>(out.size()) / trials;
    const double sigma = std::sqrt(p * (1 - p) / trials);
    EXPECT_NEAR(rate, p, 3.0 * sigma);
    for (size_t i = 1; i < out.size(); ++i) ASSERT_LT(out[i - 1], out[i]);
    ASSERT_LT(out.back(), trials);
}

TEST(Rng, BernoulliPositionsUniformOverSlots) {
    // position frequencies should be flat: chi-square-ish 5 sigma guard on
    // each of 8 slots over many repetitions
    Rng rng(77);
    const int reps = 40000;
    const double p = 0.3;
    std::vector<int> hits(8, 0);
    std::vector<uint64_t> out;
    for (int r = 0; r < reps; ++r) {
        out.clear();
        bernoulli_positions(8, p, rng, out);
        for (uint64_t pos : out) ++hits[pos];
    }
    const double sigma = std::sqrt(p * (1 - p) * reps);
    for (int s = 0; s < 8; ++s) EXPECT_NEAR(hits[s], p * reps, 5.0 * sigma);
}

TEST(Rng, DiscreteMatchesWeights) {
    Rng rng(9);
    double w[3] = {0.2, 0.3, 0.5};
    int counts[3] = {0, 0, 0};
    const int n = 200000;
    for (int i = 0; i < n; ++i) ++counts[rng.discrete(w, 3)];
    for (int i = 0; i < 3; ++i)
        EXPECT_NEAR(static_cast<double>(counts[i]) / n, w[i], 3.0 * std::sqrt(w[i] * (1 - w[i]) / n));
}
