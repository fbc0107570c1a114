#include <gtest/gtest.h>

#include <algorithm>

#include "support.hpp"

using namespace annoconsist;

namespace {

PredictiveState one_hot_state(const InstanceLabeling& y, int C) {
    PredictiveState s(static_cast<int>(y.size()), C + 1);
    for (std::size_t u = 0; u < y.size(); ++u) s(static_cast<int>(u), y.labels[u]) = 1.0;
    return s;
}

}  // namespace

TEST(DivPc, DeterministicStateEqualToSamples) {
    const InstanceLabeling y{{1, 0, 2}};
    const std::vector<InstanceLabeling> samples(4, y);
    EXPECT_EQ(div_pc(one_hot_state(y, 2), samples, LossConfig{}), 0.0);
}

TEST(DivPc, SingleSampleIsExpectedLoss) {
    Rng rng(1);
    const auto s = testkit::random_state(4, 2, rng);
    const auto y = testkit::random_labeling(4, 2, rng);
    const std::vector<InstanceLabeling> one{y};
    EXPECT_DOUBLE_EQ(div_pc(s, one, LossConfig{}), expected_loss_vs_sample(s, y, LossConfig{}));
}

TEST(DivPc, HandAverage) {
    // one proposal, p = (0.4, 0, 0.6), λ = 0.5: expected losses 0.3 and 0.5
    PredictiveState s(1, 3);
    s(0, 0) = 0.4;
    s(0, 2) = 0.6;
    LossConfig c;
    c.mismatch_cost = 0.5;
    const std::vector<InstanceLabeling> samples{InstanceLabeling{{0}}, InstanceLabeling{{1}}};
    EXPECT_DOUBLE_EQ(expected_loss_vs_sample(s, samples[0], c), 0.3);
    EXPECT_DOUBLE_EQ(expected_loss_vs_sample(s, samples[1], c), 0.5);
    EXPECT_DOUBLE_EQ(div_pc(s, samples, c), 0.4);
}

TEST(DivCc, Cases) {
    const InstanceLabeling a{{1, 0, 0}};
    const std::vector<InstanceLabeling> same(3, a);
    EXPECT_EQ(div_cc(same, LossConfig{}), 0.0);

    LossConfig c;
    c.mismatch_cost = 0.4;
    const std::vector<InstanceLabeling> two{a, InstanceLabeling{{0, 0, 0}}};
    EXPECT_DOUBLE_EQ(div_cc(two, c), 0.4);

    // three labelings at pairwise distance 1 each
    const std::vector<InstanceLabeling> three{InstanceLabeling{{0}}, InstanceLabeling{{1}}, InstanceLabeling{{2}}};
    EXPECT_DOUBLE_EQ(div_cc(three, LossConfig{}), 1.0);
    EXPECT_THROW((void)div_cc(std::vector<InstanceLabeling>{a}, LossConfig{}), std::invalid_argument);
}

TEST(DivCc, OrderInvariant) {
    Rng rng(2);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<InstanceLabeling> s;
        const int K = rng.uniform_int(2, 8);
        for (int k = 0; k < K; ++k) s.push_back(testkit::random_labeling(5, 3, rng));
        const double before = div_cc(s, LossConfig{});
        std::reverse(s.begin(), s.end());
        std::rotate(s.begin(), s.begin() + 1, s.end());
        EXPECT_NEAR(div_cc(s, LossConfig{}), before, 1e-12);
    }
}

TEST(DivPp, HandCases) {
    EXPECT_EQ(div_pp(one_hot_state(InstanceLabeling{{2, 1}}, 2), LossConfig{}), 0.0);
    EXPECT_DOUBLE_EQ(div_pp(PredictiveState(1, 2, 0.5), LossConfig{}), 0.5);
}

TEST(DivPp, MatchesMonteCarlo) {
    Rng rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        const auto s = testkit::random_state(3, 2, rng);
        Rng draws(static_cast<std::uint64_t>(trial));
        const auto mc = testkit::monte_carlo(100000, [&] {
            return pool_delta(testkit::draw_from(s, draws), testkit::draw_from(s, draws), LossConfig{});
        });
        EXPECT_TRUE(testkit::within_3_sigma(div_pp(s, LossConfig{}), mc));
    }
}

TEST(Disc, EqualDistributionsGiveZero) {
    const InstanceLabeling y{{0, 1, 2, 0}};
    const std::vector<InstanceLabeling> samples(5, y);
    EXPECT_EQ(disc(one_hot_state(y, 2), samples, LossConfig{}, DiscoConfig{}), 0.0);
}

TEST(Disc, HandArithmeticPointTwo) {
    // deterministic (1, 0) vs samples (0,0) and (2,0), λ = 0.4:
    // div_pc 0.4, div_cc 0.4, div_pp 0 → 0.4 − 0.5·0.4 − 0.5·0
    LossConfig c;
    c.mismatch_cost = 0.4;
    PredictiveState s(2, 3);
    s(0, 1) = 1.0;
    s(1, 0) = 1.0;
    const std::vector<InstanceLabeling> samples{InstanceLabeling{{0, 0}}, InstanceLabeling{{2, 0}}};
    const auto t = disco_terms(s, samples, c, DiscoConfig{});
    EXPECT_DOUBLE_EQ(t.div_pc, 0.4);
    EXPECT_DOUBLE_EQ(t.div_cc, 0.4);
    EXPECT_EQ(t.div_pp, 0.0);
    EXPECT_DOUBLE_EQ(t.disc, 0.2);
}

TEST(Disc, HandArithmetic) {
    // p = (0.5, 0.5), both samples pick class 1:
    // div_pc 0.5, div_cc 0, div_pp 0.5 → 0.5 − 0.5·0 − 0.5·0.5
    PredictiveState s(1, 2, 0.5);
    const std::vector<InstanceLabeling> samples(2, InstanceLabeling{{1}});
    const auto t = disco_terms(s, samples, LossConfig{}, DiscoConfig{});
    EXPECT_DOUBLE_EQ(t.div_pc, 0.5);
    EXPECT_DOUBLE_EQ(t.div_cc, 0.0);
    EXPECT_DOUBLE_EQ(t.div_pp, 0.5);
    EXPECT_DOUBLE_EQ(t.disc, 0.25);

    // deterministic background vs two disagreeing samples, cost 0.4:
    // div_pc 0.4, div_cc 0.8, div_pp 0 → 0.4 − 0.4
    LossConfig c;
    c.mismatch_cost = 0.4;
    PredictiveState bg(2, 2);
    bg(0, 0) = 1.0;
    bg(1, 0) = 1.0;
    const std::vector<InstanceLabeling> split{InstanceLabeling{{1, 0}}, InstanceLabeling{{0, 1}}};
    const auto t2 = disco_terms(bg, split, c, DiscoConfig{});
    EXPECT_DOUBLE_EQ(t2.div_pc, 0.4);
    EXPECT_DOUBLE_EQ(t2.div_cc, 0.8);
    EXPECT_DOUBLE_EQ(t2.disc, 0.0);
    EXPECT_DOUBLE_EQ(disco_terms(bg, split, c, DiscoConfig{0.0}).disc, 0.4);
}

TEST(Disc, SymmetricBetweenEmpiricalDistributions) {
    // One proposal, C=2. Pr_p is the empirical distribution of sample set A
    // (enumerated exactly); Pr_c is the sample set B. Swapping the roles
    // leaves disc unchanged when γ = 0.5.
    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        const int K = 2 * rng.uniform_int(1, 4);
        std::vector<InstanceLabeling> A, B;
        for (int k = 0; k < K; ++k) {
            A.push_back(InstanceLabeling{{rng.uniform_int(0, 2)}});
            B.push_back(InstanceLabeling{{rng.uniform_int(0, 2)}});
        }
        const auto empirical = [](const std::vector<InstanceLabeling>& s) {
            PredictiveState p(1, 3);
            for (const auto& y : s) p(0, y.labels[0]) += 1.0 / static_cast<double>(s.size());
            return p;
        };
        // with the self term over the same K samples (with replacement) on both sides
        const auto self = [](const std::vector<InstanceLabeling>& s) {
            double t = 0.0;
            for (const auto& a : s)
                for (const auto& b : s) t += pool_delta(a, b, LossConfig{});
            return t / static_cast<double>(s.size() * s.size());
        };
        const double ab = div_pc(empirical(A), B, LossConfig{}) - 0.5 * self(B) - 0.5 * div_pp(empirical(A), LossConfig{});
        const double ba = div_pc(empirical(B), A, LossConfig{}) - 0.5 * self(A) - 0.5 * div_pp(empirical(B), LossConfig{});
        EXPECT_NEAR(ab, ba, 1e-12);
        EXPECT_NEAR(self(A), div_pp(empirical(A), LossConfig{}), 1e-12);
    }
}

TEST(Disco, NonNegativeDiversities) {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const auto s = testkit::random_state(4, 3, rng);
        std::vector<InstanceLabeling> samples;
        for (int k = 0; k < 3; ++k) samples.push_back(testkit::random_labeling(4, 3, rng));
        const auto t = disco_terms(s, samples, LossConfig{}, DiscoConfig{});
        EXPECT_GE(t.div_pc, 0.0);
        EXPECT_GE(t.div_cc, 0.0);
        EXPECT_GE(t.div_pp, 0.0);
    }
}
