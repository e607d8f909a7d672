#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "tactile/errors.hpp"
#include "tactile/rng.hpp"
#include "tactile/sdt.hpp"

using namespace tactile;

TEST(Sdt, NormalQuantileInvertsCdf) {
    for (double p : {1e-6, 0.001, 0.02425, 0.1, 0.3085, 0.5, 0.6915, 0.9, 0.99, 1 - 1e-6})
        EXPECT_NEAR(normal_cdf(normal_quantile(p)), p, 1e-13 + 1e-10 * p);
    // tabulated values
    EXPECT_NEAR(normal_quantile(0.975), 1.959963984540054, 1e-12);
    EXPECT_NEAR(normal_quantile(0.5), 0.0, 1e-15);
}

TEST(Sdt, SeparableSetsGiveZeroCriterion) {
    const auto c = fit_criterion({-1.0, -0.9}, {0.9, 1.0});
    EXPECT_DOUBLE_EQ(c.c, 0.0);
    EXPECT_FALSE(c.reversed);
    EXPECT_DOUBLE_EQ(c.percent_correct, 1.0);
}

TEST(Sdt, IdenticalSetsAreAtChance) {
    const std::vector<double> a = {0.1, 0.5, 0.7, 1.3, 2.0};
    const auto c = fit_criterion(a, a);
    EXPECT_DOUBLE_EQ(c.percent_correct, 0.5);
}

TEST(Sdt, ReversedPolarityIsFlagged) {
    const auto c = fit_criterion({0.9, 1.0}, {-1.0, -0.9});
    EXPECT_TRUE(c.reversed);
    EXPECT_DOUBLE_EQ(c.c, 0.0);
    EXPECT_DOUBLE_EQ(c.percent_correct, 1.0);
}

TEST(Sdt, GaussianCriterionAndRates) {
    Rng ra(11), rb(12);
    std::vector<double> a(100000), b(100000);
    for (auto& x : a) x = ra.normal();
    for (auto& x : b) x = 1.0 + rb.normal();
    // the argmax has a sampling spread of ~0.026 at this n; see the oracle test
    const auto c = fit_criterion(a, b);
    EXPECT_NEAR(c.c, 0.5, 0.08);
    EXPECT_NEAR(yes_no_rate(b, 0.5), 0.6915, 0.005);
    EXPECT_NEAR(yes_no_rate(a, 0.5), 0.3085, 0.005);
}

TEST(Sdt, YesNoRate) {
    EXPECT_DOUBLE_EQ(yes_no_rate({1, 2, 3}, 5), 0.0);
    EXPECT_DOUBLE_EQ(yes_no_rate({1, 2, 3, 4}, 2.5), 0.5);
    EXPECT_DOUBLE_EQ(yes_no_rate({1, 2, 3, 4}, 2.0), 0.5);  // strictly above
    EXPECT_THROW(yes_no_rate({}, 0.0), InvalidArgument);
}

TEST(Sdt, SameDifferentRates) {
    auto [s2, s1] = same_different_rates(0.0, 1.0);
    EXPECT_DOUBLE_EQ(s2, 1.0);
    EXPECT_DOUBLE_EQ(s1, 0.0);
    for (double q : {0.0, 0.2, 0.5, 0.77, 1.0}) {
        std::tie(s2, s1) = same_different_rates(q, q);
        EXPECT_DOUBLE_EQ(s2, s1);
        EXPECT_EQ(percent_correct(s2, s1), 0.5);
    }
    std::tie(s2, s1) = same_different_rates(0.3085, 0.6915);
    EXPECT_NEAR(s2, 0.57334, 5e-5);
    EXPECT_NEAR(s1, 0.42666, 5e-5);
    EXPECT_THROW(same_different_rates(-0.1, 0.5), InvalidArgument);
    EXPECT_THROW(same_different_rates(0.5, 1.1), InvalidArgument);
}

TEST(Sdt, SameDifferentMatchesMonteCarlo) {
    const auto mc = monte_carlo_same_different(0.3085, 0.6915, 1000000, 21);
    const auto cf = same_different_rates(0.3085, 0.6915);
    EXPECT_NEAR(mc.first, cf.first, 0.005);
    EXPECT_NEAR(mc.second, cf.second, 0.005);
}

TEST(Sdt, SameDifferentFromGaussianTrials) {
    // Independent oracle: draw decision variables directly, d' = 1, c = 0.5.
    Rng rng(77);
    const std::size_t n = 1000000;
    std::size_t d1 = 0, d2 = 0;
    for (std::size_t t = 0; t < n; ++t) {
        const bool x1 = rng.normal() > 0.5, x2 = rng.normal() > 0.5;
        const bool y1 = rng.normal() > 0.5, y2 = 1.0 + rng.normal() > 0.5;
        d1 += x1 != x2;
        d2 += y1 != y2;
    }
    EXPECT_NEAR(static_cast<double>(d2) / n, 0.5733, 0.005);
    EXPECT_NEAR(static_cast<double>(d1) / n, 0.4267, 0.005);
}

TEST(Sdt, PercentCorrect) {
    EXPECT_DOUBLE_EQ(percent_correct(1.0, 0.0), 1.0);
    for (double x : {0.0, 0.3, 0.9}) EXPECT_DOUBLE_EQ(percent_correct(x, x), 0.5);
    EXPECT_NEAR(percent_correct(0.6910, 0.4266), 0.6322, 1e-4);
}

TEST(Sdt, PercentCorrectMonotone) {
    for (double a = 0.0; a <= 1.0; a += 0.05)
        for (double b = 0.0; b + 0.05 <= 1.0; b += 0.05) {
            EXPECT_LE(percent_correct(b, a), percent_correct(b + 0.05, a));
            EXPECT_GE(percent_correct(a, b), percent_correct(a, b + 0.05));
        }
}

TEST(Sdt, DPrime) {
    EXPECT_DOUBLE_EQ(d_prime(0.4, 0.4), 0.0);
    EXPECT_NEAR(d_prime(0.6915, 0.3085), 1.00, 0.01);
    // 1 / (2n) clipping; scipy: 2 * norm.ppf(1 - 1/600) = 5.8704
    EXPECT_NEAR(d_prime(1.0, 0.0, 300, 300), 5.8704, 1e-3);
    EXPECT_THROW(d_prime(1.0, 0.5), InvalidArgument);
}

TEST(Sdt, CurveJndInterpolation) {
    EXPECT_DOUBLE_EQ(*first_crossing({1.0, 3.0}, {0.5, 1.0}, 0.75), 2.0);
    EXPECT_FALSE(first_crossing({1, 2, 3, 4, 5}, {0.5, 0.55, 0.6, 0.58, 0.6}, 0.75).has_value());
    // non-monotone, single crossing between 2 and 3
    const auto j = first_crossing({1, 2, 3, 4}, {0.6, 0.55, 0.8, 0.7}, 0.75);
    ASSERT_TRUE(j.has_value());
    EXPECT_NEAR(*j, 2.8, 1e-12);
    // first crossing wins
    EXPECT_NEAR(*first_crossing({1, 2, 3, 4, 5}, {0.5, 1.0, 0.6, 0.5, 1.0}, 0.75), 1.5, 1e-12);
}

TEST(Sdt, BuildCurve) {
    std::vector<DecisionModel> models;
    Rng rng(5);
    const double periods[] = {3.0, 1.0, 2.0};  // unsorted on purpose
    for (double p : periods) {
        std::vector<double> a(500), b(500);
        for (auto& x : a) x = rng.normal();
        for (auto& x : b) x = p + rng.normal();
        models.push_back(fit_decision_model(p, a, b));
    }
    const auto c = build_curve(models);
    ASSERT_EQ(c.points.size(), 3u);
    for (std::size_t i = 1; i < c.points.size(); ++i) EXPECT_LT(c.points[i - 1].period, c.points[i].period);
    for (const auto& pt : c.points) {
        EXPECT_GE(pt.pc, 0.0);
        EXPECT_LE(pt.pc, 1.0);
        EXPECT_NEAR(pt.dprime, pt.period, 0.25);
    }
    EXPECT_TRUE(c.jnd.has_value());
    EXPECT_THROW(build_curve({models[0]}), InvalidArgument);
}

TEST(Sdt, DispersionSplitsAtInflection) {
    std::vector<DecisionModel> ms;
    const double q[] = {0.5, 0.4, 0.3, 0.2};
    const double per[] = {1.0, 2.0, 3.0, 4.0};
    for (int i = 0; i < 4; ++i) {
        DecisionModel m;
        m.period = per[i];
        m.q = q[i];
        m.h = 1 - q[i];
        m.n_a = m.n_b = 100;
        ms.push_back(m);
    }
    const auto c = build_curve(ms);
    const double d1 = d_prime(0.5, 0.5), d2 = d_prime(0.6, 0.4), d3 = d_prime(0.7, 0.3), d4 = d_prime(0.8, 0.2);
    EXPECT_NEAR(c.sigma_dprime_low, std::fabs(d2 - d1) / 2, 1e-12);
    EXPECT_NEAR(c.sigma_dprime_high, std::fabs(d4 - d3) / 2, 1e-12);
}

// ---- properties ----

TEST(SdtProperty, CriterionIsRankStatistic) {
    Rng rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> a(200), b(150);
        for (auto& x : a) x = rng.normal();
        for (auto& x : b) x = 0.7 + rng.normal();
        auto f = [](double x) { return std::exp(x) + 3.0 * x; };  // strictly increasing
        std::vector<double> fa(a.size()), fb(b.size());
        std::transform(a.begin(), a.end(), fa.begin(), f);
        std::transform(b.begin(), b.end(), fb.begin(), f);
        const auto c1 = fit_criterion(a, b), c2 = fit_criterion(fa, fb);
        EXPECT_DOUBLE_EQ(c1.percent_correct, c2.percent_correct);
        // the mapped criterion splits the transformed samples exactly as c1 split the originals
        EXPECT_EQ(yes_no_rate(a, c1.c), yes_no_rate(fa, f(c1.c)));
        EXPECT_EQ(yes_no_rate(b, c1.c), yes_no_rate(fb, f(c1.c)));
    }
}

TEST(SdtProperty, DPrimeAntisymmetricUnderSwap) {
    Rng rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> a(300), b(300);
        const double sep = rng.uniform(-2, 2);
        for (auto& x : a) x = rng.normal();
        for (auto& x : b) x = sep + rng.normal();
        const auto m1 = fit_decision_model(1.0, a, b);
        const auto m2 = fit_decision_model(1.0, b, a);
        EXPECT_DOUBLE_EQ(m1.criterion.c, m2.criterion.c);
        EXPECT_NEAR(d_prime(m1.h, m1.q, 300, 300), -d_prime(m2.h, m2.q, 300, 300), 1e-12);
    }
}

TEST(SdtProperty, GaussianPipelineRecoversSeparation) {
    for (double sep : {0.5, 1.0, 2.0}) {
        const auto r = gaussian_oracle(sep, 100000, 100 + static_cast<std::uint64_t>(sep * 10));
        EXPECT_NEAR(r.dprime, sep, 0.05) << sep;
    }
}
