#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "oracles.hpp"
#include "rmlab/distributions.hpp"

using namespace rmlab;

namespace {

std::vector<EntryDistribution> all_laws()
{
    return {EntryDistribution::rademacher(), EntryDistribution::gaussian(), EntryDistribution::uniform(),
            EntryDistribution::parse("discrete:-2:0.2,0.5:0.8"),
            EntryDistribution::parse("discrete:-1.5:0.2222222222222222,0:0.5555555555555556,1.5:0.2222222222222222")};
}

}  // namespace

TEST(EntryDistribution, SupportOfDraws)
{
    RngStream rng(1);
    const auto rad = EntryDistribution::rademacher();
    const auto uni = EntryDistribution::uniform();
    const auto dis = EntryDistribution::parse("discrete:-2:0.2,0.5:0.8");
    for (int i = 0; i < 10000; ++i) {
        const double r = rad.sample(rng);
        ASSERT_TRUE(r == 1.0 || r == -1.0);
        const double u = uni.sample(rng);
        ASSERT_LE(std::abs(u), std::numbers::sqrt3);
        const double d = dis.sample(rng);
        ASSERT_TRUE(d == -2.0 || d == 0.5);
    }
}

TEST(EntryDistribution, SampleMomentsConverge)
{
    constexpr int n = 1'000'000;
    for (const auto& law : all_laws()) {
        RngStream rng(11);
        double s = 0.0, s2 = 0.0, s4 = 0.0;
        for (int i = 0; i < n; ++i) {
            const double b = law.sample(rng);
            s += b;
            s2 += b * b;
            s4 += b * b * b * b;
        }
        const double mean = s / n;
        const double var = s2 / n;  // known mean 0
        const double sd_var = std::sqrt((s4 / n - 1.0) / n);
        EXPECT_LT(std::abs(mean), 4.0 / std::sqrt(static_cast<double>(n))) << law.spec();
        EXPECT_LT(std::abs(var - 1.0), 4.0 * sd_var + 1e-12) << law.spec();
    }
}

TEST(EntryDistribution, DiscreteValidation)
{
    EXPECT_THROW(EntryDistribution::parse("discrete:-1:0.5,1:0.4"), config_error);
    EXPECT_THROW(EntryDistribution::parse("discrete:-1:0.25,3:0.75"), config_error);
    EXPECT_THROW(EntryDistribution::parse("discrete:-2:0.5,2:0.5"), config_error);
    EXPECT_THROW(EntryDistribution::parse("cauchy"), config_error);
    EXPECT_THROW(EntryDistribution::parse("discrete:1"), config_error);
    EXPECT_NO_THROW(EntryDistribution::parse("discrete:-1:0.5,1:0.5"));
}

TEST(EntryDistribution, SpecRoundTrips)
{
    for (const auto& law : all_laws()) EXPECT_EQ(EntryDistribution::parse(law.spec()), law);
}

TEST(CharFn, ClosedForms)
{
    EXPECT_DOUBLE_EQ(EntryDistribution::rademacher().char_fn(std::numbers::pi), -1.0);
    EXPECT_DOUBLE_EQ(EntryDistribution::gaussian().char_fn(0.0), 1.0);
    const double expected = std::sin(std::numbers::sqrt3) / std::numbers::sqrt3;
    EXPECT_NEAR(EntryDistribution::uniform().char_fn(1.0), expected, 1e-15);
    EXPECT_NEAR(expected, 0.56986, 5e-6);
}

TEST(CharFn, UniformMatchesNumericalIntegration)
{
    const double c = std::numbers::sqrt3;
    for (double t : {0.3, 1.0, 2.7, 9.0}) {
        const double numeric = oracle::simpson([&](double x) { return std::cos(x * t) / (2.0 * c); }, -c, c, 4000);
        EXPECT_NEAR(EntryDistribution::uniform().char_fn(t), numeric, 1e-10) << t;
    }
}

TEST(CharFn, AsymmetricDiscreteIsModulus)
{
    const auto law = EntryDistribution::parse("discrete:-2:0.2,0.5:0.8");
    EXPECT_FALSE(law.symmetric());
    const double t = 1.3;
    const double re = 0.2 * std::cos(-2.0 * t) + 0.8 * std::cos(0.5 * t);
    const double im = 0.2 * std::sin(-2.0 * t) + 0.8 * std::sin(0.5 * t);
    EXPECT_NEAR(law.char_fn(t), std::hypot(re, im), 1e-15);
}

TEST(CharFn, BoundedAndEven)
{
    RngStream rng(5);
    for (const auto& law : all_laws()) {
        EXPECT_DOUBLE_EQ(law.char_fn(0.0), 1.0) << law.spec();
        for (int i = 0; i < 10000; ++i) {
            const double t = 200.0 * rng.uniform() - 100.0;
            const double phi = law.char_fn(t);
            ASSERT_LE(std::abs(phi), 1.0 + 1e-15) << law.spec() << " t=" << t;
            if (law.symmetric()) ASSERT_EQ(phi, law.char_fn(-t)) << law.spec();
        }
    }
}

TEST(EntryDistribution, EmpiricalCdfMatchesAnalytic)
{
    constexpr int n = 1'000'000;
    for (const auto& law : all_laws()) {
        RngStream rng(77);
        std::vector<double> draws(n);
        for (double& d : draws) d = law.sample(rng);
        std::sort(draws.begin(), draws.end());
        for (int q = 1; q <= 20; ++q) {
            const double x = -2.5 + 5.0 * q / 21.0;
            const double p = law.cdf(x);
            const double empirical =
                static_cast<double>(std::upper_bound(draws.begin(), draws.end(), x) - draws.begin()) / n;
            const double se = std::sqrt(std::max(p * (1 - p), 1e-12) / n);
            EXPECT_LE(std::abs(empirical - p), 3.0 * se + 1e-12) << law.spec() << " x=" << x;
        }
    }
}

TEST(SubgaussianDiagnostic, RademacherIsExact)
{
    RngStream rng(2);
    const auto rep = subgaussian_diagnostic(EntryDistribution::rademacher(), 10000, 12, rng);
    ASSERT_EQ(rep.size(), 6u);
    for (const auto& r : rep) {
        EXPECT_NEAR(r.ratio, 1.0 / std::sqrt(r.p), 1e-12);
        EXPECT_LE(r.ratio, 1.0);
    }
}

TEST(SubgaussianDiagnostic, GaussianSecondAndFourthMoments)
{
    RngStream rng(3);
    const auto rep = subgaussian_diagnostic(EntryDistribution::gaussian(), 1'000'000, 4, rng);
    ASSERT_EQ(rep.size(), 2u);
    EXPECT_NEAR(rep[0].ratio, 1.0 / std::numbers::sqrt2, 4.0 * rep[0].std_error);
    EXPECT_NEAR(rep[1].ratio, std::pow(3.0, 0.25) / 2.0, 4.0 * rep[1].std_error);
    EXPECT_NEAR(std::pow(3.0, 0.25) / 2.0, 0.658, 5e-4);
    for (const auto& r : rep) EXPECT_TRUE(std::isfinite(r.ratio) && std::isfinite(r.std_error));
}

TEST(SubgaussianDiagnostic, RejectsBadArguments)
{
    RngStream rng(4);
    EXPECT_THROW(subgaussian_diagnostic(EntryDistribution::gaussian(), 10000, 14, rng), config_error);
    EXPECT_THROW(subgaussian_diagnostic(EntryDistribution::gaussian(), 9999, 4, rng), config_error);
}

TEST(EntryDistribution, ThirdAbsoluteMoments)
{
    RngStream rng(9);
    for (const auto& law : all_laws()) {
        double s = 0.0;
        constexpr int n = 400000;
        for (int i = 0; i < n; ++i) s += std::pow(std::abs(law.sample(rng)), 3);
        EXPECT_NEAR(s / n, law.third_abs_moment(), 0.02 * law.third_abs_moment()) << law.spec();
    }
}
