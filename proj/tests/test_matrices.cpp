#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "rmlab/matrices.hpp"

using namespace rmlab;

namespace {

oracle::Dense to_dense(const Matrix& m)
{
    oracle::Dense d(m.size(), std::vector<double>(m.size()));
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t j = 0; j < m.size(); ++j) d[i][j] = m(i, j);
    return d;
}

const PowerOptions tight{1e-14, 1'000'000};

}  // namespace

TEST(SampleMatrix, Deterministic)
{
    const auto a = sample_matrix(EntryDistribution::rademacher(), 2, 1234);
    const auto b = sample_matrix(EntryDistribution::rademacher(), 2, 1234);
    EXPECT_EQ(a.entries, b.entries);
}

TEST(SampleMatrix, RademacherSupport)
{
    const auto a = sample_matrix(EntryDistribution::rademacher(), 3, 5);
    for (double v : a.entries.data()) EXPECT_TRUE(v == 1.0 || v == -1.0);
}

TEST(SampleMatrix, GaussianEntriesCentered)
{
    const auto a = sample_matrix(EntryDistribution::gaussian(), 100, 77);
    double s = 0.0;
    for (double v : a.entries.data()) {
        ASSERT_TRUE(std::isfinite(v));
        s += v;
    }
    EXPECT_LT(std::abs(s / 1e4), 4.0 / std::sqrt(1e4));
}

TEST(SampleMatrix, RejectsDimension)
{
    EXPECT_THROW(sample_matrix(EntryDistribution::gaussian(), 0, 1), config_error);
    EXPECT_THROW(sample_matrix(EntryDistribution::gaussian(), 4097, 1), config_error);
}

TEST(OperatorNorm, SmallExamples)
{
    EXPECT_NEAR(operator_norm(Matrix::identity(3), 1).value, 1.0, 1e-12);
    EXPECT_NEAR(operator_norm(Matrix{{3, 0}, {0, -4}}, 1).value, 4.0, 1e-9);
    EXPECT_NEAR(operator_norm(Matrix{{0, 1}, {0, 0}}, 1).value, 1.0, 1e-12);
    EXPECT_EQ(operator_norm(Matrix(3), 1).value, 0.0);
}

TEST(OperatorNorm, ReportsNonConvergence)
{
    // two equal top singular values with nearly equal third: capped iterations
    const auto rep = operator_norm(Matrix{{1.0, 0, 0}, {0, 0.9999999, 0}, {0, 0, 0.5}}, 3, {1e-300, 5});
    EXPECT_FALSE(rep.converged);
    EXPECT_EQ(rep.iterations, 5u);
    EXPECT_NEAR(rep.value, 1.0, 1e-3);
}

TEST(SmallestSingularValue, SmallExamples)
{
    auto id = smallest_singular_value(Matrix::identity(4), 1);
    EXPECT_NEAR(id.sigma_min, 1.0, 1e-12);
    EXPECT_FALSE(id.singular);

    auto rank1 = smallest_singular_value(Matrix{{1, 1}, {1, 1}}, 1);
    EXPECT_TRUE(rank1.singular);
    EXPECT_EQ(rank1.sigma_min, 0.0);

    auto diag = smallest_singular_value(Matrix{{2, 0}, {0, 0.5}}, 1);
    EXPECT_NEAR(diag.sigma_min, 0.5, 1e-12);
    EXPECT_FALSE(diag.singular);
}

TEST(SmallestSingularValue, RejectsNonPositivePivotTol)
{
    EXPECT_THROW(smallest_singular_value(Matrix::identity(2), 1, 0.0), config_error);
}

TEST(LuFactorization, SolvesBothOrientations)
{
    const Matrix a{{0, 2, 1}, {1, -1, 3}, {4, 0.5, -2}};
    const LuFactorization lu(a);
    const std::vector<double> b{1, 2, 3};
    const auto x = lu.solve(b);
    const auto ax = multiply(a, x);
    const auto y = lu.solve_transposed(b);
    const auto aty = multiply_transposed(a, y);
    for (int i = 0; i < 3; ++i) {
        EXPECT_NEAR(ax[i], b[i], 1e-12);
        EXPECT_NEAR(aty[i], b[i], 1e-12);
    }
}

TEST(Spectral, MatchesJacobiOracleOnSmallMatrices)
{
    int checked = 0;
    for (std::size_t n = 1; n <= 6; ++n) {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const auto dist = seed % 2 ? EntryDistribution::gaussian() : EntryDistribution::uniform();
            const auto s = sample_matrix(dist, n, 1000 * n + seed);
            const auto sv = oracle::singular_values(to_dense(s.entries));
            const auto top = operator_norm(s, tight);
            const auto bottom = smallest_singular_value(s, std::nullopt, tight);
            ASSERT_FALSE(bottom.singular);
            EXPECT_NEAR(top.value, sv.back(), 1e-8 * std::max(1.0, sv.back())) << "n=" << n << " seed=" << seed;
            EXPECT_NEAR(bottom.sigma_min, sv.front(), 1e-8 * std::max(1.0, sv.front()))
                << "n=" << n << " seed=" << seed;
            ++checked;
        }
    }
    EXPECT_EQ(checked, 120);
}

TEST(Spectral, SigmaMinTimesInverseNormIsOne)
{
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        const auto s = sample_matrix(EntryDistribution::gaussian(), 5, 500 + seed);
        const auto inv = oracle::gauss_jordan_inverse(to_dense(s.entries));
        const double inv_norm = oracle::dense_spectral_norm(inv);
        const auto res = smallest_singular_value(s, std::nullopt, tight);
        if (inv_norm > 1e4) continue;  // keep to well-conditioned instances
        EXPECT_NEAR(res.sigma_min * inv_norm, 1.0, 1e-6) << seed;
    }
}

TEST(Spectral, ScalingIsHomogeneous)
{
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto s = sample_matrix(EntryDistribution::gaussian(), 6, 900 + seed);
        const double base = smallest_singular_value(s.entries, s.seed, std::nullopt, tight).sigma_min;
        for (double c : {2.0, -3.0}) {
            const double scaled = smallest_singular_value(s.entries.scaled(c), s.seed, std::nullopt, tight).sigma_min;
            EXPECT_NEAR(scaled, std::abs(c) * base, 1e-9 * std::abs(c) * base);
        }
    }
}

TEST(Spectral, SummaryIsPureAndOrdered)
{
    const auto a = summarize(sample_matrix(EntryDistribution::rademacher(), 40, 8));
    const auto b = summarize(sample_matrix(EntryDistribution::rademacher(), 40, 8));
    EXPECT_EQ(a.op_norm, b.op_norm);
    EXPECT_EQ(a.sigma_min, b.sigma_min);
    EXPECT_LE(a.sigma_min, a.op_norm);
    EXPECT_TRUE(a.converged);
}

TEST(Spectral, SingularRademacherMatrixFlagged)
{
    // repeated row: exactly singular with +-1 entries
    Matrix m{{1, -1, 1}, {1, -1, 1}, {-1, 1, 1}};
    MatrixSample s{m, EntryDistribution::rademacher(), 3};
    const auto sum = summarize(s);
    EXPECT_TRUE(sum.singular_flag);
    EXPECT_EQ(sum.sigma_min, 0.0);
    EXPECT_LE(sum.sigma_min, sum.op_norm);
}
