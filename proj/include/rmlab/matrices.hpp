#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "rmlab/distributions.hpp"
#include "rmlab/errors.hpp"
#include "rmlab/rng.hpp"

namespace rmlab {

/// Dense square matrix, row-major.
class Matrix {
public:
    Matrix() = default;
    explicit Matrix(std::size_t n) : n_(n), data_(n * n, 0.0) {}

    Matrix(std::initializer_list<std::initializer_list<double>> rows) : Matrix(rows.size())
    {
        std::size_t i = 0;
        for (const auto& row : rows) {
            if (row.size() != n_) throw config_error("Matrix: rows must form a square array");
            std::copy(row.begin(), row.end(), data_.begin() + static_cast<std::ptrdiff_t>(i * n_));
            ++i;
        }
    }

    static Matrix identity(std::size_t n)
    {
        Matrix m(n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t size() const noexcept { return n_; }
    double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * n_ + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * n_ + j]; }
    std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * n_, n_}; }
    std::span<const double> row(std::size_t i) const noexcept { return {data_.data() + i * n_, n_}; }
    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }

    double max_abs() const noexcept
    {
        double m = 0.0;
        for (double v : data_) m = std::max(m, std::abs(v));
        return m;
    }

    Matrix scaled(double c) const
    {
        Matrix out = *this;
        for (double& v : out.data_) v *= c;
        return out;
    }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t n_ = 0;
    std::vector<double> data_;
};

inline std::vector<double> multiply(const Matrix& a, std::span<const double> x)
{
    std::vector<double> y(a.size(), 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        double s = 0.0;
        const auto r = a.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) s += r[j] * x[j];
        y[i] = s;
    }
    return y;
}

inline std::vector<double> multiply_transposed(const Matrix& a, std::span<const double> x)
{
    std::vector<double> y(a.size(), 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double xi = x[i];
        if (xi == 0.0) continue;
        const auto r = a.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) y[j] += xi * r[j];
    }
    return y;
}

inline double norm2(std::span<const double> x) noexcept
{
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

constexpr std::size_t max_dimension = 4096;

struct MatrixSample {
    Matrix entries;
    EntryDistribution dist = EntryDistribution::rademacher();
    std::uint64_t seed = 0;

    std::size_t n() const noexcept { return entries.size(); }
};

/// n x n matrix with i.i.d. entries drawn row-major from the stream derived
/// from `seed`.
inline MatrixSample sample_matrix(const EntryDistribution& dist, std::size_t n, std::uint64_t seed)
{
    if (n < 1 || n > max_dimension) throw config_error("sample_matrix: dimension must be in [1, 4096]");
    MatrixSample s{Matrix(n), dist, seed};
    RngStream rng = derive_stream(seed, 0);
    for (double& v : s.entries.data()) v = dist.sample(rng);
    return s;
}

struct PowerOptions {
    double tol = 1e-10;
    std::size_t max_iter = 10'000;
};

struct IterationReport {
    double value = 0.0;
    std::size_t iterations = 0;
    double residual = 0.0;  ///< ||Mv - lambda v|| / lambda at exit, M the iterated operator
    bool converged = false;
};

namespace detail {

inline constexpr std::uint64_t start_vector_salt = 0x5354415254ULL;

inline std::vector<double> start_vector(std::size_t n, std::uint64_t seed)
{
    RngStream rng = derive_stream(seed, start_vector_salt);
    std::vector<double> v(n);
    for (double& x : v) x = rng.normal();
    const double nv = norm2(v);
    for (double& x : v) x /= nv;
    return v;
}

/// Power iteration for the top eigenvalue of a PSD operator given as
/// v -> (w, Mv) with lambda = ||w||^2 = <v, Mv>.
template <typename Step>
IterationReport psd_power_iteration(std::vector<double> v, const PowerOptions& opt, Step&& step)
{
    if (!(opt.tol > 0.0)) throw config_error("power iteration: tol must be positive");
    IterationReport rep;
    double previous = 0.0;
    for (std::size_t it = 1; it <= opt.max_iter; ++it) {
        auto [w, u] = step(v);
        const double w_norm = norm2(w);
        const double lambda = w_norm * w_norm;
        rep.iterations = it;
        rep.value = lambda;
        if (lambda == 0.0) {
            rep.residual = 0.0;
            rep.converged = true;
            return rep;
        }
        double res = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) res += (u[i] - lambda * v[i]) * (u[i] - lambda * v[i]);
        rep.residual = std::sqrt(res) / lambda;

        const double change = std::abs(lambda - previous) / lambda;
        previous = lambda;
        const double u_norm = norm2(u);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = u[i] / u_norm;
        if (change < opt.tol) {
            rep.converged = true;
            return rep;
        }
    }
    return rep;
}

}  // namespace detail

/// Largest singular value by power iteration on A^T A from a start vector
/// seeded by `start_seed`. On non-convergence the best estimate is returned
/// with `converged == false`.
inline IterationReport operator_norm(const Matrix& a, std::uint64_t start_seed, const PowerOptions& opt = {})
{
    auto rep = detail::psd_power_iteration(detail::start_vector(a.size(), start_seed), opt,
                                           [&](const std::vector<double>& v) {
                                               auto w = multiply(a, v);
                                               auto u = multiply_transposed(a, w);
                                               return std::pair{std::move(w), std::move(u)};
                                           });
    rep.value = std::sqrt(rep.value);
    return rep;
}

inline IterationReport operator_norm(const MatrixSample& s, const PowerOptions& opt = {})
{
    return operator_norm(s.entries, s.seed, opt);
}

/// PA = LU with partial pivoting; L unit lower and U stored in one array.
class LuFactorization {
public:
    explicit LuFactorization(Matrix a) : lu_(std::move(a)), perm_(lu_.size())
    {
        const std::size_t n = lu_.size();
        for (std::size_t i = 0; i < n; ++i) perm_[i] = i;
        min_pivot_ = n ? std::numeric_limits<double>::infinity() : 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            std::size_t p = k;
            double best = std::abs(lu_(k, k));
            for (std::size_t i = k + 1; i < n; ++i) {
                if (std::abs(lu_(i, k)) > best) {
                    best = std::abs(lu_(i, k));
                    p = i;
                }
            }
            if (p != k) {
                std::swap_ranges(lu_.row(k).begin(), lu_.row(k).end(), lu_.row(p).begin());
                std::swap(perm_[k], perm_[p]);
            }
            min_pivot_ = std::min(min_pivot_, best);
            const double pivot = lu_(k, k);
            if (pivot == 0.0) continue;
            const auto rk = lu_.row(k);
            for (std::size_t i = k + 1; i < n; ++i) {
                const auto ri = lu_.row(i);
                const double f = ri[k] / pivot;
                ri[k] = f;
                if (f == 0.0) continue;
                for (std::size_t j = k + 1; j < n; ++j) ri[j] -= f * rk[j];
            }
        }
    }

    double min_pivot() const noexcept { return min_pivot_; }

    /// Solves A x = b.
    std::vector<double> solve(std::span<const double> b) const
    {
        const std::size_t n = lu_.size();
        std::vector<double> x(n);
        for (std::size_t i = 0; i < n; ++i) {
            double s = b[perm_[i]];
            const auto r = lu_.row(i);
            for (std::size_t j = 0; j < i; ++j) s -= r[j] * x[j];
            x[i] = s;
        }
        for (std::size_t i = n; i-- > 0;) {
            double s = x[i];
            const auto r = lu_.row(i);
            for (std::size_t j = i + 1; j < n; ++j) s -= r[j] * x[j];
            x[i] = s / r[i];
        }
        return x;
    }

    /// Solves A^T x = b.
    std::vector<double> solve_transposed(std::span<const double> b) const
    {
        const std::size_t n = lu_.size();
        std::vector<double> z(b.begin(), b.end());
        // U^T z = b, column sweep over rows of U
        for (std::size_t j = 0; j < n; ++j) {
            const auto r = lu_.row(j);
            z[j] /= r[j];
            const double zj = z[j];
            for (std::size_t k = j + 1; k < n; ++k) z[k] -= r[k] * zj;
        }
        // L^T y = z, unit diagonal
        for (std::size_t j = n; j-- > 0;) {
            const auto r = lu_.row(j);
            const double yj = z[j];
            for (std::size_t k = 0; k < j; ++k) z[k] -= r[k] * yj;
        }
        std::vector<double> x(n);
        for (std::size_t i = 0; i < n; ++i) x[perm_[i]] = z[i];
        return x;
    }

private:
    Matrix lu_;
    std::vector<std::size_t> perm_;
    double min_pivot_ = 0.0;
};

struct SigmaMinResult {
    double sigma_min = 0.0;
    bool singular = false;
    double min_pivot = 0.0;
    IterationReport report;  ///< iteration on (A^T A)^{-1}; empty when singular
};

inline double default_pivot_tol(const Matrix& a) noexcept
{
    return 1e-12 * a.max_abs() * static_cast<double>(a.size());
}

/// Smallest singular value via LU and inverse power iteration on A^T A.
/// A pivot below `pivot_tol` reports the matrix as singular with sigma_min 0.
inline SigmaMinResult smallest_singular_value(const Matrix& a, std::uint64_t start_seed,
                                              std::optional<double> pivot_tol = std::nullopt,
                                              const PowerOptions& opt = {})
{
    const double tol = pivot_tol.value_or(default_pivot_tol(a));
    if (pivot_tol && !(*pivot_tol > 0.0)) throw config_error("smallest_singular_value: pivot_tol must be positive");

    const LuFactorization lu(a);
    SigmaMinResult out;
    out.min_pivot = lu.min_pivot();
    if (lu.min_pivot() < tol || lu.min_pivot() == 0.0) {
        out.singular = true;
        out.report.converged = true;
        return out;
    }
    out.report = detail::psd_power_iteration(detail::start_vector(a.size(), start_seed), opt,
                                             [&](const std::vector<double>& v) {
                                                 auto w = lu.solve_transposed(v);
                                                 auto u = lu.solve(w);
                                                 return std::pair{std::move(w), std::move(u)};
                                             });
    out.sigma_min = 1.0 / std::sqrt(out.report.value);
    return out;
}

inline SigmaMinResult smallest_singular_value(const MatrixSample& s, std::optional<double> pivot_tol = std::nullopt,
                                              const PowerOptions& opt = {})
{
    return smallest_singular_value(s.entries, s.seed, pivot_tol, opt);
}

struct SpectralSummary {
    double op_norm = 0.0;
    double sigma_min = 0.0;
    bool singular_flag = false;
    std::size_t op_iterations = 0;
    std::size_t min_iterations = 0;
    double op_residual = 0.0;
    double min_residual = 0.0;
    bool converged = true;
};

/// Both extreme singular values; a pure function of (dist, n, seed).
inline SpectralSummary summarize(const MatrixSample& s, const PowerOptions& opt = {})
{
    const auto top = operator_norm(s, opt);
    const auto bottom = smallest_singular_value(s, std::nullopt, opt);
    SpectralSummary sum;
    sum.op_norm = top.value;
    sum.sigma_min = std::min(bottom.sigma_min, top.value);
    sum.singular_flag = bottom.singular;
    sum.op_iterations = top.iterations;
    sum.min_iterations = bottom.report.iterations;
    sum.op_residual = top.residual;
    sum.min_residual = bottom.report.residual;
    sum.converged = top.converged && bottom.report.converged;
    return sum;
}

}  // namespace rmlab
