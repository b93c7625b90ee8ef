#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "rmlab/distributions.hpp"
#include "rmlab/errors.hpp"
#include "rmlab/parallel.hpp"
#include "rmlab/rng.hpp"
#include "rmlab/sphere_profile.hpp"
#include "rmlab/stats.hpp"

namespace rmlab {

enum class Method {
    exact,
    convolution,
    monte_carlo,
    esseen_bound,
    halasz_profile_bound,
    halasz_integral_bound,
    berry_esseen_bound,
};

inline const char* to_string(Method m) noexcept
{
    switch (m) {
    case Method::exact: return "exact";
    case Method::convolution: return "convolution";
    case Method::monte_carlo: return "monte_carlo";
    case Method::esseen_bound: return "esseen_bound";
    case Method::halasz_profile_bound: return "halasz_profile_bound";
    case Method::halasz_integral_bound: return "halasz_integral_bound";
    case Method::berry_esseen_bound: return "berry_esseen_bound";
    }
    return "?";
}

inline Method parse_method(std::string_view s)
{
    for (auto m : {Method::exact, Method::convolution, Method::monte_carlo, Method::esseen_bound,
                   Method::halasz_profile_bound, Method::halasz_integral_bound, Method::berry_esseen_bound})
        if (s == to_string(m)) return m;
    throw config_error("unknown small-ball method '" + std::string(s) + "'");
}

/// P(|sum_j beta_j x_j - v| < t).
struct SmallBallQuery {
    std::vector<double> x;
    EntryDistribution dist = EntryDistribution::rademacher();
    double v = 0.0;
    double t = 1.0;

    void validate() const
    {
        if (!(t > 0.0) || !std::isfinite(t)) throw config_error("small-ball query: t must be positive");
        if (!std::isfinite(v)) throw config_error("small-ball query: v must be finite");
        if (std::none_of(x.begin(), x.end(), [](double w) { return w != 0.0; }))
            throw config_error("small-ball query: x must be nonzero");
        for (double w : x)
            if (!std::isfinite(w)) throw config_error("small-ball query: x must be finite");
    }
};

/// A small-ball probability or an upper bound for one. Bound methods report
/// the constant-free bound, which may exceed 1.
struct ConcentrationEstimate {
    double value = 0.0;
    Method method = Method::exact;
    std::optional<Interval> ci;
    std::map<std::string, double> metadata;
    std::vector<std::string> notes;
};

struct ExactOptions {
    enum class Path { automatic, enumerate, convolve };
    Path path = Path::automatic;
    double h = 0.0;                           ///< grid step; 0 means t / 100
    std::uint64_t max_enumeration = 1u << 24;  ///< support^m limit for enumeration
    std::size_t max_grid_cells = 1u << 23;
};

namespace detail {

inline std::vector<double> nonzero_weights(std::span<const double> x)
{
    std::vector<double> w;
    for (double v : x)
        if (v != 0.0) w.push_back(v);
    return w;
}

inline bool enumeration_fits(std::size_t support, std::size_t terms, std::uint64_t limit) noexcept
{
    std::uint64_t count = 1;
    for (std::size_t i = 0; i < terms; ++i) {
        count *= support;
        if (count > limit) return false;
    }
    return true;
}

inline void require_finite_support(const EntryDistribution& d, const char* who)
{
    if (!d.finite_support())
        throw config_error(std::string(who) + ": continuous law has no exact oracle; use monte_carlo");
}

/// Mass of sum_j beta_j w_j in the open window (v - t, v + t), by depth-first
/// enumeration of all atom combinations.
inline double enumerate_window(std::span<const double> w, const std::vector<Atom>& atoms, double v, double t)
{
    double mass = 0.0;
    auto recurse = [&](auto& self, std::size_t depth, double sum, double prob) -> void {
        if (depth == w.size()) {
            if (std::abs(sum - v) < t) mass += prob;
            return;
        }
        for (const auto& a : atoms) self(self, depth + 1, sum + w[depth] * a.value, prob * a.prob);
    };
    recurse(recurse, 0, 0.0, 1.0);
    return mass;
}

}  // namespace detail

/// Law of sum_j beta_j x_j for finite-support beta: sorted atoms, exactly
/// equal sums merged.
inline std::vector<Atom> enumerate_sum_law(std::span<const double> x, const EntryDistribution& dist,
                                           std::uint64_t max_atoms = 1u << 20)
{
    detail::require_finite_support(dist, "enumerate_sum_law");
    const auto w = detail::nonzero_weights(x);
    if (!detail::enumeration_fits(dist.atoms().size(), w.size(), max_atoms))
        throw config_error("enumerate_sum_law: too many atoms to enumerate");
    std::vector<Atom> law{{0.0, 1.0}};
    for (double wj : w) {
        std::vector<Atom> next;
        next.reserve(law.size() * dist.atoms().size());
        for (const auto& s : law)
            for (const auto& a : dist.atoms()) next.push_back({s.value + wj * a.value, s.prob * a.prob});
        law = std::move(next);
    }
    std::sort(law.begin(), law.end(), [](const Atom& a, const Atom& b) { return a.value < b.value; });
    std::vector<Atom> merged;
    for (const auto& a : law) {
        if (!merged.empty() && merged.back().value == a.value)
            merged.back().prob += a.prob;
        else
            merged.push_back(a);
    }
    return merged;
}

/// Law of sum_j beta_j x_j with every atom position x_j * v_a rounded half-up
/// to the grid hZ. The true sum differs from the grid sum by at most
/// `shift_error` (the summed worst-case rounding per term).
struct GridLaw {
    double h = 0.0;
    long offset = 0;            ///< mass[i] sits at (offset + i) * h
    std::vector<double> mass;
    double shift_error = 0.0;

    double position(std::size_t i) const noexcept { return static_cast<double>(offset + static_cast<long>(i)) * h; }

    /// Grid mass with |s - v| < c (or <= c when `closed`).
    double window(double v, double c, bool closed = false) const noexcept
    {
        if (c <= 0.0 && !closed) return 0.0;
        const auto lo_idx = static_cast<long>(std::floor((v - c) / h)) - 1 - offset;
        const auto hi_idx = static_cast<long>(std::ceil((v + c) / h)) + 1 - offset;
        double s = 0.0;
        for (long i = std::max(0L, lo_idx); i <= std::min(hi_idx, static_cast<long>(mass.size()) - 1); ++i) {
            const double d = std::abs(position(static_cast<std::size_t>(i)) - v);
            if (closed ? d <= c : d < c) s += mass[static_cast<std::size_t>(i)];
        }
        return s;
    }

    /// max over v of the grid mass in a run of cells spanning less than
    /// `span` (at most `span` when `closed`); also returns the run midpoint.
    std::pair<double, double> best_run(double span, bool closed = false) const noexcept
    {
        double best = 0.0, center = position(0), running = 0.0;
        std::size_t j = 0;
        for (std::size_t i = 0; i < mass.size(); ++i) {
            if (j < i) {
                j = i;
                running = 0.0;
            }
            while (j < mass.size()) {
                const double width = static_cast<double>(j - i) * h;
                if (closed ? width > span : width >= span) break;
                running += mass[j];
                ++j;
            }
            if (running > best) {
                best = running;
                center = 0.5 * (position(i) + position(j > i ? j - 1 : i));
            }
            if (j > i) running -= mass[i];
        }
        return {best, center};
    }
};

inline GridLaw grid_law(std::span<const double> x, const EntryDistribution& dist, double h,
                        std::size_t max_cells = 1u << 23)
{
    detail::require_finite_support(dist, "grid_law");
    if (!(h > 0.0)) throw config_error("grid_law: h must be positive");
    GridLaw g;
    g.h = h;
    g.mass = {1.0};
    for (double wj : detail::nonzero_weights(x)) {
        std::vector<std::pair<long, double>> shifts;
        long lo = 0, hi = 0;
        double worst = 0.0;
        for (const auto& a : dist.atoms()) {
            const double y = wj * a.value;
            const auto idx = static_cast<long>(std::floor(y / h + 0.5));
            worst = std::max(worst, std::abs(y - static_cast<double>(idx) * h));
            if (shifts.empty()) lo = hi = idx;
            lo = std::min(lo, idx);
            hi = std::max(hi, idx);
            shifts.emplace_back(idx, a.prob);
        }
        const std::size_t width = static_cast<std::size_t>(hi - lo);
        if (g.mass.size() + width > max_cells) throw config_error("grid_law: grid too large for convolution");
        std::vector<double> next(g.mass.size() + width, 0.0);
        for (const auto& [idx, p] : shifts) {
            const auto off = static_cast<std::size_t>(idx - lo);
            for (std::size_t i = 0; i < g.mass.size(); ++i) next[i + off] += p * g.mass[i];
        }
        g.mass = std::move(next);
        g.offset += lo;
        g.shift_error += worst;
    }
    return g;
}

/// Rounding allowance on summed grid masses.
inline constexpr double summation_slack = 1e-12;

/// Exact P(|sum beta_j x_j - v| < t) for finite-support laws: enumeration
/// when support^m is small, grid convolution with a rigorous enclosure
/// otherwise.
inline ConcentrationEstimate exact_concentration(const SmallBallQuery& q, const ExactOptions& opt = {})
{
    q.validate();
    detail::require_finite_support(q.dist, "exact_concentration");
    const auto w = detail::nonzero_weights(q.x);
    const bool fits = detail::enumeration_fits(q.dist.atoms().size(), w.size(), opt.max_enumeration);

    ConcentrationEstimate est;
    bool enumerate = fits;
    if (opt.path == ExactOptions::Path::enumerate) {
        if (!fits) throw config_error("exact_concentration: instance too large to enumerate");
        enumerate = true;
    } else if (opt.path == ExactOptions::Path::convolve) {
        enumerate = false;
    }

    if (enumerate) {
        est.method = Method::exact;
        est.value = std::min(1.0, detail::enumerate_window(w, q.dist.atoms(), q.v, q.t));
        est.metadata["terms"] = static_cast<double>(w.size());
        return est;
    }

    const double h = opt.h > 0.0 ? opt.h : q.t / 100.0;
    if (h > q.t / 100.0) throw config_error("exact_concentration: grid step must be at most t/100");
    const GridLaw g = grid_law(w, q.dist, h, opt.max_grid_cells);
    const double e = g.shift_error;
    est.method = Method::convolution;
    est.value = std::min(1.0, g.window(q.v, q.t));
    const double lower = std::max(0.0, std::min(est.value, g.window(q.v, q.t - e)) - summation_slack);
    const double upper = std::min(1.0, std::max(est.value, g.window(q.v, q.t + e, true)) + summation_slack);
    est.ci = Interval{lower, upper};
    est.metadata["h"] = h;
    est.metadata["cells"] = static_cast<double>(g.mass.size());
    est.metadata["shift_error"] = e;
    est.metadata["error_radius"] = std::max(est.value - lower, upper - est.value);
    return est;
}

/// Levy concentration function sup_v P(|S - v| < t); metadata "v_star" holds
/// a maximizing center.
inline ConcentrationEstimate levy_concentration(std::span<const double> x, const EntryDistribution& dist, double t,
                                                const ExactOptions& opt = {})
{
    SmallBallQuery q{std::vector<double>(x.begin(), x.end()), dist, 0.0, t};
    q.validate();
    detail::require_finite_support(dist, "levy_concentration");
    const auto w = detail::nonzero_weights(x);
    const bool fits = detail::enumeration_fits(dist.atoms().size(), w.size(), 1u << 20);
    ConcentrationEstimate est;
    if (fits && opt.path != ExactOptions::Path::convolve) {
        const auto law = enumerate_sum_law(w, dist);
        double best = 0.0, center = law.front().value, running = 0.0;
        std::size_t j = 0;
        for (std::size_t i = 0; i < law.size(); ++i) {
            if (j < i) {
                j = i;
                running = 0.0;
            }
            while (j < law.size() && law[j].value - law[i].value < 2.0 * t) running += law[j++].prob;
            if (running > best) {
                best = running;
                center = 0.5 * (law[i].value + law[j - 1].value);
            }
            running -= law[i].prob;
        }
        est.method = Method::exact;
        est.value = std::min(1.0, best);
        est.metadata["v_star"] = center;
        return est;
    }
    const double h = opt.h > 0.0 ? opt.h : t / 100.0;
    const GridLaw g = grid_law(w, dist, h, opt.max_grid_cells);
    const double e = g.shift_error;
    const auto [value, center] = g.best_run(2.0 * t);
    const double lower = std::max(0.0, std::min(value, g.best_run(2.0 * (t - e)).first) - summation_slack);
    const double upper = std::min(1.0, std::max(value, g.best_run(2.0 * (t + e), true).first) + summation_slack);
    est.method = Method::convolution;
    est.value = std::min(1.0, value);
    est.ci = Interval{lower, upper};
    est.metadata["v_star"] = center;
    est.metadata["h"] = h;
    est.metadata["shift_error"] = e;
    return est;
}

/// Monte Carlo estimate with a Clopper-Pearson 95% interval. Trials are run
/// in fixed blocks, block b drawing from derive_stream(seed, b), so the
/// result does not depend on `width`.
inline ConcentrationEstimate monte_carlo_concentration(const SmallBallQuery& q, std::size_t trials,
                                                       std::uint64_t seed, unsigned width = 1)
{
    q.validate();
    if (trials < 100) throw config_error("monte_carlo_concentration: need at least 100 trials");
    constexpr std::size_t block = 1u << 14;
    const std::size_t blocks = (trials + block - 1) / block;
    std::vector<std::uint64_t> hits(blocks, 0);
    parallel_for(blocks, width, [&](std::size_t b) {
        RngStream rng = derive_stream(seed, b);
        const std::size_t count = std::min(block, trials - b * block);
        std::uint64_t h = 0;
        for (std::size_t i = 0; i < count; ++i) {
            double s = 0.0;
            for (double w : q.x) s += w * q.dist.sample(rng);
            if (std::abs(s - q.v) < q.t) ++h;
        }
        hits[b] = h;
    });
    std::uint64_t total = 0;
    for (auto h : hits) total += h;
    ConcentrationEstimate est;
    est.method = Method::monte_carlo;
    est.value = static_cast<double>(total) / static_cast<double>(trials);
    est.ci = clopper_pearson(total, trials);
    est.metadata["trials"] = static_cast<double>(trials);
    est.metadata["hits"] = static_cast<double>(total);
    return est;
}

namespace detail {

/// Integral of f over [a, b], pre-split into `pieces` panels, each done by
/// adaptive Gauss-Kronrod. Returns (value, error estimate).
template <typename F>
std::pair<double, double> split_quadrature(F&& f, double a, double b, std::size_t pieces)
{
    double total = 0.0, err_total = 0.0;
    const double width = (b - a) / static_cast<double>(pieces);
    for (std::size_t i = 0; i < pieces; ++i) {
        const double lo = a + width * static_cast<double>(i);
        const double hi = i + 1 == pieces ? b : lo + width;
        double err = 0.0;
        total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, lo, hi, 12, 1e-12, &err);
        err_total += err;
    }
    return {total, err_total};
}

}  // namespace detail

/// Esseen-type bound c_E * int_{-pi/2}^{pi/2} prod_j |phi(x_j s / t)| ds with
/// c_E = 1. The raw integral is in metadata["integral"].
inline ConcentrationEstimate esseen_bound(const SmallBallQuery& q)
{
    q.validate();
    const double t = q.t;
    auto integrand = [&](double s) {
        double prod = 1.0;
        for (double w : q.x) {
            if (w == 0.0) continue;
            prod *= std::abs(q.dist.char_fn(w * s / t));
            if (prod == 0.0) break;
        }
        return prod;
    };
    double wmax = 0.0;
    for (double w : q.x) wmax = std::max(wmax, std::abs(w));
    // enough panels to resolve the fastest oscillation of the integrand
    const auto pieces = static_cast<std::size_t>(
        std::clamp(std::ceil(wmax / t) * 2.0, 1.0, 20000.0));
    const auto [half, err] = detail::split_quadrature(integrand, 0.0, std::numbers::pi / 2.0, pieces);

    ConcentrationEstimate est;
    est.method = Method::esseen_bound;
    est.value = 2.0 * half;
    est.metadata["integral"] = 2.0 * half;
    est.metadata["c_E"] = 1.0;
    est.metadata["quadrature_error"] = 2.0 * err;
    est.metadata["quadrature_converged"] = 2.0 * err <= 1e-8 ? 1.0 : 0.0;
    if (2.0 * err > 1e-8) est.notes.emplace_back("quadrature did not reach absolute tolerance 1e-8");
    return est;
}

namespace detail {

/// P(w (beta - beta') in [lo, hi]).
inline double symmetrized_window(const EntryDistribution& d, double w, double lo, double hi)
{
    if (w == 0.0) return lo <= 0.0 && 0.0 <= hi ? 1.0 : 0.0;
    const double aw = std::abs(w);
    switch (d.kind()) {
    case EntryDistribution::Kind::gaussian: {
        const double s = std::numbers::sqrt2 * aw;
        return normal_cdf(hi / s) - normal_cdf(lo / s);
    }
    case EntryDistribution::Kind::uniform_sym: {
        // beta - beta' is triangular on [-c, c], c = 2 sqrt 3
        const double c = 2.0 * std::numbers::sqrt3;
        auto cdf = [c](double u) {
            if (u <= -c) return 0.0;
            if (u >= c) return 1.0;
            if (u <= 0.0) return (u + c) * (u + c) / (2.0 * c * c);
            return 1.0 - (c - u) * (c - u) / (2.0 * c * c);
        };
        return cdf(hi / aw) - cdf(lo / aw);
    }
    default: break;
    }
    double p = 0.0;
    for (const auto& a : d.atoms())
        for (const auto& b : d.atoms()) {
            const double diff = w * (a.value - b.value);
            if (lo <= diff && diff <= hi) p += a.prob * b.prob;
        }
    return p;
}

}  // namespace detail

/// S_Delta(y) = sum_j P(xi_j - xi_j' in [y - pi Delta, y + pi Delta]) with
/// xi_j = x_j beta_j. Closed forms for the continuous laws.
inline double s_delta(std::span<const double> x, const EntryDistribution& dist, double delta, double y)
{
    if (!(delta > 0.0)) throw config_error("s_delta: delta must be positive");
    const double lo = y - std::numbers::pi * delta;
    const double hi = y + std::numbers::pi * delta;
    double s = 0.0;
    for (double w : x) s += detail::symmetrized_window(dist, w, lo, hi);
    return s;
}

/// Halasz integral bound (m^{5/2} Delta)^{-1} int_{3a/2}^{inf} S_Delta(y)^2 dy,
/// constant-free and without the exponentially small additive term.
inline ConcentrationEstimate halasz_integral_bound(std::span<const double> x, const EntryDistribution& dist,
                                                   double delta, double a)
{
    if (x.empty()) throw config_error("halasz_integral_bound: x must be nonempty");
    if (!(a > 0.0)) throw regime_error("halasz_integral_bound: requires a > 0");
    if (!(delta > 0.0)) throw regime_error("halasz_integral_bound: requires Delta > 0");
    if (!(delta < a / (2.0 * std::numbers::pi)))
        throw regime_error("halasz_integral_bound: requires Delta < a/(2 pi)");
    double wmax = 0.0;
    for (double w : x) {
        if (std::abs(w) < a) throw regime_error("halasz_integral_bound: requires |x_j| >= a for all j");
        wmax = std::max(wmax, std::abs(w));
    }

    const double pd = std::numbers::pi * delta;
    const double y0 = 1.5 * a;
    double integral = 0.0;
    double y_max = 0.0;
    if (dist.finite_support()) {
        y_max = 2.0 * wmax * dist.support_radius() + pd;
        std::vector<double> breaks{y0};
        for (double w : x)
            for (const auto& p : dist.atoms())
                for (const auto& q : dist.atoms()) {
                    const double d = w * (p.value - q.value);
                    for (double b : {d - pd, d + pd})
                        if (b > y0 && b < y_max) breaks.push_back(b);
                }
        breaks.push_back(y_max);
        std::sort(breaks.begin(), breaks.end());
        for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
            const double len = breaks[i + 1] - breaks[i];
            if (len <= 0.0) continue;
            const double s = s_delta(x, dist, delta, 0.5 * (breaks[i] + breaks[i + 1]));
            integral += s * s * len;
        }
    } else {
        const double radius = dist.kind() == EntryDistribution::Kind::gaussian ? 10.0 : dist.support_radius();
        y_max = 2.0 * wmax * radius + pd;
        if (y_max > y0) {
            auto f = [&](double y) {
                const double s = s_delta(x, dist, delta, y);
                return s * s;
            };
            const auto pieces = static_cast<std::size_t>(std::clamp(std::ceil((y_max - y0) / pd), 1.0, 4000.0));
            integral = detail::split_quadrature(f, y0, y_max, pieces).first;
        }
    }

    const auto m = static_cast<double>(x.size());
    ConcentrationEstimate est;
    est.method = Method::halasz_integral_bound;
    est.value = integral / (std::pow(m, 2.5) * delta);
    est.metadata["integral"] = integral;
    est.metadata["y_max"] = y_max;
    est.metadata["m"] = m;
    est.metadata["exponential_term_omitted"] = 1.0;
    est.notes.emplace_back("additive exponentially small term omitted");
    return est;
}

/// Halasz profile bound sum_k P_k(x, Delta)^2 / m^{5/2} (constant-free). The
/// scale a is min |x_j|; the spread ratio max/min is reported as "cbar".
inline ConcentrationEstimate halasz_profile_bound(std::span<const double> x, double delta)
{
    if (x.empty()) throw config_error("halasz_profile_bound: x must be nonempty");
    double a = std::abs(x[0]), amax = 0.0;
    for (double w : x) {
        a = std::min(a, std::abs(w));
        amax = std::max(amax, std::abs(w));
    }
    if (!(a > 0.0)) throw regime_error("halasz_profile_bound: requires a = min|x_j| > 0");
    if (!(delta > 0.0)) throw regime_error("halasz_profile_bound: requires Delta > 0");
    if (!(delta < a / (2.0 * std::numbers::pi)))
        throw regime_error("halasz_profile_bound: requires Delta < a/(2 pi) with a = min|x_j|");
    const auto prof = delta_profile(x, delta);
    const auto m = static_cast<double>(x.size());
    ConcentrationEstimate est;
    est.method = Method::halasz_profile_bound;
    est.value = static_cast<double>(prof.sum_of_squares()) / std::pow(m, 2.5);
    est.metadata["a"] = a;
    est.metadata["cbar"] = amax / a;
    est.metadata["m"] = m;
    est.metadata["profile_sum_of_squares"] = static_cast<double>(prof.sum_of_squares());
    return est;
}

/// Regime of the comparable-coordinates bound: r/sqrt(m) <= |x_j| <= R/sqrt(m)
/// and t >= c / sqrt(m).
struct BerryEsseenParams {
    double r = 0.5;
    double R = 2.0;
    double c = 0.5;
};

/// Sum of E|x_j beta_j|^3 over (sum x_j^2)^{3/2}.
inline double berry_esseen_error(std::span<const double> x, const EntryDistribution& dist)
{
    double s2 = 0.0, s3 = 0.0;
    for (double w : x) {
        s2 += w * w;
        s3 += std::abs(w) * w * w;
    }
    return dist.third_abs_moment() * s3 / std::pow(s2, 1.5);
}

/// Gaussian mass of the window plus twice the Berry-Esseen error with the
/// universal constant set to 1.
inline ConcentrationEstimate berry_esseen_bound(const SmallBallQuery& q, const BerryEsseenParams& p = {})
{
    q.validate();
    if (!(p.r > 0.0 && p.r < p.R)) throw config_error("berry_esseen_bound: need 0 < r < R");
    const auto m = static_cast<double>(q.x.size());
    const double sm = std::sqrt(m);
    constexpr double slack = 1e-12;
    for (double w : q.x) {
        const double aw = std::abs(w);
        if (aw < p.r / sm * (1.0 - slack)) throw regime_error("berry_esseen_bound: requires |x_j| >= r/sqrt(m)");
        if (aw > p.R / sm * (1.0 + slack)) throw regime_error("berry_esseen_bound: requires |x_j| <= R/sqrt(m)");
    }
    if (q.t < p.c / sm * (1.0 - slack)) throw regime_error("berry_esseen_bound: requires t >= c/sqrt(m)");

    double sigma = 0.0;
    for (double w : q.x) sigma += w * w;
    sigma = std::sqrt(sigma);
    const double gauss = normal_cdf((q.v + q.t) / sigma) - normal_cdf((q.v - q.t) / sigma);
    const double be = berry_esseen_error(q.x, q.dist);
    ConcentrationEstimate est;
    est.method = Method::berry_esseen_bound;
    est.value = gauss + 2.0 * be;
    est.metadata["gaussian_mass"] = gauss;
    est.metadata["berry_esseen_error"] = be;
    return est;
}

/// sup_tau |P(S < tau A) - Phi(tau)| for S = sum beta_j x_j, A = ||x||,
/// finite-support laws only.
inline double gaussian_cdf_distance(std::span<const double> x, const EntryDistribution& dist)
{
    const auto law = enumerate_sum_law(x, dist);
    double a = 0.0;
    for (double w : x) a += w * w;
    a = std::sqrt(a);
    double below = 0.0, worst = 0.0;
    for (const auto& atom : law) {
        const double phi = normal_cdf(atom.value / a);
        worst = std::max(worst, std::abs(below - phi));
        below += atom.prob;
        worst = std::max(worst, std::abs(std::min(below, 1.0) - phi));
    }
    return worst;
}

/// Default constant e * Cbar of the tensorization bound, with
/// Cbar = int_0^1 u e^{-u^2/2} du + int_1^inf u^2 e^{-u^2/2} du.
inline double default_tensorization_constant()
{
    const double first = 1.0 - std::exp(-0.5);
    const double second = std::exp(-0.5) + std::sqrt(2.0 * std::numbers::pi) * (1.0 - normal_cdf(1.0));
    return std::numbers::e * (first + second);
}

/// (C L Delta)^n.
inline double tensorization_bound(double L, double delta, std::size_t n,
                                  double constant = default_tensorization_constant())
{
    if (!(L > 0.0) || !(delta > 0.0)) throw config_error("tensorization_bound: L and Delta must be positive");
    return std::pow(constant * L * delta, static_cast<double>(n));
}

}  // namespace rmlab
