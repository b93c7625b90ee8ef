#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "rmlab/errors.hpp"
#include "rmlab/parallel.hpp"
#include "rmlab/rng.hpp"
#include "rmlab/small_ball.hpp"
#include "rmlab/sphere_profile.hpp"

namespace rmlab {

enum class BoundKind { esseen, halasz_profile, halasz_integral, berry_esseen, regular_profile };

inline constexpr std::array<BoundKind, 5> all_bound_kinds{BoundKind::esseen, BoundKind::halasz_profile,
                                                          BoundKind::halasz_integral, BoundKind::berry_esseen,
                                                          BoundKind::regular_profile};

inline const char* to_string(BoundKind b) noexcept
{
    switch (b) {
    case BoundKind::esseen: return "esseen";
    case BoundKind::halasz_profile: return "halasz_profile";
    case BoundKind::halasz_integral: return "halasz_integral";
    case BoundKind::berry_esseen: return "berry_esseen";
    case BoundKind::regular_profile: return "regular_profile";
    }
    return "?";
}

/// Multiplier applied to the largest observed ratio when freezing a constant.
inline constexpr double calibration_headroom = 1.25;

/// Setting of the regular-profile small-ball curve.
struct RegularSetting {
    std::size_t n = 64;
    PartitionParams partition{0.6, 1.5};
    double q = 20.0;
    std::size_t t_points = 8;
    double h_factor = 100.0;

    /// Half the largest admissible Delta, r / (8 pi sqrt n).
    double delta() const { return partition.r / (8.0 * std::numbers::pi * std::sqrt(static_cast<double>(n))); }
};

/// A uniformly random unit vector of dimension n.
inline std::vector<double> random_direction(std::size_t n, RngStream& rng)
{
    std::vector<double> x(n);
    double s = 0.0;
    for (double& v : x) {
        v = rng.normal();
        s += v * v;
    }
    s = std::sqrt(s);
    for (double& v : x) v /= s;
    return x;
}

/// sup_v P(|sum beta_j x_j - v| < i * delta) for i = 1..points. Finite laws
/// use one grid of step delta / h_factor; continuous symmetric laws are
/// unimodal, so the supremum sits at v = 0 and is estimated by Monte Carlo.
inline std::vector<double> concentration_curve(std::span<const double> x, const EntryDistribution& dist, double delta,
                                               std::size_t points, double h_factor, RngStream& rng,
                                               std::size_t mc_trials = 20000)
{
    std::vector<double> out(points);
    if (dist.finite_support()) {
        const GridLaw g = grid_law(x, dist, delta / h_factor, std::size_t{1} << 26);
        for (std::size_t i = 0; i < points; ++i)
            out[i] = std::min(1.0, g.best_run(2.0 * delta * static_cast<double>(i + 1)).first);
        return out;
    }
    std::vector<double> sums(mc_trials);
    for (double& s : sums) {
        s = 0.0;
        for (double w : x) s += w * dist.sample(rng);
        s = std::abs(s);
    }
    for (std::size_t i = 0; i < points; ++i) {
        const double t = delta * static_cast<double>(i + 1);
        const auto hits = std::count_if(sums.begin(), sums.end(), [t](double s) { return s < t; });
        out[i] = static_cast<double>(hits) / static_cast<double>(mc_trials);
    }
    return out;
}

/// Regularity level of a spread vector: min_ssq / (m^{5/2} Delta), floored at 1.
inline double effective_q(const ProfileClassification& c, double delta)
{
    return std::max(1.0, static_cast<double>(c.min_ssq) / (std::pow(static_cast<double>(c.m), 2.5) * delta));
}

/// One in-regime query: the exact concentration, the constant-free bound and
/// their ratio.
struct CalibrationSample {
    BoundKind kind = BoundKind::esseen;
    std::size_t m = 0;
    double exact = 0.0;
    double bound = 0.0;

    double ratio() const noexcept { return exact / bound; }
};

namespace detail {

/// Symmetric laws only: the fitted constants depend on the law through
/// P(beta > c) >= c', so each corpus keeps that pair fixed.
inline const EntryDistribution& calibration_law(std::size_t i)
{
    static const EntryDistribution laws[] = {
        EntryDistribution::rademacher(),
        EntryDistribution::parse("discrete:-1.5:0.2222222222222222,0:0.5555555555555556,1.5:0.2222222222222222"),
    };
    return laws[i % 2];
}

/// Weights in [a, cbar a] with random signs from one of four families:
/// spread, near-equal within a few bins, equal, and near-equal pairs split
/// across a bin edge (distinct bins, nearly cancelling sums).
inline std::vector<double> comparable_weights(std::size_t m, double a, double cbar, double delta, RngStream& rng)
{
    std::vector<double> x(m);
    const auto family = rng.below(4);
    const double base = a * (1.0 + (cbar - 1.0) * rng.uniform());
    for (std::size_t j = 0; j < m; ++j) {
        double mag = base;
        if (family == 0) mag = a * (1.0 + (cbar - 1.0) * rng.uniform());
        if (family == 1) mag = std::clamp(base + 3.0 * delta * rng.uniform(), a, cbar * a);
        if (family == 3 && delta > 0.0) {
            const double lo = std::ceil(a / delta + 1.0), hi = std::floor(cbar * a / delta - 1.0);
            if (j % 2 == 1) {
                mag = std::abs(x[j - 1]) + 0.1 * delta * rng.uniform();
            } else if (hi >= lo) {
                const double edge = (lo + std::floor((hi - lo + 1.0) * rng.uniform())) * delta;
                mag = edge - 0.05 * delta * rng.uniform();
            }
        }
        x[j] = rng.uniform() < 0.5 ? -mag : mag;
    }
    return x;
}

}  // namespace detail

/// Draws one query inside the regime of `kind` and evaluates it.
inline CalibrationSample calibration_sample(BoundKind kind, RngStream& rng, const RegularSetting& reg = {})
{
    CalibrationSample s;
    s.kind = kind;
    const auto& law = detail::calibration_law(rng.below(2));
    const std::size_t m = 1 + rng.below(10);
    s.m = m;
    switch (kind) {
    case BoundKind::esseen: {
        std::vector<double> x(m);
        double norm = 0.0;
        for (double& w : x) {
            w = rng.normal();
            norm += w * w;
        }
        const double t = std::sqrt(norm) * std::pow(10.0, -2.0 * rng.uniform());
        s.exact = levy_concentration(x, law, t).value;
        s.bound = esseen_bound({x, law, 0.0, t}).value;
        break;
    }
    case BoundKind::halasz_profile:
    case BoundKind::halasz_integral: {
        const double a = 1.0;
        const double delta = a / (2.0 * std::numbers::pi) * (0.1 + 0.85 * rng.uniform());
        const double cbar = 1.2 + 1.8 * rng.uniform();
        const auto x = detail::comparable_weights(m, a, cbar, delta, rng);
        s.exact = levy_concentration(x, law, delta).value;
        s.bound = kind == BoundKind::halasz_profile ? halasz_profile_bound(x, delta).value
                                                    : halasz_integral_bound(x, law, delta, a).value;
        break;
    }
    case BoundKind::berry_esseen: {
        const BerryEsseenParams p;
        const double sm = std::sqrt(static_cast<double>(m));
        const auto x = detail::comparable_weights(m, p.r / sm, p.R / p.r, 0.0, rng);
        const double t = p.c / sm * (1.0 + 5.0 * rng.uniform());
        const auto levy = levy_concentration(x, law, t);
        s.exact = levy.value;
        s.bound = berry_esseen_bound({x, law, levy.metadata.at("v_star"), t}, p).value;
        break;
    }
    case BoundKind::regular_profile: {
        const double delta = reg.delta();
        s.m = min_spread_count(reg.n, reg.partition);
        for (std::size_t attempt = 0;; ++attempt) {
            if (attempt == 10000) throw regime_error("calibration: no regular vector in 10000 draws");
            auto x = random_direction(reg.n, rng);
            if (classify_sphere(x, reg.partition).sphere_class != SphereClass::spread) continue;
            const auto c = classify_profile(x, reg.partition, delta, reg.q);
            if (c.verdict != Verdict::regular) continue;
            const double q_eff = effective_q(c, delta);
            const auto curve =
                concentration_curve(x, EntryDistribution::rademacher(), delta, reg.t_points, reg.h_factor, rng);
            double worst = 0.0;
            for (std::size_t i = 0; i < curve.size(); ++i)
                worst = std::max(worst, curve[i] / (q_eff * delta * static_cast<double>(i + 1)));
            s.exact = worst;
            s.bound = 1.0;
            break;
        }
        break;
    }
    }
    return s;
}

/// Corpus of `per_bound` queries of one kind; query i draws from
/// derive_stream(derive_seed(seed, kind), i).
inline std::vector<CalibrationSample> calibration_corpus(BoundKind kind, std::size_t per_bound, std::uint64_t seed,
                                                         unsigned width = 1)
{
    std::vector<CalibrationSample> out(per_bound);
    const auto stream_seed = derive_seed(seed, static_cast<std::uint64_t>(kind));
    parallel_for(per_bound, width, [&](std::size_t i) {
        RngStream rng = derive_stream(stream_seed, i);
        out[i] = calibration_sample(kind, rng);
    });
    return out;
}

inline double max_ratio(const std::vector<CalibrationSample>& corpus)
{
    double worst = 0.0;
    for (const auto& s : corpus) worst = std::max(worst, s.ratio());
    return worst;
}

/// Corpus sizes: the fit draws from 1000 queries per bound, the frozen
/// check from 200 fresh ones.
inline constexpr std::size_t calibration_size = 1000;
inline constexpr std::size_t validation_size = 200;

/// headroom * max ratio for every bound kind.
inline std::map<std::string, double> fit_constants(std::uint64_t seed, std::size_t per_bound = calibration_size,
                                                   unsigned width = 1)
{
    std::map<std::string, double> out;
    for (auto kind : all_bound_kinds)
        out[to_string(kind)] = calibration_headroom * max_ratio(calibration_corpus(kind, per_bound, seed, width));
    return out;
}

/// Number of queries with exact <= constant * bound.
inline std::size_t dominated_count(const std::vector<CalibrationSample>& corpus, double constant)
{
    return static_cast<std::size_t>(std::count_if(corpus.begin(), corpus.end(),
                                                  [&](const auto& s) { return s.exact <= constant * s.bound; }));
}

}  // namespace rmlab
