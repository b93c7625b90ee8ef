#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numbers>
#include <queue>
#include <span>
#include <vector>

#include "rmlab/errors.hpp"
#include "rmlab/parallel.hpp"
#include "rmlab/rng.hpp"
#include "rmlab/stats.hpp"

namespace rmlab {

/// Thresholds r < 1 < R of the peaked/spread partition of the sphere.
struct PartitionParams {
    double r = 0.25;
    double R = 40.0;

    void validate() const
    {
        if (!(r > 0.0 && r < 1.0)) throw config_error("PartitionParams: need 0 < r < 1");
        if (!(R > 1.0)) throw config_error("PartitionParams: need R > 1");
    }
};

/// Bin geometry shared by the profile classifier and the singular grid net.
struct ProfileContext {
    std::size_t n = 0;
    double delta = 0.0;
    long k0 = 0;        ///< largest integer with k0 * delta < r / (2 sqrt n)
    long k = 0;         ///< ceil((R - r/2) / (sqrt(n) delta))
    std::size_t m = 0;  ///< ceil(r^2 n / (2 R^2))
};

inline std::size_t min_spread_count(std::size_t n, const PartitionParams& p)
{
    return static_cast<std::size_t>(std::ceil(p.r * p.r * static_cast<double>(n) / (2.0 * p.R * p.R)));
}

inline ProfileContext make_context(std::size_t n, double delta, const PartitionParams& p)
{
    p.validate();
    if (n == 0) throw config_error("ProfileContext: n must be positive");
    if (!(delta > 0.0)) throw config_error("ProfileContext: delta must be positive");
    const double sn = std::sqrt(static_cast<double>(n));
    const double lower = p.r / (2.0 * sn);
    ProfileContext c;
    c.n = n;
    c.delta = delta;
    c.k0 = static_cast<long>(std::ceil(lower / delta)) - 1;
    while (static_cast<double>(c.k0) * delta >= lower) --c.k0;
    while (static_cast<double>(c.k0 + 1) * delta < lower) ++c.k0;
    c.k = static_cast<long>(std::ceil((p.R - p.r / 2.0) / (sn * delta)));
    c.m = min_spread_count(n, p);
    return c;
}

enum class SphereClass { peaked, spread };

inline const char* to_string(SphereClass c) noexcept { return c == SphereClass::peaked ? "V_P" : "V_S"; }

struct SphereClassification {
    SphereClass sphere_class = SphereClass::spread;
    std::vector<std::size_t> sigma_set;  ///< {i : |x_i| <= R / sqrt n}, 0-based
    double sigma_norm = 0.0;             ///< ||P_sigma x||
};

namespace detail {

inline void require_unit(std::span<const double> x)
{
    if (x.empty()) throw config_error("vector must be nonempty");
    double s = 0.0;
    for (double v : x) s += v * v;
    if (std::abs(std::sqrt(s) - 1.0) > 1e-9) throw config_error("vector must have unit Euclidean norm (1e-9)");
}

}  // namespace detail

/// V_P if the mass on coordinates of size at most R/sqrt(n) is below r.
inline SphereClassification classify_sphere(std::span<const double> x, const PartitionParams& p)
{
    p.validate();
    detail::require_unit(x);
    const double cut = p.R / std::sqrt(static_cast<double>(x.size()));
    SphereClassification out;
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (std::abs(x[i]) <= cut) {
            out.sigma_set.push_back(i);
            s += x[i] * x[i];
        }
    }
    out.sigma_norm = std::sqrt(s);
    out.sphere_class = out.sigma_norm < p.r ? SphereClass::peaked : SphereClass::spread;
    return out;
}

/// J(x) = {j : r/(2 sqrt n) <= |x_j| <= R/sqrt n} for x in V_S, 0-based.
/// |J(x)| >= m holds for every spread vector; a violation throws
/// consistency_error.
inline std::vector<std::size_t> j_set(std::span<const double> x, const PartitionParams& p)
{
    if (classify_sphere(x, p).sphere_class != SphereClass::spread)
        throw regime_error("j_set: x must lie in V_S (||P_sigma x|| >= r)");
    const double sn = std::sqrt(static_cast<double>(x.size()));
    const double lo = p.r / (2.0 * sn);
    const double hi = p.R / sn;
    std::vector<std::size_t> j;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (std::abs(x[i]) >= lo && std::abs(x[i]) <= hi) j.push_back(i);
    if (j.size() < min_spread_count(x.size(), p))
        throw consistency_error("j_set: |J(x)| < m for a vector in V_S");
    return j;
}

/// Histogram of |x_j| over the bins (k delta, (k+1) delta], k >= 1. Bin
/// edges are the floating products k * delta. Coordinates with |x_j| <= delta
/// are counted in `below` and not profiled.
struct DeltaProfile {
    double delta = 0.0;
    std::map<long, std::size_t> counts;
    std::size_t below = 0;

    std::size_t total() const noexcept
    {
        std::size_t s = 0;
        for (const auto& [bin, c] : counts) s += c;
        return s;
    }

    std::uint64_t sum_of_squares() const noexcept
    {
        std::uint64_t s = 0;
        for (const auto& [bin, c] : counts) s += static_cast<std::uint64_t>(c) * c;
        return s;
    }

    bool operator==(const DeltaProfile&) const = default;
};

/// Bin index k with k*delta < a <= (k+1)*delta, for a > 0.
inline long profile_bin(double a, double delta) noexcept
{
    long k = static_cast<long>(std::ceil(a / delta)) - 1;
    while (k > 0 && static_cast<double>(k) * delta >= a) --k;
    while (static_cast<double>(k + 1) * delta < a) ++k;
    return k;
}

inline DeltaProfile delta_profile(std::span<const double> x, double delta)
{
    if (!(delta > 0.0)) throw config_error("delta_profile: delta must be positive");
    DeltaProfile prof;
    prof.delta = delta;
    for (double v : x) {
        const double a = std::abs(v);
        const long k = a > 0.0 ? profile_bin(a, delta) : 0;
        if (k < 1)
            ++prof.below;
        else
            ++prof.counts[k];
    }
    return prof;
}

struct SubsetMinimum {
    std::uint64_t min_ssq = 0;
    std::vector<std::size_t> kept_per_bin;
};

/// Minimal sum of c_i^2 over integers 0 <= c_i <= occupancy_i with
/// sum c_i = keep. Greedy increments of the smallest admissible c_i are exact
/// for this separable convex objective; ties go to the lowest index.
inline SubsetMinimum min_half_subset_ssq(std::span<const std::size_t> occupancy, std::size_t keep)
{
    std::size_t total = 0;
    for (auto c : occupancy) total += c;
    if (keep > total) throw config_error("min_half_subset_ssq: keep exceeds total occupancy");

    SubsetMinimum out;
    out.kept_per_bin.assign(occupancy.size(), 0);
    using Entry = std::pair<std::size_t, std::size_t>;  // (current c_i, i)
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
    for (std::size_t i = 0; i < occupancy.size(); ++i)
        if (occupancy[i] > 0) heap.emplace(0, i);
    for (std::size_t step = 0; step < keep; ++step) {
        auto [c, i] = heap.top();
        heap.pop();
        out.min_ssq += 2 * c + 1;
        out.kept_per_bin[i] = c + 1;
        if (c + 1 < occupancy[i]) heap.emplace(c + 1, i);
    }
    return out;
}

enum class Verdict { regular, singular };

inline const char* to_string(Verdict v) noexcept { return v == Verdict::regular ? "regular" : "singular"; }

struct ProfileClassification {
    SphereClass sphere_class = SphereClass::spread;
    std::vector<std::size_t> sigma_set;
    std::vector<std::size_t> j_set;
    std::size_t m = 0;
    std::size_t keep = 0;             ///< ceil(m/2)
    DeltaProfile profile;             ///< Delta-profile of x restricted to J(x)
    std::uint64_t min_ssq = 0;
    double threshold = 0.0;           ///< Q m^{5/2} Delta
    Verdict verdict = Verdict::singular;
    bool halasz_regime = true;        ///< Delta <= r / (4 pi sqrt n)
};

/// Exact (Delta, Q)-regular/singular decision for x in V_S. Coordinates inside
/// one bin are interchangeable, so minimizing over bin-level counts with
/// |J| = ceil(m/2) decides the existential over subsets of J(x).
inline ProfileClassification classify_profile(std::span<const double> x, const PartitionParams& p, double delta,
                                              double q)
{
    if (!(q > 1.0)) throw config_error("classify_profile: Q must exceed 1");
    if (!(delta > 0.0)) throw config_error("classify_profile: delta must be positive");
    auto sphere = classify_sphere(x, p);
    if (sphere.sphere_class != SphereClass::spread)
        throw regime_error("classify_profile: x lies in V_P; profiles are defined on V_S only");

    ProfileClassification out;
    out.sphere_class = sphere.sphere_class;
    out.sigma_set = std::move(sphere.sigma_set);
    out.j_set = j_set(x, p);
    out.m = min_spread_count(x.size(), p);
    out.keep = (out.m + 1) / 2;
    out.halasz_regime = delta <= p.r / (4.0 * std::numbers::pi * std::sqrt(static_cast<double>(x.size())));

    std::vector<double> restricted;
    restricted.reserve(out.j_set.size());
    for (auto j : out.j_set) restricted.push_back(x[j]);
    out.profile = delta_profile(restricted, delta);

    // Sub-delta coordinates of J(x) (possible only for delta >= r/(2 sqrt n))
    // contribute nothing to the profile sum.
    const std::size_t free_coords = std::min(out.profile.below, out.keep);
    std::vector<std::size_t> occupancy;
    for (const auto& [bin, c] : out.profile.counts) occupancy.push_back(c);
    out.min_ssq = min_half_subset_ssq(occupancy, out.keep - free_coords).min_ssq;
    out.threshold = q * std::pow(static_cast<double>(out.m), 2.5) * delta;
    out.verdict = static_cast<double>(out.min_ssq) <= out.threshold ? Verdict::regular : Verdict::singular;
    return out;
}

/// Occupancy of l uniform draws over k bins.
struct AllocationInstance {
    std::size_t l = 0;
    std::size_t k = 0;
    std::vector<std::size_t> occupancy;
};

inline AllocationInstance sample_allocation(std::size_t l, std::size_t k, RngStream& rng)
{
    if (k < 1 || l < 1) throw config_error("sample_allocation: l and k must be positive");
    if (k > l) throw config_error("sample_allocation: need k <= l");
    AllocationInstance a{l, k, std::vector<std::size_t>(k, 0)};
    for (std::size_t i = 0; i < l; ++i) ++a.occupancy[rng.below(k)];
    return a;
}

/// C(eta) = eta^{-16}, the constant of the random-allocation inequality.
inline double allocation_constant(double eta) { return std::pow(eta, -16.0); }

/// min_half_subset_ssq(occupancy, ceil(l/2)) * k / l^2.
inline double allocation_statistic(const AllocationInstance& a)
{
    const auto keep = (a.l + 1) / 2;
    const double ssq = static_cast<double>(min_half_subset_ssq(a.occupancy, keep).min_ssq);
    return ssq * static_cast<double>(a.k) / (static_cast<double>(a.l) * static_cast<double>(a.l));
}

struct AllocationReport {
    std::vector<double> statistics;  ///< per trial, in trial order
    double p50 = 0.0;
    double p95 = 0.0;
    double p99 = 0.0;
    double fitted_constant = 0.0;    ///< max over trials
    std::size_t exceed_half_constant = 0;  ///< trials above C(1/2)
};

/// Trial i draws from derive_stream(master_seed, i).
inline AllocationReport allocation_concentration_experiment(std::size_t l, std::size_t k, std::size_t trials,
                                                            std::uint64_t master_seed, unsigned width = 1)
{
    if (trials < 1) throw config_error("allocation experiment: trials must be positive");
    if (k < 1 || k > l) throw config_error("allocation experiment: need 1 <= k <= l");
    AllocationReport rep;
    rep.statistics.resize(trials);
    parallel_for(trials, width, [&](std::size_t i) {
        RngStream rng = derive_stream(master_seed, i);
        rep.statistics[i] = allocation_statistic(sample_allocation(l, k, rng));
    });
    std::vector<double> sorted = rep.statistics;
    std::sort(sorted.begin(), sorted.end());
    rep.p50 = quantile_sorted(sorted, 0.50);
    rep.p95 = quantile_sorted(sorted, 0.95);
    rep.p99 = quantile_sorted(sorted, 0.99);
    rep.fitted_constant = sorted.back();
    const double c_half = allocation_constant(0.5);
    rep.exceed_half_constant =
        static_cast<std::size_t>(std::count_if(sorted.begin(), sorted.end(), [&](double s) { return s > c_half; }));
    return rep;
}

}  // namespace rmlab
