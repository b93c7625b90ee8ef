#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "rmlab/errors.hpp"
#include "rmlab/sphere_profile.hpp"

namespace rmlab {

enum class Body { euclidean_ball, cube };
enum class Metric { l2, linf };
enum class CoveringKind { volumetric_formula, vp_entropy_formula, singular_grid_formula, greedy_construction };

inline const char* to_string(Body b) noexcept { return b == Body::euclidean_ball ? "euclidean_ball" : "cube"; }
inline const char* to_string(Metric m) noexcept { return m == Metric::l2 ? "l2" : "linf"; }

inline const char* to_string(CoveringKind k) noexcept
{
    switch (k) {
    case CoveringKind::volumetric_formula: return "volumetric_formula";
    case CoveringKind::vp_entropy_formula: return "vp_entropy_formula";
    case CoveringKind::singular_grid_formula: return "singular_grid_formula";
    case CoveringKind::greedy_construction: return "greedy_construction";
    }
    return "?";
}

inline Body parse_body(const std::string& s)
{
    if (s == "euclidean_ball" || s == "ball") return Body::euclidean_ball;
    if (s == "cube") return Body::cube;
    throw config_error("unknown body '" + s + "'");
}

using Point = std::vector<double>;

/// Natural-log covering number estimate with an echo of its inputs.
struct CoveringEstimate {
    double log_count = 0.0;
    CoveringKind kind = CoveringKind::volumetric_formula;
    std::map<std::string, double> params;
    std::vector<Point> net;  ///< realized net, greedy constructions only
};

/// log of the volume of the unit Euclidean ball or of the cube [-1, 1]^n.
inline double log_volume(Body b, std::size_t n)
{
    const auto dn = static_cast<double>(n);
    if (b == Body::cube) return dn * std::numbers::ln2;
    return 0.5 * dn * std::log(std::numbers::pi) - std::lgamma(0.5 * dn + 1.0);
}

/// log(3^n |K| / |tD|), valid when tD is contained in K.
inline CoveringEstimate volumetric_bound(std::size_t n, Body k, Body d, double t)
{
    if (n == 0) throw config_error("volumetric_bound: n must be positive");
    if (!(t > 0.0)) throw config_error("volumetric_bound: t must be positive");
    const auto dn = static_cast<double>(n);
    // tD fits in K iff t <= 1, except a cube in a ball needs t sqrt(n) <= 1
    const double reach = k == Body::euclidean_ball && d == Body::cube ? std::sqrt(dn) : 1.0;
    if (t * reach > 1.0 + 1e-12) throw regime_error("volumetric_bound: requires tD contained in K");
    CoveringEstimate est;
    est.kind = CoveringKind::volumetric_formula;
    est.log_count = dn * std::log(3.0) + log_volume(k, n) - dn * std::log(t) - log_volume(d, n);
    est.params = {{"n", dn}, {"t", t}, {"K", static_cast<double>(k)}, {"D", static_cast<double>(d)}};
    return est;
}

/// (n/R) log(3R/r): entropy of the peaked part of the sphere at scale 2r.
inline CoveringEstimate vp_entropy_bound(std::size_t n, double r, double R)
{
    if (!(r > 0.0)) throw config_error("vp_entropy_bound: r must be positive");
    if (!(r < 0.5)) throw regime_error("vp_entropy_bound: requires r < 1/2");
    if (!(R > 1.0)) throw regime_error("vp_entropy_bound: requires R > 1");
    const auto dn = static_cast<double>(n);
    CoveringEstimate est;
    est.kind = CoveringKind::vp_entropy_formula;
    est.log_count = dn / R * std::log(3.0 * R / r);
    est.params = {{"n", dn}, {"r", r}, {"R", R}, {"scale", 2.0 * r}};
    return est;
}

/// Interval-center grid M_J over the coordinates J: every coordinate takes a
/// value +-d_i, d_i the center of (i Delta, (i+1) Delta].
struct SingularGrid {
    ProfileContext context;
    std::vector<std::size_t> coords;   ///< J
    std::vector<double> centers;       ///< d_i for the intervals meeting [r/(2 sqrt n), R/sqrt n]
    long first_bin = 0;                ///< i of centers[0]
    double log_count = 0.0;            ///< l log(2k), k from the context
    double realized_log_count = 0.0;   ///< l log(2 |centers|)
    double c_exponent = 0.0;           ///< m/n = r^2/(2R^2)

    /// Index (into `centers`) of the grid value for one coordinate value.
    std::size_t center_index(double y) const noexcept
    {
        const long bin = profile_bin(std::abs(y), context.delta);
        const long idx = std::clamp(bin - first_bin, 0L, static_cast<long>(centers.size()) - 1);
        return static_cast<std::size_t>(idx);
    }

    /// Nearest grid point to y restricted to J (sign and center per coordinate).
    Point snap(std::span<const double> y) const
    {
        Point out;
        out.reserve(coords.size());
        for (auto j : coords) {
            const double d = centers[center_index(y[j])];
            out.push_back(y[j] < 0.0 ? -d : d);
        }
        return out;
    }
};

inline SingularGrid singular_grid_net(std::size_t n, double delta, double r, double R,
                                      std::vector<std::size_t> coords)
{
    const PartitionParams p{r, R};
    p.validate();
    const auto dn = static_cast<double>(n);
    const double lo = 2.0 * R * R * R / (r * r) * std::pow(dn, -1.5);
    if (!(delta >= lo && delta <= 1.0 / std::sqrt(dn)))
        throw regime_error("singular_grid_net: requires (2R^3/r^2) n^{-3/2} <= Delta <= n^{-1/2}");
    std::sort(coords.begin(), coords.end());
    coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
    if (!coords.empty() && coords.back() >= n) throw config_error("singular_grid_net: coordinate index out of range");

    SingularGrid g;
    g.context = make_context(n, delta, p);
    if (coords.size() < g.context.m) throw regime_error("singular_grid_net: requires |J| >= m");
    g.coords = std::move(coords);
    g.first_bin = g.context.k0;
    const double top = R / std::sqrt(dn);
    for (long i = g.context.k0; i <= g.context.k0 + g.context.k; ++i) {
        if (static_cast<double>(i) * delta >= top) break;
        g.centers.push_back((static_cast<double>(i) + 0.5) * delta);
    }
    const auto l = static_cast<double>(g.coords.size());
    g.log_count = l * std::log(2.0 * static_cast<double>(g.context.k));
    g.realized_log_count = l * std::log(2.0 * static_cast<double>(g.centers.size()));
    g.c_exponent = r * r / (2.0 * R * R);
    return g;
}

struct GridOccupancy {
    std::size_t samples = 0;
    std::size_t occupied = 0;      ///< distinct grid points hit
    double log_fraction = 0.0;     ///< log(occupied) - realized_log_count
};

/// Snaps each sample to M_J and counts the distinct grid points used.
inline GridOccupancy grid_occupancy(const SingularGrid& g, std::span<const Point> samples)
{
    std::set<std::vector<long>> seen;
    for (const auto& y : samples) {
        std::vector<long> key;
        key.reserve(g.coords.size());
        for (auto j : g.coords) {
            const auto idx = static_cast<long>(g.center_index(y[j]));
            key.push_back(y[j] < 0.0 ? -idx - 1 : idx);
        }
        seen.insert(std::move(key));
    }
    GridOccupancy occ;
    occ.samples = samples.size();
    occ.occupied = seen.size();
    occ.log_fraction = seen.empty() ? -g.realized_log_count
                                    : std::log(static_cast<double>(seen.size())) - g.realized_log_count;
    return occ;
}

inline double metric_distance(std::span<const double> a, std::span<const double> b, Metric m)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = std::abs(a[i] - b[i]);
        s = m == Metric::l2 ? s + d * d : std::max(s, d);
    }
    return m == Metric::l2 ? std::sqrt(s) : s;
}

/// Farthest-point greedy eps-net drawn from the input points. Net points are
/// pairwise more than eps apart; every input lies within eps of the net.
inline CoveringEstimate greedy_net(std::span<const Point> points, Metric metric, double eps)
{
    if (points.empty()) throw config_error("greedy_net: points must be nonempty");
    if (!(eps > 0.0)) throw config_error("greedy_net: eps must be positive");
    const std::size_t dim = points.front().size();
    for (const auto& p : points)
        if (p.size() != dim) throw config_error("greedy_net: points must share one dimension");

    CoveringEstimate est;
    est.kind = CoveringKind::greedy_construction;
    std::vector<double> nearest(points.size(), std::numeric_limits<double>::infinity());
    std::size_t next = 0;
    for (;;) {
        const std::size_t center = next;
        est.net.push_back(points[center]);
        double far = -1.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            nearest[i] = std::min(nearest[i], metric_distance(points[i], points[center], metric));
            if (nearest[i] > far) {
                far = nearest[i];
                next = i;
            }
        }
        if (far <= eps) break;
    }
    const double covered = *std::max_element(nearest.begin(), nearest.end());
    if (covered > eps) throw consistency_error("greedy_net: construction left a point uncovered");
    est.log_count = std::log(static_cast<double>(est.net.size()));
    est.params = {{"n", static_cast<double>(dim)}, {"eps", eps}, {"points", static_cast<double>(points.size())},
                  {"net_size", static_cast<double>(est.net.size())}, {"covering_radius", covered}};
    return est;
}

}  // namespace rmlab
