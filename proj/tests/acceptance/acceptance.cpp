// Acceptance suite: one PASS/FAIL line per criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "rmlab/calibration.hpp"
#include "rmlab/experiments.hpp"
#include "rmlab/fitted_constants.hpp"
#include "rmlab/matrices.hpp"
#include "rmlab/nets.hpp"
#include "rmlab/small_ball.hpp"
#include "rmlab/sphere_profile.hpp"

using namespace rmlab;

namespace {

// Pinned tolerances and sizes.
constexpr double spectral_rel_tol = 1e-8;
constexpr double summation_tol = 1e-12;
constexpr double e1_eps = 0.1;
constexpr double e1_median_lo = 0.2, e1_median_hi = 3.0;
constexpr double e2_max_frequency = 0.01;
constexpr double e2b_max_frequency = 0.01;
constexpr double reseed_band = 0.20;
constexpr double e3_min_r_squared = 0.9;
constexpr double e4_max_p99 = 4.0;
constexpr unsigned parallel_width = 4;

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what)
    {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + std::string("failed: ") + what;
        }
    }
    void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

std::string fmt(double v, int digits = 4)
{
    std::ostringstream os;
    os.precision(digits);
    os << v;
    return os.str();
}

/// Every experiment run by the suite, kept for the determinism check.
std::vector<std::pair<ExperimentConfig, std::string>> suite_runs;

std::string csv_of(const ExperimentResult& r)
{
    std::ostringstream os;
    write_csv(r, os);
    return os.str();
}

ExperimentResult run_recorded(ExperimentConfig cfg)
{
    cfg.threads = parallel_width;
    auto r = run(cfg);
    suite_runs.emplace_back(cfg, csv_of(r));
    return r;
}

ExperimentConfig make_config(Experiment e, const std::string& dist, std::vector<std::size_t> ns, std::size_t trials,
                             std::uint64_t seed, std::map<std::string, std::string> params = {})
{
    ExperimentConfig cfg;
    cfg.experiment = e;
    cfg.dist = EntryDistribution::parse(dist);
    cfg.n_list = std::move(ns);
    cfg.trials = trials;
    cfg.master_seed = seed;
    cfg.params = std::move(params);
    return cfg;
}

// 1 ---------------------------------------------------------------------------

Outcome oracle_equivalence()
{
    Outcome o;
    RngStream rng(8);
    std::size_t subsets = 0;
    bool subsets_ok = true;
    while (subsets < 2000) {
        std::vector<std::size_t> occ(1 + rng.below(6));
        std::size_t total = 0;
        for (auto& c : occ) total += c = rng.below(5);
        if (total > 12) continue;
        const std::size_t keep = rng.below(total + 1);
        subsets_ok &= min_half_subset_ssq(occ, keep).min_ssq == oracle::brute_min_ssq(occ, keep);
        ++subsets;
    }
    o.require(subsets_ok, "min_half_subset_ssq vs exhaustive");
    o.note(std::to_string(subsets) + " subset instances");

    const auto three_point =
        EntryDistribution::parse("discrete:-1.5:0.2222222222222222,0:0.5555555555555556,1.5:0.2222222222222222");
    const auto skewed = EntryDistribution::parse("discrete:-2:0.2,0.5:0.8");
    ExactOptions enumerate, convolve;
    enumerate.path = ExactOptions::Path::enumerate;
    convolve.path = ExactOptions::Path::convolve;
    bool conv_ok = true;
    for (int i = 0; i < 200; ++i) {
        const auto& law = i % 3 == 0 ? EntryDistribution::rademacher() : (i % 3 == 1 ? three_point : skewed);
        std::vector<double> x(1 + rng.below(9));
        for (double& w : x) w = rng.normal();
        const SmallBallQuery q{x, law, rng.normal(), 0.05 + rng.uniform()};
        const auto e = exact_concentration(q, enumerate);
        const auto c = exact_concentration(q, convolve);
        conv_ok &= c.ci && c.ci->contains(e.value) &&
                   std::abs(c.value - e.value) <= c.metadata.at("error_radius") + summation_tol;
    }
    o.require(conv_ok, "enumeration vs convolution");

    const PowerOptions tight{1e-14, 1'000'000};
    bool spectral_ok = true;
    for (int i = 0; i < 100; ++i) {
        const std::size_t n = 1 + static_cast<std::size_t>(i) % 6;
        const auto dist = i % 2 ? EntryDistribution::gaussian() : EntryDistribution::rademacher();
        const auto s = sample_matrix(dist, n, 7000 + static_cast<std::uint64_t>(i));
        oracle::Dense d(n, std::vector<double>(n));
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = 0; b < n; ++b) d[a][b] = s.entries(a, b);
        const auto sv = oracle::singular_values(d);
        spectral_ok &= std::abs(operator_norm(s, tight).value - sv.back()) <= spectral_rel_tol * std::max(1.0, sv.back());
        const auto low = smallest_singular_value(s, std::nullopt, tight);
        const double expect = low.singular ? 0.0 : sv.front();
        spectral_ok &= std::abs(low.sigma_min - expect) <= spectral_rel_tol * std::max(1.0, sv.back());
    }
    o.require(spectral_ok, "spectral ops vs Jacobi");
    return o;
}

// 2 ---------------------------------------------------------------------------

Outcome sigma_min_tail()
{
    Outcome o;
    double worst_hi = 0.0, med_lo = 1e300, med_hi = 0.0, events = 0.0;
    for (const char* dist : {"rademacher", "gaussian"}) {
        const auto r = run_recorded(make_config(Experiment::e1_sigma_min_tail, dist, {50, 100, 200, 400}, 200, 11,
                                                {{"eps", "0.1"}, {"c", "1"}}));
        for (const auto& g : r.summary) {
            const auto& s = g.stats;
            const double med = s.at("sigma_min_sqrt_n_p50");
            worst_hi = std::max(worst_hi, s.at("event_ci_hi"));
            med_lo = std::min(med_lo, med);
            med_hi = std::max(med_hi, med);
            events += s.at("event_count");
            o.require(s.at("event_ci_hi") <= e1_eps, std::string(dist) + " n=" + std::to_string(g.n) + " ci_hi");
            o.require(med >= e1_median_lo && med <= e1_median_hi,
                      std::string(dist) + " n=" + std::to_string(g.n) + " median " + fmt(med));
        }
    }
    o.note("events " + fmt(events) + "/1600, max ci_hi " + fmt(worst_hi) + ", median sigma_min*sqrt(n) in [" +
           fmt(med_lo) + ", " + fmt(med_hi) + "]");
    return o;
}

// 3 ---------------------------------------------------------------------------

Outcome op_norm()
{
    Outcome o;
    for (const char* dist : {"gaussian", "rademacher"}) {
        const auto r = run_recorded(make_config(Experiment::e2_op_norm, dist, {200}, 500, 12, {{"threshold", "2.5"}}));
        const auto& s = r.summary.at(0).stats;
        o.require(s.at("event_frequency") <= e2_max_frequency, std::string(dist) + " frequency");
        o.note(std::string(dist) + " freq " + fmt(s.at("event_frequency")) + ", median ||A||/sqrt(n) " +
               fmt(s.at("scaled_p50")));
    }
    return o;
}

// 4 ---------------------------------------------------------------------------

Outcome peaked_direction()
{
    Outcome o;
    for (const char* dist : {"rademacher", "gaussian"}) {
        const auto r = run_recorded(
            make_config(Experiment::e2b_peaked, dist, {100, 200}, 2000, 13, {{"eta", "0.3"}, {"spikes", "2"}}));
        const auto& s100 = r.summary.at(0).stats;
        const auto& s200 = r.summary.at(1).stats;
        o.require(s100.at("event_frequency") < e2b_max_frequency, std::string(dist) + " n=100 frequency");
        o.require(s200.at("event_frequency") <= s100.at("event_ci_hi"), std::string(dist) + " n=200 increase");
        o.note(std::string(dist) + " freq " + fmt(s100.at("event_frequency")) + " -> " +
               fmt(s200.at("event_frequency")) + " (n=100 ci_hi " + fmt(s100.at("event_ci_hi")) + ")");
    }
    return o;
}

// 5 ---------------------------------------------------------------------------

Outcome bound_domination()
{
    Outcome o;
    const std::uint64_t validation_seed = fitted::calibration_seed + 1;
    const auto r = run_recorded(
        make_config(Experiment::e6_bound_calibration, "rademacher", {1}, validation_size, validation_seed));
    const auto& s = r.summary.at(0).stats;
    const BoundKind checked[] = {BoundKind::esseen, BoundKind::halasz_profile, BoundKind::halasz_integral,
                                 BoundKind::berry_esseen};
    for (auto kind : checked) {
        const std::string name = to_string(kind);
        const double dominated = s.at(name + "_dominated_by_frozen");
        o.require(dominated == static_cast<double>(validation_size), name + " domination " + fmt(dominated));
    }
    std::string spread;
    for (std::uint64_t reseed : {1ULL, 2ULL, 3ULL}) {
        for (auto kind : checked) {
            const double refit = calibration_headroom * max_ratio(calibration_corpus(kind, calibration_size, reseed,
                                                                                     parallel_width));
            const double rel = refit / detail::frozen_constant(kind) - 1.0;
            o.require(std::abs(rel) <= reseed_band,
                      std::string(to_string(kind)) + " reseed " + std::to_string(reseed) + " off by " + fmt(rel));
            if (reseed == 1) spread += std::string(spread.empty() ? "" : ", ") + to_string(kind) + " " + fmt(refit);
        }
    }
    o.note("200/200 dominated per bound; reseed-1 fits: " + spread);
    return o;
}

// 6 ---------------------------------------------------------------------------

Outcome regular_linear_decay()
{
    Outcome o;
    const auto r = run_recorded(make_config(Experiment::e3_regular_smallball, "rademacher", {64}, 20, 14));
    const auto& s = r.summary.at(0).stats;
    o.require(s.at("monotone_count") == 20.0, "slope >= 0 on every curve");
    o.require(s.at("min_slope") >= 0.0, "fitted slope >= 0");
    o.require(s.at("min_r_squared") >= e3_min_r_squared, "R^2 " + fmt(s.at("min_r_squared")));

    const double q = r.config.param("q", 20.0);
    const auto points = r.config.count_param("t_points", 8);
    const auto di = r.column("delta");
    double worst = 0.0;
    for (const auto& row : r.rows) {
        const double delta = cell_number(row[di]);
        for (std::size_t i = 0; i < points; ++i) {
            const double t = delta * static_cast<double>(i + 1);
            worst = std::max(worst, cell_number(row[r.column("q_t" + std::to_string(i + 1))]) / (q * t));
        }
    }
    o.require(worst <= fitted::regular_profile, "Q(t) <= C Q t");
    o.require(s.at("dominated_count") == 20.0, "Q(t) <= C q_eff t");
    o.note("min R^2 " + fmt(s.at("min_r_squared"), 6) + ", max Q(t)/(Q t) " + fmt(worst) + " vs C " +
           fmt(fitted::regular_profile));
    return o;
}

// 7 ---------------------------------------------------------------------------

Outcome allocation()
{
    Outcome o;
    const auto r =
        run_recorded(make_config(Experiment::e4_allocation, "rademacher", {1000}, 1000, 15, {{"k", "1000"}}));
    const auto& s = r.summary.at(0).stats;
    o.require(s.at("statistic_p99") <= e4_max_p99, "p99 " + fmt(s.at("statistic_p99")));
    o.require(s.at("event_count") == 0.0, "exceedances of C(0.5)");
    o.note("p99 " + fmt(s.at("statistic_p99")) + ", max " + fmt(s.at("statistic_max")) + ", C(0.5) = " +
           fmt(s.at("constant"), 8));
    return o;
}

// 8 ---------------------------------------------------------------------------

Point uniform_in(Body b, std::size_t n, RngStream& rng)
{
    Point p(n);
    if (b == Body::cube) {
        for (double& v : p) v = 2.0 * rng.uniform() - 1.0;
        return p;
    }
    double s = 0.0;
    for (double& v : p) {
        v = rng.normal();
        s += v * v;
    }
    const double radius = std::pow(rng.uniform(), 1.0 / static_cast<double>(n)) / std::sqrt(s);
    for (double& v : p) v *= radius;
    return p;
}

/// A unit vector with a few large coordinates and an l2 tail of size < r.
Point peaked_point(std::size_t n, const PartitionParams& p, RngStream& rng)
{
    const auto cap = std::max<std::size_t>(1, static_cast<std::size_t>(static_cast<double>(n) / (p.R * p.R)));
    for (;;) {
        Point x(n, 0.0);
        const auto big = 1 + rng.below(cap);
        const double tail = 0.95 * p.r * rng.uniform();
        double head = 0.0, rest = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = rng.normal();
            (i < big ? head : rest) += x[i] * x[i];
        }
        for (std::size_t i = 0; i < n; ++i)
            x[i] *= i < big ? std::sqrt(1.0 - tail * tail) / std::sqrt(head) : tail / std::sqrt(std::max(rest, 1e-300));
        if (big == n) {
            double norm = 0.0;
            for (double v : x) norm += v * v;
            for (double& v : x) v /= std::sqrt(norm);
        }
        if (classify_sphere(x, p).sphere_class == SphereClass::peaked) return x;
    }
}

Outcome covering_formulas()
{
    Outcome o;
    RngStream rng(16);
    std::size_t configs = 0;
    double tightest = -1e300;
    for (int i = 0; i < 25; ++i) {
        const std::size_t n = 1 + static_cast<std::size_t>(i) % 8;
        const Body k = (i / 8) % 2 ? Body::cube : Body::euclidean_ball;
        const Body d = i % 2 ? Body::cube : Body::euclidean_ball;
        const double reach = k == Body::euclidean_ball && d == Body::cube ? std::sqrt(static_cast<double>(n)) : 1.0;
        const double t = (0.25 + 0.75 * rng.uniform()) / reach;
        std::vector<Point> pts;
        for (int j = 0; j < 2000; ++j) pts.push_back(uniform_in(k, n, rng));
        const auto net = greedy_net(pts, d == Body::cube ? Metric::linf : Metric::l2, t);
        const double bound = volumetric_bound(n, k, d, t).log_count;
        tightest = std::max(tightest, net.log_count - bound);
        o.require(net.log_count <= bound, "volumetric config " + std::to_string(i));
        ++configs;
    }
    const double rs[] = {0.1, 0.2, 0.3, 0.4};
    const double Rs[] = {1.2, 1.5, 2.0};
    for (int i = 0; i < 25; ++i) {
        const PartitionParams p{rs[i % 4], Rs[(i / 4) % 3]};
        std::size_t n = 4 + static_cast<std::size_t>(i) % 5;
        while (p.R >= std::sqrt(static_cast<double>(n))) ++n;
        std::vector<Point> pts;
        for (int j = 0; j < 2000; ++j) pts.push_back(peaked_point(n, p, rng));
        const auto net = greedy_net(pts, Metric::l2, 2.0 * p.r);
        const double bound = vp_entropy_bound(n, p.r, p.R).log_count;
        tightest = std::max(tightest, net.log_count - bound);
        o.require(net.log_count <= bound, "vp config " + std::to_string(i));
        ++configs;
    }
    o.note(std::to_string(configs) + " configs, max log(greedy) - log(bound) = " + fmt(tightest));
    return o;
}

// 9 ---------------------------------------------------------------------------

Outcome determinism()
{
    Outcome o;
    for (const auto& [cfg, bytes] : suite_runs) {
        auto serial = cfg;
        serial.threads = 1;
        o.require(csv_of(run(serial)) == bytes, std::string(to_string(cfg.experiment)) + " serial vs parallel");
        o.require(csv_of(run(cfg)) == bytes, std::string(to_string(cfg.experiment)) + " repeat run");
    }
    o.note(std::to_string(suite_runs.size()) + " configs, 3 runs each");
    return o;
}

}  // namespace

int main()
{
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"oracle equivalence", oracle_equivalence},
        {"sigma_min tail (E1)", sigma_min_tail},
        {"operator norm (E2)", op_norm},
        {"peaked direction (E2b)", peaked_direction},
        {"bound domination (E6)", bound_domination},
        {"regular linear decay (E3)", regular_linear_decay},
        {"allocation (E4)", allocation},
        {"covering formulas", covering_formulas},
        {"determinism", determinism},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("criterion %zu %s: %s (%s) [%.1f s]\n", i + 1, criteria[i].first, o.pass ? "PASS" : "FAIL",
                    o.detail.c_str(), secs);
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    }
    return failed == 0 ? 0 : 1;
}
