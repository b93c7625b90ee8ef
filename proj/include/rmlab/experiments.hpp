#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "rmlab/calibration.hpp"
#include "rmlab/distributions.hpp"
#include "rmlab/errors.hpp"
#include "rmlab/fitted_constants.hpp"
#include "rmlab/matrices.hpp"
#include "rmlab/parallel.hpp"
#include "rmlab/rng.hpp"
#include "rmlab/sphere_profile.hpp"
#include "rmlab/stats.hpp"
#include "rmlab/version.hpp"

namespace rmlab {

enum class Experiment {
    e1_sigma_min_tail,
    e2_op_norm,
    e2b_peaked,
    e3_regular_smallball,
    e4_allocation,
    e5_profile_census,
    e6_bound_calibration,
};

inline const char* to_string(Experiment e) noexcept
{
    switch (e) {
    case Experiment::e1_sigma_min_tail: return "E1_sigma_min_tail";
    case Experiment::e2_op_norm: return "E2_op_norm";
    case Experiment::e2b_peaked: return "E2b_peaked";
    case Experiment::e3_regular_smallball: return "E3_regular_smallball";
    case Experiment::e4_allocation: return "E4_allocation";
    case Experiment::e5_profile_census: return "E5_profile_census";
    case Experiment::e6_bound_calibration: return "E6_bound_calibration";
    }
    return "?";
}

/// Accepts the full name or its prefix up to the underscore ("E2b").
inline Experiment parse_experiment(const std::string& s)
{
    for (int i = 0; i <= static_cast<int>(Experiment::e6_bound_calibration); ++i) {
        const auto e = static_cast<Experiment>(i);
        const std::string name = to_string(e);
        if (s == name || s == name.substr(0, name.find('_'))) return e;
    }
    throw config_error("unknown experiment '" + s + "'");
}

/// Everything a run depends on. Rows are a pure function of this struct.
struct ExperimentConfig {
    Experiment experiment = Experiment::e1_sigma_min_tail;
    EntryDistribution dist = EntryDistribution::rademacher();
    std::vector<std::size_t> n_list{100};
    std::size_t trials = 100;
    std::uint64_t master_seed = 42;
    unsigned threads = 0;  ///< 0 means one per hardware thread
    std::map<std::string, std::string> params;
    bool record_timing = false;  ///< off keeps elapsed_ms at 0 and output byte-stable

    double param(const std::string& key, double fallback) const
    {
        const auto it = params.find(key);
        if (it == params.end()) return fallback;
        double v = 0.0;
        const auto& s = it->second;
        const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || p != s.data() + s.size())
            throw config_error("params." + key + ": expected a number, got '" + s + "'");
        return v;
    }

    std::size_t count_param(const std::string& key, std::size_t fallback) const
    {
        const double v = param(key, static_cast<double>(fallback));
        if (!(v >= 1.0) || v != std::floor(v)) throw config_error("params." + key + ": expected a positive integer");
        return static_cast<std::size_t>(v);
    }

    void validate() const
    {
        if (trials < 1) throw config_error("trials must be at least 1");
        if (n_list.empty()) throw config_error("n_list must be nonempty");
        for (auto n : n_list) {
            if (n < 1) throw config_error("n_list entries must be positive");
            if (n > max_dimension) throw config_error("n_list entries must not exceed " + std::to_string(max_dimension));
        }
    }
};

namespace detail {

inline std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_unsigned(const std::string& key, const std::string& s)
{
    T v{};
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size() || s.empty())
        throw config_error(key + ": expected a nonnegative integer, got '" + s + "'");
    return v;
}

}  // namespace detail

/// Sets one `key = value` pair; keys match the ExperimentConfig fields and
/// `params.<name>` addresses the parameter map.
inline void apply_setting(ExperimentConfig& cfg, const std::string& key_in, const std::string& value_in)
{
    const auto key = detail::trim(key_in);
    const auto value = detail::trim(value_in);
    if (key == "experiment") {
        cfg.experiment = parse_experiment(value);
    } else if (key == "dist") {
        cfg.dist = EntryDistribution::parse(value);
    } else if (key == "n_list") {
        cfg.n_list.clear();
        std::stringstream ss(value);
        std::string item;
        while (std::getline(ss, item, ',')) cfg.n_list.push_back(detail::parse_unsigned<std::size_t>(key, detail::trim(item)));
    } else if (key == "trials") {
        cfg.trials = detail::parse_unsigned<std::size_t>(key, value);
    } else if (key == "master_seed") {
        cfg.master_seed = detail::parse_unsigned<std::uint64_t>(key, value);
    } else if (key == "threads") {
        cfg.threads = detail::parse_unsigned<unsigned>(key, value);
    } else if (key == "record_timing") {
        if (value != "true" && value != "false") throw config_error("record_timing: expected true or false");
        cfg.record_timing = value == "true";
    } else if (key.rfind("params.", 0) == 0 && key.size() > 7) {
        cfg.params[key.substr(7)] = value;
    } else {
        throw config_error("unknown config key '" + key + "'");
    }
}

/// Flat `key = value` text; '#' starts a comment.
inline ExperimentConfig parse_config(std::istream& in)
{
    ExperimentConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (detail::trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw config_error("config line " + std::to_string(lineno) + ": expected key = value");
        apply_setting(cfg, line.substr(0, eq), line.substr(eq + 1));
    }
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw io_error("cannot read config '" + path + "'");
    return parse_config(in);
}

/// Config as `key = value` lines, readable by parse_config.
inline std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig& cfg)
{
    std::string ns;
    for (std::size_t i = 0; i < cfg.n_list.size(); ++i) ns += (i ? "," : "") + std::to_string(cfg.n_list[i]);
    std::vector<std::pair<std::string, std::string>> out{
        {"experiment", to_string(cfg.experiment)},
        {"dist", cfg.dist.spec()},
        {"n_list", ns},
        {"trials", std::to_string(cfg.trials)},
        {"master_seed", std::to_string(cfg.master_seed)},
        {"record_timing", cfg.record_timing ? "true" : "false"},
    };
    for (const auto& [k, v] : cfg.params) out.emplace_back("params." + k, v);
    return out;
}

using Cell = std::variant<std::int64_t, std::uint64_t, double, std::string>;
using Row = std::vector<Cell>;

inline std::string format_double(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string format_cell(const Cell& c)
{
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, std::string>) return v;
            else if constexpr (std::is_same_v<T, double>) return format_double(v);
            else return std::to_string(v);
        },
        c);
}

inline double cell_number(const Cell& c)
{
    return std::visit(
        [](const auto& v) -> double {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, std::string>) throw consistency_error("non-numeric cell '" + v + "'");
            else return static_cast<double>(v);
        },
        c);
}

struct SummaryGroup {
    std::size_t n = 0;
    std::map<std::string, double> stats;

    bool operator==(const SummaryGroup&) const = default;
};

struct ExperimentResult {
    ExperimentConfig config;
    std::vector<std::string> columns;
    std::vector<Row> rows;                  ///< ordered by (n_list position, trial)
    std::vector<SummaryGroup> summary;      ///< one group per n, in n_list order
    std::map<std::string, double> fitted;   ///< fitted constants, if the experiment fits any
    double runtime_ms = 0.0;                ///< 0 unless record_timing

    std::size_t column(const std::string& name) const
    {
        const auto it = std::find(columns.begin(), columns.end(), name);
        if (it == columns.end()) throw consistency_error("no column '" + name + "'");
        return static_cast<std::size_t>(it - columns.begin());
    }

    /// Numeric column restricted to rows whose "n" column equals n.
    std::vector<double> values(const std::string& name, std::size_t n) const
    {
        const auto ci = column(name), ni = column(columns[1]);
        std::vector<double> out;
        for (const auto& r : rows)
            if (cell_number(r[ni]) == static_cast<double>(n)) out.push_back(cell_number(r[ci]));
        return out;
    }
};

namespace detail {

struct TrialContext {
    const ExperimentConfig& cfg;
    std::size_t n;
    std::size_t trial;
    std::uint64_t seed;
};

inline void add_quantiles(std::map<std::string, double>& s, const std::string& prefix, std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    s[prefix + "p05"] = quantile_sorted(v, 0.05);
    s[prefix + "p25"] = quantile_sorted(v, 0.25);
    s[prefix + "p50"] = quantile_sorted(v, 0.50);
    s[prefix + "p75"] = quantile_sorted(v, 0.75);
    s[prefix + "p95"] = quantile_sorted(v, 0.95);
    s[prefix + "mean"] = mean(v);
}

inline void add_frequency(std::map<std::string, double>& s, const std::vector<double>& flags)
{
    std::uint64_t k = 0;
    for (double f : flags) k += f != 0.0 ? 1 : 0;
    const auto ci = clopper_pearson(k, flags.size());
    s["event_count"] = static_cast<double>(k);
    s["event_frequency"] = static_cast<double>(k) / static_cast<double>(flags.size());
    s["event_ci_lo"] = ci.lo;
    s["event_ci_hi"] = ci.hi;
}

inline std::int64_t as_int(std::size_t v) { return static_cast<std::int64_t>(v); }

// E1 ------------------------------------------------------------------------

inline std::vector<std::string> e1_columns()
{
    return {"trial", "n", "dist", "seed", "sigma_min", "op_norm", "singular_flag", "elapsed_ms"};
}

inline std::vector<Row> e1_trial(const TrialContext& t)
{
    const auto s = summarize(sample_matrix(t.cfg.dist, t.n, t.seed));
    return {{as_int(t.trial), as_int(t.n), t.cfg.dist.spec(), t.seed, s.sigma_min, s.op_norm,
             std::int64_t{s.singular_flag ? 1 : 0}, 0.0}};
}

inline std::map<std::string, double> e1_summary(const ExperimentResult& r, std::size_t n)
{
    const double eps = r.config.param("eps", 0.1);
    const double c = r.config.param("c", 1.0);
    const double dn = static_cast<double>(n);
    const auto smin = r.values("sigma_min", n);
    std::vector<double> root, tail, flags;
    for (double s : smin) {
        root.push_back(s * std::sqrt(dn));
        tail.push_back(s * std::pow(dn, 1.5));
        flags.push_back(s < eps * std::pow(dn, -1.5) ? 1.0 : 0.0);
    }
    std::map<std::string, double> s{{"trials", static_cast<double>(smin.size())},
                                    {"threshold", eps * std::pow(dn, -1.5)},
                                    {"bound", c * eps}};
    add_quantiles(s, "sigma_min_sqrt_n_", root);
    add_quantiles(s, "sigma_min_n32_", tail);
    add_frequency(s, flags);
    std::vector<double> op;
    for (double o : r.values("op_norm", n)) op.push_back(o / std::sqrt(dn));
    add_quantiles(s, "op_norm_sqrt_n_", op);
    return s;
}

// E2 ------------------------------------------------------------------------

inline std::vector<std::string> e2_columns()
{
    return {"trial", "n", "dist", "seed", "op_norm", "scaled", "exceeds", "iterations", "converged", "elapsed_ms"};
}

inline std::vector<Row> e2_trial(const TrialContext& t)
{
    const double threshold = t.cfg.param("threshold", 2.5);
    const auto m = sample_matrix(t.cfg.dist, t.n, t.seed);
    const auto rep = operator_norm(m);
    const double scaled = rep.value / std::sqrt(static_cast<double>(t.n));
    return {{as_int(t.trial), as_int(t.n), t.cfg.dist.spec(), t.seed, rep.value, scaled,
             std::int64_t{scaled > threshold ? 1 : 0}, as_int(rep.iterations), std::int64_t{rep.converged ? 1 : 0},
             0.0}};
}

inline std::map<std::string, double> e2_summary(const ExperimentResult& r, std::size_t n)
{
    std::map<std::string, double> s{{"trials", static_cast<double>(r.values("scaled", n).size())},
                                    {"threshold", r.config.param("threshold", 2.5)}};
    add_quantiles(s, "scaled_", r.values("scaled", n));
    add_frequency(s, r.values("exceeds", n));
    return s;
}

// E2b -----------------------------------------------------------------------

inline std::vector<std::string> e2b_columns()
{
    return {"trial", "n", "dist", "seed", "norm_ax", "scaled", "below", "elapsed_ms"};
}

/// ||Ax|| for x with `spikes` equal coordinates 1/sqrt(spikes), rest 0.
inline std::vector<Row> e2b_trial(const TrialContext& t)
{
    const double eta = t.cfg.param("eta", 0.3);
    const auto spikes = t.cfg.count_param("spikes", 2);
    if (spikes > t.n) throw config_error("params.spikes must not exceed n");
    const auto m = sample_matrix(t.cfg.dist, t.n, t.seed);
    std::vector<double> x(t.n, 0.0);
    for (std::size_t j = 0; j < spikes; ++j) x[j] = 1.0 / std::sqrt(static_cast<double>(spikes));
    const double norm = norm2(multiply(m.entries, x));
    const double scaled = norm / std::sqrt(static_cast<double>(t.n));
    return {{as_int(t.trial), as_int(t.n), t.cfg.dist.spec(), t.seed, norm, scaled,
             std::int64_t{scaled <= eta ? 1 : 0}, 0.0}};
}

inline std::map<std::string, double> e2b_summary(const ExperimentResult& r, std::size_t n)
{
    std::map<std::string, double> s{{"trials", static_cast<double>(r.values("scaled", n).size())},
                                    {"eta", r.config.param("eta", 0.3)}};
    add_quantiles(s, "scaled_", r.values("scaled", n));
    add_frequency(s, r.values("below", n));
    return s;
}

// E3 ------------------------------------------------------------------------

inline RegularSetting e3_setting(const ExperimentConfig& cfg, std::size_t n)
{
    RegularSetting reg;
    reg.n = n;
    reg.partition = {cfg.param("r", 0.6), cfg.param("R", 1.5)};
    reg.partition.validate();
    reg.q = cfg.param("q", 20.0);
    reg.t_points = cfg.count_param("t_points", 8);
    reg.h_factor = cfg.param("h_factor", 100.0);
    return reg;
}

inline double e3_delta(const ExperimentConfig& cfg, const RegularSetting& reg)
{
    const double delta = cfg.param("delta", reg.delta());
    const double limit = reg.partition.r / (4.0 * std::numbers::pi * std::sqrt(static_cast<double>(reg.n)));
    if (!(delta > 0.0 && delta <= limit)) throw regime_error("E3: requires 0 < Delta <= r/(4 pi sqrt n)");
    return delta;
}

inline std::vector<std::string> e3_columns(const ExperimentConfig& cfg)
{
    std::vector<std::string> c{"trial",     "n",         "dist",     "seed",       "attempts",  "q_eff",
                               "min_ssq",   "delta",     "slope",    "intercept",  "r_squared", "monotone",
                               "max_ratio", "dominated"};
    const auto points = cfg.count_param("t_points", 8);
    for (std::size_t i = 1; i <= points; ++i) c.push_back("q_t" + std::to_string(i));
    c.push_back("elapsed_ms");
    return c;
}

inline std::vector<Row> e3_trial(const TrialContext& t)
{
    const auto reg = e3_setting(t.cfg, t.n);
    const double delta = e3_delta(t.cfg, reg);
    const double constant = t.cfg.param("constant", fitted::regular_profile);
    const auto max_attempts = t.cfg.count_param("max_attempts", 10000);
    RngStream rng(t.seed);
    std::size_t attempts = 0;
    for (;;) {
        if (attempts++ == max_attempts) throw regime_error("E3: no regular vector within params.max_attempts draws");
        const auto x = random_direction(t.n, rng);
        if (classify_sphere(x, reg.partition).sphere_class != SphereClass::spread) continue;
        const auto c = classify_profile(x, reg.partition, delta, reg.q);
        if (c.verdict != Verdict::regular) continue;

        const double q_eff = effective_q(c, delta);
        const auto curve = concentration_curve(x, t.cfg.dist, delta, reg.t_points, reg.h_factor, rng,
                                               t.cfg.count_param("mc_trials", 20000));
        std::vector<double> ts(curve.size());
        double worst = 0.0;
        bool monotone = true;
        for (std::size_t i = 0; i < curve.size(); ++i) {
            ts[i] = delta * static_cast<double>(i + 1);
            worst = std::max(worst, curve[i] / (q_eff * ts[i]));
            if (i > 0 && curve[i] < curve[i - 1]) monotone = false;
        }
        const auto fit = curve.size() > 1 ? linear_fit(ts, curve) : LinearFit{curve[0], 0.0, 1.0};
        Row row{as_int(t.trial), as_int(t.n),  t.cfg.dist.spec(), t.seed,
                as_int(attempts), q_eff,       static_cast<double>(c.min_ssq), delta,
                fit.slope,        fit.intercept, fit.r_squared,            std::int64_t{monotone ? 1 : 0},
                worst,            std::int64_t{worst <= constant ? 1 : 0}};
        for (double q : curve) row.emplace_back(q);
        row.emplace_back(0.0);
        return {row};
    }
}

inline std::map<std::string, double> e3_summary(const ExperimentResult& r, std::size_t n)
{
    const auto r2 = r.values("r_squared", n);
    const auto slope = r.values("slope", n);
    const auto ratio = r.values("max_ratio", n);
    std::map<std::string, double> s{{"trials", static_cast<double>(r2.size())},
                                    {"constant", r.config.param("constant", fitted::regular_profile)}};
    const auto count = [](const std::vector<double>& v) { return static_cast<double>(std::count(v.begin(), v.end(), 1.0)); };
    s["monotone_count"] = count(r.values("monotone", n));
    s["dominated_count"] = count(r.values("dominated", n));
    s["min_r_squared"] = *std::min_element(r2.begin(), r2.end());
    s["min_slope"] = *std::min_element(slope.begin(), slope.end());
    s["max_ratio"] = *std::max_element(ratio.begin(), ratio.end());
    add_quantiles(s, "q_eff_", r.values("q_eff", n));
    return s;
}

// E4 ------------------------------------------------------------------------

inline std::vector<std::string> e4_columns()
{
    return {"trial", "l", "k", "seed", "min_ssq", "statistic", "exceeds_constant"};
}

inline std::vector<Row> e4_trial(const TrialContext& t)
{
    const auto k = t.cfg.count_param("k", t.n);
    const double constant = allocation_constant(t.cfg.param("eta", 0.5));
    RngStream rng(t.seed);
    const auto a = sample_allocation(t.n, k, rng);
    const double stat = allocation_statistic(a);
    const auto ssq = min_half_subset_ssq(a.occupancy, (t.n + 1) / 2).min_ssq;
    return {{as_int(t.trial), as_int(t.n), as_int(k), t.seed, static_cast<std::uint64_t>(ssq), stat,
             std::int64_t{stat > constant ? 1 : 0}}};
}

inline std::map<std::string, double> e4_summary(const ExperimentResult& r, std::size_t n)
{
    auto stat = r.values("statistic", n);
    std::map<std::string, double> s{{"trials", static_cast<double>(stat.size())},
                                    {"constant", allocation_constant(r.config.param("eta", 0.5))}};
    add_quantiles(s, "statistic_", stat);
    std::sort(stat.begin(), stat.end());
    s["statistic_p99"] = quantile_sorted(stat, 0.99);
    s["statistic_max"] = stat.back();
    add_frequency(s, r.values("exceeds_constant", n));
    return s;
}

// E5 ------------------------------------------------------------------------

inline std::vector<std::string> e5_columns()
{
    return {"trial",   "n",         "dist",  "seed",    "family",  "sphere_class", "verdict",
            "min_ssq", "threshold", "q_eff", "norm_ax", "below_s", "elapsed_ms"};
}

/// Families cycle with the trial index: uniform direction, sparse spike
/// vector (peaked), flat sign vector (singular profile for moderate Q).
inline std::vector<double> e5_vector(std::size_t family, std::size_t n, double R, RngStream& rng)
{
    if (family == 0) return random_direction(n, rng);
    std::vector<double> x(n, 0.0);
    if (family == 1) {
        const auto s = std::max<std::size_t>(1, static_cast<std::size_t>(static_cast<double>(n) / (2.0 * R * R)));
        for (std::size_t j = 0; j < s; ++j) x[rng.below(n)] = 1.0;
    } else {
        for (double& v : x) v = rng.uniform() < 0.5 ? -1.0 : 1.0;
    }
    double norm = 0.0;
    for (double v : x) norm += v * v;
    for (double& v : x) v /= std::sqrt(norm);
    return x;
}

inline std::vector<Row> e5_trial(const TrialContext& t)
{
    const PartitionParams p{t.cfg.param("r", 0.6), t.cfg.param("R", 1.5)};
    p.validate();
    const double sn = std::sqrt(static_cast<double>(t.n));
    const double delta = t.cfg.param("delta", p.r / (8.0 * std::numbers::pi * sn));
    const double q = t.cfg.param("q", 20.0);
    static const char* family_names[] = {"uniform", "sparse", "flat"};
    const std::size_t family = t.trial % 3;
    RngStream rng(t.seed);
    const auto x = e5_vector(family, t.n, p.R, rng);
    const auto sphere = classify_sphere(x, p);
    std::string verdict = "none";
    double min_ssq = 0.0, threshold = 0.0, q_eff = 0.0;
    if (sphere.sphere_class == SphereClass::spread) {
        const auto c = classify_profile(x, p, delta, q);
        verdict = to_string(c.verdict);
        min_ssq = static_cast<double>(c.min_ssq);
        threshold = c.threshold;
        q_eff = effective_q(c, delta);
    }
    const auto m = sample_matrix(t.cfg.dist, t.n, derive_seed(t.seed, 1));
    const double norm = norm2(multiply(m.entries, x));
    return {{as_int(t.trial), as_int(t.n), t.cfg.dist.spec(), t.seed, std::string(family_names[family]),
             std::string(to_string(sphere.sphere_class)), verdict, min_ssq, threshold, q_eff, norm,
             std::int64_t{norm <= delta / (2.0 * sn) ? 1 : 0}, 0.0}};
}

inline std::map<std::string, double> e5_summary(const ExperimentResult& r, std::size_t n)
{
    const auto fi = r.column("family"), ci = r.column("sphere_class"), vi = r.column("verdict");
    std::map<std::string, double> s;
    std::size_t total = 0;
    for (const auto& row : r.rows) {
        if (cell_number(row[1]) != static_cast<double>(n)) continue;
        ++total;
        const auto fam = format_cell(row[fi]);
        const auto cls = format_cell(row[ci]);
        s["count_" + fam] += 1.0;
        s["count_" + cls] += 1.0;
        s["count_" + fam + "_" + cls] += 1.0;
        if (cls == "V_S") {
            s["count_" + format_cell(row[vi])] += 1.0;
            s["count_" + fam + "_" + format_cell(row[vi])] += 1.0;
        }
    }
    s["trials"] = static_cast<double>(total);
    add_frequency(s, r.values("below_s", n));
    for (const auto* key : {"regular", "singular", "V_P", "V_S"})
        if (!s.count(std::string("count_") + key)) s[std::string("count_") + key] = 0.0;
    return s;
}

// E6 ------------------------------------------------------------------------

inline std::vector<std::string> e6_columns() { return {"trial", "n", "bound", "m", "exact", "bound_value", "ratio"}; }

/// One query per bound kind; kind b, trial i draws from
/// derive_stream(derive_seed(master_seed, b), i), matching calibration_corpus.
inline std::vector<Row> e6_trial(const TrialContext& t)
{
    std::vector<Row> rows;
    for (auto kind : all_bound_kinds) {
        RngStream rng = derive_stream(derive_seed(t.cfg.master_seed, static_cast<std::uint64_t>(kind)), t.trial);
        const auto s = calibration_sample(kind, rng);
        rows.push_back({as_int(t.trial), as_int(t.n), std::string(to_string(kind)), as_int(s.m), s.exact, s.bound,
                        s.ratio()});
    }
    return rows;
}

inline double frozen_constant(BoundKind kind)
{
    switch (kind) {
    case BoundKind::esseen: return fitted::esseen;
    case BoundKind::halasz_profile: return fitted::halasz_profile;
    case BoundKind::halasz_integral: return fitted::halasz_integral;
    case BoundKind::berry_esseen: return fitted::berry_esseen;
    case BoundKind::regular_profile: return fitted::regular_profile;
    }
    return 0.0;
}

inline std::map<std::string, double> e6_summary(const ExperimentResult& r, std::size_t n)
{
    const auto bi = r.column("bound"), ei = r.column("exact"), vi = r.column("bound_value"), ri = r.column("ratio");
    std::map<std::string, double> s;
    for (auto kind : all_bound_kinds) {
        const std::string name = to_string(kind);
        double worst = 0.0, count = 0.0, dominated = 0.0;
        for (const auto& row : r.rows) {
            if (cell_number(row[1]) != static_cast<double>(n) || format_cell(row[bi]) != name) continue;
            count += 1.0;
            worst = std::max(worst, cell_number(row[ri]));
            if (cell_number(row[ei]) <= frozen_constant(kind) * cell_number(row[vi])) dominated += 1.0;
        }
        s[name + "_queries"] = count;
        s[name + "_max_ratio"] = worst;
        s[name + "_fitted"] = calibration_headroom * worst;
        s[name + "_frozen"] = frozen_constant(kind);
        s[name + "_dominated_by_frozen"] = dominated;
    }
    return s;
}

}  // namespace detail

inline std::vector<std::string> experiment_columns(const ExperimentConfig& cfg)
{
    switch (cfg.experiment) {
    case Experiment::e1_sigma_min_tail: return detail::e1_columns();
    case Experiment::e2_op_norm: return detail::e2_columns();
    case Experiment::e2b_peaked: return detail::e2b_columns();
    case Experiment::e3_regular_smallball: return detail::e3_columns(cfg);
    case Experiment::e4_allocation: return detail::e4_columns();
    case Experiment::e5_profile_census: return detail::e5_columns();
    case Experiment::e6_bound_calibration: return detail::e6_columns();
    }
    return {};
}

/// Seed of one trial: derive_seed(derive_seed(master_seed, n), trial).
inline std::uint64_t trial_seed(std::uint64_t master, std::size_t n, std::size_t trial) noexcept
{
    return derive_seed(derive_seed(master, n), trial);
}

/// Summary groups recomputed from the rows of `r`.
inline void summarize_result(ExperimentResult& r)
{
    r.summary.clear();
    r.fitted.clear();
    for (auto n : r.config.n_list) {
        SummaryGroup g{n, {}};
        switch (r.config.experiment) {
        case Experiment::e1_sigma_min_tail: g.stats = detail::e1_summary(r, n); break;
        case Experiment::e2_op_norm: g.stats = detail::e2_summary(r, n); break;
        case Experiment::e2b_peaked: g.stats = detail::e2b_summary(r, n); break;
        case Experiment::e3_regular_smallball: g.stats = detail::e3_summary(r, n); break;
        case Experiment::e4_allocation: g.stats = detail::e4_summary(r, n); break;
        case Experiment::e5_profile_census: g.stats = detail::e5_summary(r, n); break;
        case Experiment::e6_bound_calibration: g.stats = detail::e6_summary(r, n); break;
        }
        r.summary.push_back(std::move(g));
    }
    if (r.config.experiment == Experiment::e6_bound_calibration)
        for (auto kind : all_bound_kinds) {
            const std::string name = to_string(kind);
            double best = 0.0;
            for (const auto& g : r.summary) best = std::max(best, g.stats.at(name + "_fitted"));
            r.fitted[name] = best;
        }
}

/// Runs every (n, trial) pair of the config on a pool of cfg.threads workers.
/// Rows depend only on the config, never on scheduling.
inline ExperimentResult run(const ExperimentConfig& cfg)
{
    cfg.validate();
    if (cfg.experiment == Experiment::e4_allocation)
        for (auto n : cfg.n_list)
            if (cfg.count_param("k", n) > n) throw config_error("E4: params.k must not exceed l");
    const auto start = std::chrono::steady_clock::now();
    ExperimentResult result;
    result.config = cfg;
    result.columns = experiment_columns(cfg);

    const std::size_t tasks = cfg.n_list.size() * cfg.trials;
    std::vector<std::vector<Row>> out(tasks);
    const auto elapsed_col = std::find(result.columns.begin(), result.columns.end(), "elapsed_ms");
    parallel_for(tasks, cfg.threads, [&](std::size_t task) {
        const auto n = cfg.n_list[task / cfg.trials];
        const auto trial = task % cfg.trials;
        const detail::TrialContext ctx{cfg, n, trial, trial_seed(cfg.master_seed, n, trial)};
        const auto t0 = std::chrono::steady_clock::now();
        const auto where = [&] { return " (trial " + std::to_string(trial) + ", n = " + std::to_string(n) + ")"; };
        try {
            switch (cfg.experiment) {
            case Experiment::e1_sigma_min_tail: out[task] = detail::e1_trial(ctx); break;
            case Experiment::e2_op_norm: out[task] = detail::e2_trial(ctx); break;
            case Experiment::e2b_peaked: out[task] = detail::e2b_trial(ctx); break;
            case Experiment::e3_regular_smallball: out[task] = detail::e3_trial(ctx); break;
            case Experiment::e4_allocation: out[task] = detail::e4_trial(ctx); break;
            case Experiment::e5_profile_census: out[task] = detail::e5_trial(ctx); break;
            case Experiment::e6_bound_calibration: out[task] = detail::e6_trial(ctx); break;
            }
        } catch (const regime_error& e) {
            throw regime_error(e.what() + where());
        } catch (const config_error& e) {
            throw config_error(e.what() + where());
        }
        if (cfg.record_timing && elapsed_col != result.columns.end()) {
            const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
            for (auto& row : out[task]) row[static_cast<std::size_t>(elapsed_col - result.columns.begin())] = ms;
        }
    });
    for (auto& rows : out)
        for (auto& row : rows) result.rows.push_back(std::move(row));
    summarize_result(result);
    if (cfg.record_timing)
        result.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return result;
}

enum class Format { csv, json };

inline Format parse_format(const std::string& s)
{
    if (s == "csv") return Format::csv;
    if (s == "json") return Format::json;
    throw config_error("unknown format '" + s + "'");
}

namespace detail {

inline std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace detail

/// CSV with the config echo and version as leading '#' lines.
inline void write_csv(const ExperimentResult& r, std::ostream& os)
{
    os << "# rmlab " << version << "\n";
    for (const auto& [k, v] : config_entries(r.config)) os << "# " << k << " = " << v << "\n";
    for (std::size_t i = 0; i < r.columns.size(); ++i) os << (i ? "," : "") << r.columns[i];
    os << "\n";
    for (const auto& row : r.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << detail::csv_field(format_cell(row[i]));
        os << "\n";
    }
}

inline nlohmann::json to_json(const ExperimentResult& r)
{
    nlohmann::json j;
    j["version"] = version;
    nlohmann::json cfg = nlohmann::json::object();
    for (const auto& [k, v] : config_entries(r.config)) cfg[k] = v;
    j["config"] = cfg;
    j["columns"] = r.columns;
    j["row_count"] = r.rows.size();
    nlohmann::json groups = nlohmann::json::array();
    for (const auto& g : r.summary) groups.push_back({{"n", g.n}, {"stats", g.stats}});
    j["summary"] = groups;
    j["fitted"] = r.fitted;
    j["runtime_ms"] = r.runtime_ms;
    return j;
}

inline std::vector<SummaryGroup> summary_from_json(const nlohmann::json& j)
{
    std::vector<SummaryGroup> out;
    for (const auto& g : j.at("summary"))
        out.push_back({g.at("n").get<std::size_t>(), g.at("stats").get<std::map<std::string, double>>()});
    return out;
}

inline void write_json(const ExperimentResult& r, std::ostream& os) { os << to_json(r).dump(2) << "\n"; }

inline void emit(const ExperimentResult& r, Format f, const std::string& path)
{
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot open '" + path + "' for writing");
    if (f == Format::csv) write_csv(r, os);
    else write_json(r, os);
    os.flush();
    if (!os) throw io_error("write failed for '" + path + "'");
}

}  // namespace rmlab
