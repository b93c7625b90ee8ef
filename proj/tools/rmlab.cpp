#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "rmlab/calibration.hpp"
#include "rmlab/experiments.hpp"
#include "rmlab/nets.hpp"
#include "rmlab/small_ball.hpp"
#include "rmlab/sphere_profile.hpp"

using nlohmann::json;
using namespace rmlab;

namespace {

std::vector<double> read_vector(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw io_error("cannot read vector file '" + path + "'");
    std::vector<double> x;
    std::string line;
    while (std::getline(in, line)) {
        const auto s = line.find_first_not_of(" \t\r");
        if (s == std::string::npos || line[s] == '#') continue;
        try {
            x.push_back(std::stod(line.substr(s)));
        } catch (const std::exception&) {
            throw config_error("'" + path + "': not a number: " + line);
        }
    }
    if (x.empty()) throw config_error("'" + path + "' holds no coordinates");
    return x;
}

json estimate_json(const ConcentrationEstimate& e)
{
    json j{{"value", e.value}, {"method", to_string(e.method)}, {"metadata", e.metadata}, {"notes", e.notes}};
    j["ci"] = e.ci ? json{e.ci->lo, e.ci->hi} : json(nullptr);
    return j;
}

json covering_json(const CoveringEstimate& c)
{
    json j{{"kind", to_string(c.kind)}, {"log_count", c.log_count}, {"params", c.params}};
    if (!c.net.empty()) j["net"] = c.net;
    return j;
}

/// Flags shared by `run` and the per-experiment shortcuts.
struct RunFlags {
    std::string config_path;
    std::vector<std::size_t> n;
    std::optional<std::size_t> trials;
    std::optional<std::string> dist;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::vector<std::string> settings;
    std::string out;
    std::string format = "csv";
    std::string summary;
    bool timing = false;
};

void add_run_flags(CLI::App* sub, RunFlags& f)
{
    sub->add_option("--n", f.n, "dimensions (n_list)")->delimiter(',');
    sub->add_option("--trials", f.trials, "trials per dimension");
    sub->add_option("--dist", f.dist, "entry distribution spec");
    sub->add_option("--seed", f.seed, "master seed");
    sub->add_option("--threads", f.threads, "worker threads, 0 = all cores");
    sub->add_option("--set", f.settings, "config override key=value (repeatable)");
    sub->add_option("--out", f.out, "write rows (or the JSON summary) to this path");
    sub->add_option("--format", f.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--summary", f.summary, "also write the JSON summary to this path");
    sub->add_flag("--timing", f.timing, "record elapsed_ms and runtime");
}

void set(ExperimentConfig& cfg, const std::string& kv)
{
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw config_error("--set expects key=value, got '" + kv + "'");
    apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
}

void execute(ExperimentConfig cfg, const RunFlags& f, const std::map<std::string, std::optional<double>>& params)
{
    if (!f.n.empty()) cfg.n_list = f.n;
    if (f.trials) cfg.trials = *f.trials;
    if (f.dist) cfg.dist = EntryDistribution::parse(*f.dist);
    if (f.seed) cfg.master_seed = *f.seed;
    if (f.threads) cfg.threads = *f.threads;
    if (f.timing) cfg.record_timing = true;
    for (const auto& [k, v] : params)
        if (v) cfg.params[k] = format_double(*v);
    for (const auto& kv : f.settings) set(cfg, kv);

    const auto result = run(cfg);
    const auto fmt = parse_format(f.format);
    if (!f.out.empty()) emit(result, fmt, f.out);
    if (!f.summary.empty()) emit(result, Format::json, f.summary);
    if (f.out.empty() && fmt == Format::csv) write_csv(result, std::cout);
    else std::cout << to_json(result).dump(2) << "\n";
}

std::string header_text(const std::map<std::string, double>& fit, std::uint64_t seed)
{
    std::string s = "#pragma once\n\n// Generated by `rmlab calibrate --header`.\n\n#include <cstdint>\n\n"
                    "namespace rmlab::fitted {\n\n";
    s += "inline constexpr std::uint64_t calibration_seed = " + std::to_string(seed) + ";\n";
    for (auto kind : all_bound_kinds) {
        const std::string name = to_string(kind);
        s += "inline constexpr double " + name + " = " + format_double(fit.at(name)) + ";\n";
    }
    return s + "\n}  // namespace rmlab::fitted\n";
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"rmlab: random matrix small-ball laboratory"};
    app.require_subcommand(1);

    RunFlags run_flags;
    auto* run_cmd = app.add_subcommand("run", "run an experiment from a config file");
    run_cmd->add_option("--config", run_flags.config_path, "flat key = value config")->required();
    add_run_flags(run_cmd, run_flags);

    struct Shortcut {
        const char* name;
        Experiment experiment;
        const char* help;
        std::vector<std::pair<std::string, std::string>> params;
    };
    const std::vector<Shortcut> shortcuts{
        {"sigma-min", Experiment::e1_sigma_min_tail, "E1: smallest singular value tail", {{"eps", "epsilon"}, {"c", "constant"}}},
        {"op-norm", Experiment::e2_op_norm, "E2: operator norm", {{"threshold", "multiple of sqrt n"}}},
        {"peaked", Experiment::e2b_peaked, "E2b: ||Ax|| on spike directions", {{"eta", "multiple of sqrt n"}, {"spikes", "spike count"}}},
        {"regular-smallball", Experiment::e3_regular_smallball, "E3: small-ball curve of regular vectors", {{"delta", "Delta"}, {"q", "Q"}, {"r", "r"}, {"R", "R"}}},
        {"allocation", Experiment::e4_allocation, "E4: random allocation statistic", {{"k", "bins"}, {"eta", "eta"}}},
        {"profile-census", Experiment::e5_profile_census, "E5: profile census", {{"delta", "Delta"}, {"q", "Q"}, {"r", "r"}, {"R", "R"}}},
        {"bound-calibration", Experiment::e6_bound_calibration, "E6: bound calibration corpus", {}},
    };
    std::vector<RunFlags> shortcut_flags(shortcuts.size());
    std::vector<std::map<std::string, std::optional<double>>> shortcut_params(shortcuts.size());
    std::vector<CLI::App*> shortcut_cmds;
    for (std::size_t i = 0; i < shortcuts.size(); ++i) {
        auto* sub = app.add_subcommand(shortcuts[i].name, shortcuts[i].help);
        add_run_flags(sub, shortcut_flags[i]);
        for (const auto& [key, help] : shortcuts[i].params)
            sub->add_option("--" + key, shortcut_params[i][key], help);
        shortcut_cmds.push_back(sub);
    }

    std::string x_path, dist_spec = "rademacher", method = "exact";
    double delta = 0.0, q = 0.0, v = 0.0, t = 0.0, r = 0.25, R = 40.0;
    std::size_t trials = 100000;
    std::uint64_t seed = 42;
    auto* profile_cmd = app.add_subcommand("profile", "classify a unit vector's Delta-profile");
    profile_cmd->add_option("--x", x_path, "one coordinate per line")->required();
    profile_cmd->add_option("--delta", delta)->required();
    profile_cmd->add_option("--q", q)->required();
    profile_cmd->add_option("--r", r);
    profile_cmd->add_option("--R", R);

    auto* small_cmd = app.add_subcommand("small-ball", "small-ball probability or bound");
    small_cmd->add_option("--x", x_path, "one coordinate per line")->required();
    small_cmd->add_option("--dist", dist_spec);
    small_cmd->add_option("--v", v);
    small_cmd->add_option("--t", t)->required();
    small_cmd->add_option("--method", method);
    small_cmd->add_option("--trials", trials);
    small_cmd->add_option("--seed", seed);

    std::string check, body_k = "euclidean_ball", body_d = "euclidean_ball";
    std::size_t n = 0, l = 0;
    auto* nets_cmd = app.add_subcommand("nets", "covering-number formulas");
    nets_cmd->add_option("--check", check)->required()->check(CLI::IsMember({"volumetric", "vp", "grid"}));
    nets_cmd->add_option("--n", n)->required();
    nets_cmd->add_option("--K", body_k);
    nets_cmd->add_option("--D", body_d);
    nets_cmd->add_option("--t", t);
    nets_cmd->add_option("--r", r);
    nets_cmd->add_option("--R", R);
    nets_cmd->add_option("--delta", delta);
    nets_cmd->add_option("--l", l, "|J|; defaults to m");

    std::uint64_t cal_seed = fitted::calibration_seed;
    std::size_t per_bound = calibration_size;
    unsigned cal_threads = 0;
    std::string header_path;
    auto* cal_cmd = app.add_subcommand("calibrate", "fit bound constants on a fresh corpus");
    cal_cmd->add_option("--seed", cal_seed);
    cal_cmd->add_option("--per-bound", per_bound);
    cal_cmd->add_option("--threads", cal_threads);
    cal_cmd->add_option("--header", header_path, "write a fitted_constants.hpp here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (run_cmd->parsed()) {
            execute(load_config(run_flags.config_path), run_flags, {});
        }
        for (std::size_t i = 0; i < shortcuts.size(); ++i) {
            if (!shortcut_cmds[i]->parsed()) continue;
            ExperimentConfig cfg;
            cfg.experiment = shortcuts[i].experiment;
            execute(cfg, shortcut_flags[i], shortcut_params[i]);
        }
        if (profile_cmd->parsed()) {
            const auto x = read_vector(x_path);
            const auto c = classify_profile(x, {r, R}, delta, q);
            json counts = json::object();
            for (const auto& [bin, count] : c.profile.counts) counts[std::to_string(bin)] = count;
            std::cout << json{{"sphere_class", to_string(c.sphere_class)},
                              {"sigma_set", c.sigma_set},
                              {"j_set", c.j_set},
                              {"m", c.m},
                              {"keep", c.keep},
                              {"profile", {{"delta", c.profile.delta}, {"counts", counts}, {"below", c.profile.below}}},
                              {"min_ssq", c.min_ssq},
                              {"threshold", c.threshold},
                              {"verdict", to_string(c.verdict)},
                              {"halasz_regime", c.halasz_regime}}
                             .dump(2)
                      << "\n";
        }
        if (small_cmd->parsed()) {
            const SmallBallQuery query{read_vector(x_path), EntryDistribution::parse(dist_spec), v, t};
            ConcentrationEstimate e;
            switch (parse_method(method)) {
            case Method::exact: e = exact_concentration(query); break;
            case Method::convolution: {
                ExactOptions opt;
                opt.path = ExactOptions::Path::convolve;
                e = exact_concentration(query, opt);
                break;
            }
            case Method::monte_carlo: e = monte_carlo_concentration(query, trials, seed, default_width()); break;
            case Method::esseen_bound: e = esseen_bound(query); break;
            case Method::halasz_profile_bound: e = halasz_profile_bound(query.x, t); break;
            case Method::halasz_integral_bound: {
                double a = std::abs(query.x.at(0));
                for (double w : query.x) a = std::min(a, std::abs(w));
                e = halasz_integral_bound(query.x, query.dist, t, a);
                break;
            }
            case Method::berry_esseen_bound: e = berry_esseen_bound(query); break;
            }
            std::cout << estimate_json(e).dump(2) << "\n";
        }
        if (nets_cmd->parsed()) {
            json out;
            if (check == "volumetric") {
                out = covering_json(volumetric_bound(n, parse_body(body_k), parse_body(body_d), t));
            } else if (check == "vp") {
                out = covering_json(vp_entropy_bound(n, r, R));
            } else {
                const auto ctx = make_context(n, delta, {r, R});
                std::vector<std::size_t> coords(l == 0 ? ctx.m : l);
                for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
                const auto g = singular_grid_net(n, delta, r, R, coords);
                out = {{"kind", to_string(CoveringKind::singular_grid_formula)},
                       {"log_count", g.log_count},
                       {"realized_log_count", g.realized_log_count},
                       {"l", g.coords.size()},
                       {"k", g.context.k},
                       {"k0", g.context.k0},
                       {"m", g.context.m},
                       {"centers", g.centers},
                       {"c_exponent", g.c_exponent}};
            }
            std::cout << out.dump(2) << "\n";
        }
        if (cal_cmd->parsed()) {
            const auto fit = fit_constants(cal_seed, per_bound, cal_threads);
            if (!header_path.empty()) {
                std::ofstream os(header_path);
                if (!os) throw io_error("cannot write '" + header_path + "'");
                os << header_text(fit, cal_seed);
                if (!os) throw io_error("write failed for '" + header_path + "'");
            }
            std::cout << json{{"seed", cal_seed}, {"per_bound", per_bound}, {"headroom", calibration_headroom},
                              {"constants", fit}}
                             .dump(2)
                      << "\n";
        }
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const regime_error& e) {
        std::cerr << "regime violation: " << e.what() << "\n";
        return 3;
    } catch (const io_error& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
