#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "rmlab/errors.hpp"
#include "rmlab/rng.hpp"
#include "rmlab/stats.hpp"

namespace rmlab {

struct Atom {
    double value = 0.0;
    double prob = 0.0;

    bool operator==(const Atom&) const = default;
};

/// A centered, variance-one entry law. Values are immutable once built and
/// can be shared across threads.
class EntryDistribution {
public:
    enum class Kind { rademacher, gaussian, uniform_sym, discrete };

    static EntryDistribution rademacher() { return EntryDistribution(Kind::rademacher, {{-1.0, 0.5}, {1.0, 0.5}}); }
    static EntryDistribution gaussian() { return EntryDistribution(Kind::gaussian, {}); }
    /// Uniform on [-sqrt(3), sqrt(3)].
    static EntryDistribution uniform() { return EntryDistribution(Kind::uniform_sym, {}); }

    /// Finite law. Probabilities must sum to 1 (1e-12), mean 0 and second
    /// moment 1 (1e-9).
    static EntryDistribution discrete(std::vector<Atom> atoms)
    {
        if (atoms.empty()) throw config_error("discrete law needs at least one atom");
        double total = 0.0, first = 0.0, second = 0.0;
        for (const auto& a : atoms) {
            if (!std::isfinite(a.value) || !std::isfinite(a.prob) || a.prob <= 0.0)
                throw config_error("discrete law: atoms need finite values and positive probabilities");
            total += a.prob;
            first += a.prob * a.value;
            second += a.prob * a.value * a.value;
        }
        if (std::abs(total - 1.0) > 1e-12) throw config_error("discrete law: probabilities must sum to 1");
        if (std::abs(first) > 1e-9) throw config_error("discrete law: mean must be 0");
        if (std::abs(second - 1.0) > 1e-9) throw config_error("discrete law: variance must be 1");
        std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.value < b.value; });
        return EntryDistribution(Kind::discrete, std::move(atoms));
    }

    /// Parses `rademacher`, `gaussian`, `uniform` or `discrete:v1:p1,v2:p2,...`.
    static EntryDistribution parse(std::string_view spec)
    {
        if (spec == "rademacher") return rademacher();
        if (spec == "gaussian") return gaussian();
        if (spec == "uniform") return uniform();
        constexpr std::string_view prefix = "discrete:";
        if (!spec.starts_with(prefix)) throw config_error("unknown distribution spec '" + std::string(spec) + "'");
        spec.remove_prefix(prefix.size());
        std::vector<Atom> atoms;
        while (!spec.empty()) {
            const auto comma = spec.find(',');
            const auto item = spec.substr(0, comma);
            const auto colon = item.find(':');
            if (colon == std::string_view::npos) throw config_error("discrete atom must be value:prob");
            atoms.push_back({parse_real(item.substr(0, colon)), parse_real(item.substr(colon + 1))});
            if (comma == std::string_view::npos) break;
            spec.remove_prefix(comma + 1);
        }
        return discrete(std::move(atoms));
    }

    Kind kind() const noexcept { return kind_; }

    std::string spec() const
    {
        switch (kind_) {
        case Kind::rademacher: return "rademacher";
        case Kind::gaussian: return "gaussian";
        case Kind::uniform_sym: return "uniform";
        case Kind::discrete: break;
        }
        std::string out = "discrete:";
        for (std::size_t i = 0; i < atoms_.size(); ++i) {
            if (i) out += ',';
            out += format_real(atoms_[i].value) + ':' + format_real(atoms_[i].prob);
        }
        return out;
    }

    bool finite_support() const noexcept { return kind_ == Kind::rademacher || kind_ == Kind::discrete; }

    /// Atoms sorted by value; empty for continuous laws.
    const std::vector<Atom>& atoms() const noexcept { return atoms_; }

    /// sup |beta| over the support (infinite for the Gaussian).
    double support_radius() const noexcept
    {
        switch (kind_) {
        case Kind::rademacher: return 1.0;
        case Kind::gaussian: return std::numeric_limits<double>::infinity();
        case Kind::uniform_sym: return std::numbers::sqrt3;
        case Kind::discrete: break;
        }
        double r = 0.0;
        for (const auto& a : atoms_) r = std::max(r, std::abs(a.value));
        return r;
    }

    bool symmetric() const noexcept
    {
        if (kind_ != Kind::discrete) return true;
        const std::size_t n = atoms_.size();
        for (std::size_t i = 0; i < n; ++i) {
            const auto& a = atoms_[i];
            const auto& b = atoms_[n - 1 - i];
            if (std::abs(a.value + b.value) > 1e-12 || std::abs(a.prob - b.prob) > 1e-12) return false;
        }
        return true;
    }

    double sample(RngStream& rng) const noexcept
    {
        switch (kind_) {
        case Kind::rademacher: return (rng() >> 63) ? 1.0 : -1.0;
        case Kind::gaussian: return rng.normal();
        case Kind::uniform_sym: return std::numbers::sqrt3 * (2.0 * rng.uniform() - 1.0);
        case Kind::discrete: break;
        }
        double u = rng.uniform();
        for (const auto& a : atoms_) {
            if (u < a.prob) return a.value;
            u -= a.prob;
        }
        return atoms_.back().value;
    }

    /// E cos(beta t) for symmetric laws; |E exp(i beta t)| otherwise.
    double char_fn(double t) const noexcept
    {
        switch (kind_) {
        case Kind::rademacher: return std::cos(t);
        case Kind::gaussian: return std::exp(-0.5 * t * t);
        case Kind::uniform_sym: {
            const double u = std::numbers::sqrt3 * t;
            return u == 0.0 ? 1.0 : std::sin(u) / u;
        }
        case Kind::discrete: break;
        }
        double re = 0.0, im = 0.0;
        for (const auto& a : atoms_) {
            re += a.prob * std::cos(a.value * t);
            im += a.prob * std::sin(a.value * t);
        }
        return symmetric() ? re : std::hypot(re, im);
    }

    /// P(beta <= x).
    double cdf(double x) const noexcept
    {
        switch (kind_) {
        case Kind::gaussian: return normal_cdf(x);
        case Kind::uniform_sym:
            return std::clamp((x + std::numbers::sqrt3) / (2.0 * std::numbers::sqrt3), 0.0, 1.0);
        default: break;
        }
        double p = 0.0;
        for (const auto& a : atoms_)
            if (a.value <= x) p += a.prob;
        return std::min(p, 1.0);
    }

    /// E|beta|^3.
    double third_abs_moment() const noexcept
    {
        switch (kind_) {
        case Kind::rademacher: return 1.0;
        case Kind::gaussian: return 2.0 * std::sqrt(2.0 / std::numbers::pi);
        case Kind::uniform_sym: return 0.75 * std::numbers::sqrt3;
        case Kind::discrete: break;
        }
        double m = 0.0;
        for (const auto& a : atoms_) m += a.prob * std::pow(std::abs(a.value), 3);
        return m;
    }

    bool operator==(const EntryDistribution&) const = default;

private:
    EntryDistribution(Kind kind, std::vector<Atom> atoms) : kind_(kind), atoms_(std::move(atoms)) {}

    static double parse_real(std::string_view s)
    {
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || ptr != s.data() + s.size())
            throw config_error("not a number: '" + std::string(s) + "'");
        return v;
    }

    static std::string format_real(double v)
    {
        char buf[64];
        const auto res = std::to_chars(buf, buf + sizeof buf, v);
        return std::string(buf, res.ptr);
    }

    Kind kind_;
    std::vector<Atom> atoms_;
};

struct MomentRatio {
    int p = 0;
    double ratio = 0.0;      ///< (E|beta|^p)^{1/p} / sqrt(p)
    double std_error = 0.0;  ///< delta-method Monte Carlo standard error of `ratio`
};

/// Moment-growth proxy for subgaussianity: the ratios stay bounded in p for
/// subgaussian laws. Reports every even p in [2, p_max].
inline std::vector<MomentRatio> subgaussian_diagnostic(const EntryDistribution& dist, std::size_t samples,
                                                       int p_max, RngStream& rng)
{
    if (samples < 10'000) throw config_error("subgaussian_diagnostic: need at least 10^4 samples");
    if (p_max > 12) throw config_error("subgaussian_diagnostic: p_max > 12 makes moment estimates unstable");
    if (p_max < 2) throw config_error("subgaussian_diagnostic: p_max must be at least 2");

    const int count = p_max / 2;
    std::vector<double> sum(count, 0.0), sum_sq(count, 0.0);
    for (std::size_t i = 0; i < samples; ++i) {
        const double b2 = [&] { const double b = dist.sample(rng); return b * b; }();
        double pw = 1.0;
        for (int j = 0; j < count; ++j) {
            pw *= b2;
            sum[j] += pw;
            sum_sq[j] += pw * pw;
        }
    }

    const auto n = static_cast<double>(samples);
    std::vector<MomentRatio> report;
    for (int j = 0; j < count; ++j) {
        const int p = 2 * (j + 1);
        const double m = sum[j] / n;
        const double var = std::max(0.0, sum_sq[j] / n - m * m);
        const double se_m = std::sqrt(var / (n - 1.0));
        const double root = std::pow(m, 1.0 / p);
        const double sp = std::sqrt(static_cast<double>(p));
        report.push_back({p, root / sp, (root / (p * m)) * se_m / sp});
    }
    return report;
}

}  // namespace rmlab
