#pragma once

// Monte Carlo scenario factory: correlated turbine penetration, scenario
// tuples, and the nearest-neighbour short-circuit resolution stopping rule.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "faultloc/error.hpp"
#include "faultloc/fault_type.hpp"
#include "faultloc/feeder.hpp"
#include "faultloc/oracle.hpp"
#include "faultloc/parallel.hpp"

namespace faultloc {

inline constexpr double kFarmVariance = 1.0 / 12.0;  // Var of U(0,1)

/// Half-width of the turbine deviation law that puts the pre-clip
/// turbine/farm correlation exactly at r_max.
inline double calibrate_delta(double r_max) {
    if (!(r_max > 0.0 && r_max < 1.0)) throw RangeError("calibrate_delta: r_max must lie in (0,1)");
    return std::sqrt(3.0 * kFarmVariance * (1.0 / (r_max * r_max) - 1.0));
}

/// Pre-clip correlation between a turbine and the farm factor for half-width delta.
inline double analytic_correlation(double delta) {
    return std::sqrt(kFarmVariance / (kFarmVariance + delta * delta / 3.0));
}

struct PenetrationDraw {
    double p_farm = 0.0;
    std::vector<double> epsilons;
    PenetrationVector clipped;
};

template <class Rng>
PenetrationDraw sample_penetration(Rng& rng, double delta, std::size_t n_taps) {
    if (!(delta >= 0.0)) throw RangeError("sample_penetration: delta must be non-negative");
    std::uniform_real_distribution<double> farm(0.0, 1.0);
    PenetrationDraw draw;
    draw.p_farm = farm(rng);
    draw.epsilons.resize(n_taps, 0.0);
    if (delta > 0.0) {
        std::uniform_real_distribution<double> dev(-delta, delta);
        for (auto& e : draw.epsilons) e = dev(rng);
    }
    draw.clipped.values.resize(n_taps);
    for (std::size_t i = 0; i < n_taps; ++i) draw.clipped.values[i] = std::clamp(draw.p_farm + draw.epsilons[i], 0.0, 1.0);
    return draw;
}

struct McConfig {
    double r_max = 0.97;
    std::size_t n_taps = 0;
    std::vector<double> fault_locations;
    std::vector<FaultType> fault_types{FaultType::AG, FaultType::AB, FaultType::ABG, FaultType::ABC};
    std::vector<double> resistances_ohm{0.0, 5.0, 10.0, 25.0, 40.0, 50.0};
    std::vector<double> resistances;  // per-unit, parallel to resistances_ohm
    std::vector<double> inception_angles{0.0, 45.0, 90.0};
    double tol_amps = 10.0;
    double percentile = 99.0;
    std::uint64_t seed = 1;
    std::size_t max_scenarios = 50000;
    std::size_t min_scenarios = 0;
    std::size_t batch = 256;
    bool equal_penetration = false;  // zero turbine dispersion: every tap at P_farm
    IbrControlConfig control;

    double dispersion() const { return equal_penetration ? 0.0 : calibrate_delta(r_max); }
};

/// 17 evenly spaced locations over (0,1].
inline std::vector<double> default_fault_locations(std::size_t count = 17) {
    std::vector<double> out;
    for (std::size_t k = 1; k <= count; ++k) out.push_back(static_cast<double>(k) / static_cast<double>(count));
    return out;
}

/// Fills derived fields from the feeder: tap count, locations, per-unit resistances.
inline McConfig resolve_config(McConfig cfg, const FeederSpec& spec) {
    if (cfg.n_taps == 0) cfg.n_taps = spec.taps.size();
    if (cfg.fault_locations.empty()) cfg.fault_locations = default_fault_locations();
    if (cfg.resistances.empty()) {
        const double zb = spec.base.impedance_ohm();
        for (double r : cfg.resistances_ohm) cfg.resistances.push_back(r / zb);
    }
    return cfg;
}

inline void validate(const McConfig& cfg) {
    if (!(cfg.r_max > 0.0 && cfg.r_max < 1.0)) throw ConfigError("r_max must lie in (0,1)");
    if (!(cfg.tol_amps >= 0.0)) throw ConfigError("tol_amps must be non-negative");
    if (!(cfg.percentile > 0.0 && cfg.percentile <= 100.0)) throw ConfigError("percentile must lie in (0,100]");
    if (cfg.fault_locations.empty() || cfg.fault_types.empty() || cfg.resistances.empty() || cfg.inception_angles.empty())
        throw ConfigError("scenario parameter lists must be non-empty");
    if (!cfg.resistances_ohm.empty() && cfg.resistances_ohm.size() != cfg.resistances.size())
        throw ConfigError("resistances and resistances_ohm differ in length");
    for (double d : cfg.fault_locations)
        if (!(d >= 0.0 && d <= 1.0)) throw ConfigError("fault locations must lie in [0,1]");
    for (double r : cfg.resistances)
        if (!(r >= 0.0)) throw ConfigError("fault resistances must be non-negative");
    if (cfg.batch == 0) throw ConfigError("batch must be positive");
    validate(cfg.control);
}

struct ScenarioTuple {
    FaultSpec fault;
    PenetrationDraw penetration;
};

template <class Rng>
ScenarioTuple sample_scenario(Rng& rng, const McConfig& cfg, double delta) {
    if (cfg.fault_locations.empty() || cfg.fault_types.empty() || cfg.resistances.empty() || cfg.inception_angles.empty())
        throw ConfigError("sample_scenario: parameter lists must be non-empty");
    const auto pick = [&rng](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
    ScenarioTuple out;
    out.penetration = sample_penetration(rng, delta, cfg.n_taps);
    out.fault.type = cfg.fault_types[pick(cfg.fault_types.size())];
    out.fault.distance = cfg.fault_locations[pick(cfg.fault_locations.size())];
    const std::size_t r = pick(cfg.resistances.size());
    out.fault.resistance = cfg.resistances[r];
    if (r < cfg.resistances_ohm.size()) out.fault.resistance_ohm = cfg.resistances_ohm[r];
    out.fault.inception_deg = cfg.inception_angles[pick(cfg.inception_angles.size())];
    return out;
}

/// Independent generator for scenario `index` so batches can be produced in parallel.
inline std::mt19937_64 scenario_rng(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = (seed ^ index) + 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return std::mt19937_64(z ^ (z >> 31));
}

/// Inclusive linear interpolation between closest ranks; input must be sorted.
inline double percentile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw InsufficientData("percentile of an empty set");
    if (!(p >= 0.0 && p <= 100.0)) throw RangeError("percentile must lie in [0,100]");
    const double rank = p / 100.0 * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (rank - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

namespace detail {

inline std::vector<double> nearest_gaps_sorted(std::span<const double> x) {
    const std::size_t n = x.size();
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        if (i > 0) best = std::min(best, x[i] - x[i - 1]);
        if (i + 1 < n) best = std::min(best, x[i + 1] - x[i]);
        y[i] = best;
    }
    return y;
}

}  // namespace detail

/// p-th percentile of every value's distance to its closest neighbour.
inline double nn_resolution(std::span<const double> values, double p) {
    if (values.size() < 2) throw InsufficientData("nn_resolution needs at least two values");
    std::vector<double> x(values.begin(), values.end());
    std::sort(x.begin(), x.end());
    auto y = detail::nearest_gaps_sorted(x);
    std::sort(y.begin(), y.end());
    return percentile_sorted(y, p);
}

struct ConvergenceTrace {
    std::vector<double> epsilon;  // epsilon[n-1] = resolution after n scenarios; infinite for n = 1
    std::optional<std::size_t> converged_at;
};

struct MonteCarloResult {
    std::vector<ScenarioRecord> records;
    std::vector<PenetrationDraw> draws;
    ConvergenceTrace trace;
    double delta = 0.0;
    bool unconverged_warning = false;
};

using FaultOracle = std::function<ScenarioRecord(const FaultSpec&, const PenetrationVector&)>;

inline FaultOracle default_oracle(const FeederSpec& spec, const IbrControlConfig& control) {
    return [spec, control](const FaultSpec& f, const PenetrationVector& p) { return solve_fault(spec, f, p, control); };
}

namespace detail {

// Per-n resolution for every prefix, maintained incrementally over a sorted copy.
class ResolutionTracker {
public:
    explicit ResolutionTracker(double p) : p_(p) {}

    double add(double v) {
        sorted_.insert(std::upper_bound(sorted_.begin(), sorted_.end(), v), v);
        if (sorted_.size() < 2) return std::numeric_limits<double>::infinity();
        gaps_ = nearest_gaps_sorted(sorted_);
        const double rank = p_ / 100.0 * static_cast<double>(gaps_.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(rank));
        const auto hi = std::min(lo + 1, gaps_.size() - 1);
        std::nth_element(gaps_.begin(), gaps_.begin() + static_cast<std::ptrdiff_t>(lo), gaps_.end());
        const double a = gaps_[lo];
        double b = a;
        if (hi != lo) b = *std::min_element(gaps_.begin() + static_cast<std::ptrdiff_t>(hi), gaps_.end());
        return a + (rank - static_cast<double>(lo)) * (b - a);
    }

private:
    double p_;
    std::vector<double> sorted_;
    std::vector<double> gaps_;
};

}  // namespace detail

/// Generates scenarios batch by batch until the resolution of the short-circuit
/// levels reaches the tolerance (and at least min_scenarios exist) or the cap is hit.
inline MonteCarloResult run_until_converged(const FeederSpec& spec, McConfig cfg, const FaultOracle& oracle, std::size_t batch = 0) {
    require_valid(spec);
    cfg = resolve_config(std::move(cfg), spec);
    validate(cfg);
    if (cfg.n_taps != spec.taps.size()) throw ConfigError("McConfig n_taps does not match the feeder");
    if (batch == 0) batch = cfg.batch;
    const double tol = cfg.tol_amps / spec.base.current_amp();

    MonteCarloResult out;
    out.delta = cfg.dispersion();
    detail::ResolutionTracker tracker(cfg.percentile);
    while (out.records.size() < cfg.max_scenarios) {
        const std::size_t start = out.records.size();
        const std::size_t count = std::min(batch, cfg.max_scenarios - start);
        std::vector<ScenarioRecord> recs(count);
        std::vector<PenetrationDraw> draws(count);
        parallel_for(count, [&](std::size_t j) {
            auto rng = scenario_rng(cfg.seed, start + j);
            auto tuple = sample_scenario(rng, cfg, out.delta);
            recs[j] = oracle(tuple.fault, tuple.penetration.clipped);
            recs[j].scenario_id = start + j;
            draws[j] = std::move(tuple.penetration);
        });
        for (std::size_t j = 0; j < count; ++j) {
            out.trace.epsilon.push_back(tracker.add(recs[j].i_cc));
            out.records.push_back(std::move(recs[j]));
            out.draws.push_back(std::move(draws[j]));
        }
        const std::size_t n = out.records.size();
        if (n >= 2 && n >= cfg.min_scenarios && out.trace.epsilon.back() <= tol) {
            out.trace.converged_at = n;
            break;
        }
    }
    out.unconverged_warning = !out.trace.converged_at.has_value();
    return out;
}

inline MonteCarloResult run_until_converged(const FeederSpec& spec, const McConfig& cfg) {
    return run_until_converged(spec, cfg, default_oracle(spec, cfg.control));
}

/// Sample correlation of two equally sized series.
inline double sample_correlation(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw InsufficientData("sample_correlation needs two equal series of length >= 2");
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
    mx /= n, my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

struct TurbineCorrelation {
    double pre_clip = 0.0;
    double post_clip = 0.0;
};

/// Per-turbine empirical correlation with the farm factor, before and after clipping.
inline std::vector<TurbineCorrelation> penetration_correlations(std::span<const PenetrationDraw> draws) {
    if (draws.size() < 2) throw InsufficientData("penetration_correlations needs at least two draws");
    const std::size_t taps = draws.front().epsilons.size();
    std::vector<double> farm, pre, post;
    for (const auto& d : draws) farm.push_back(d.p_farm);
    std::vector<TurbineCorrelation> out(taps);
    for (std::size_t i = 0; i < taps; ++i) {
        pre.clear(), post.clear();
        for (const auto& d : draws) {
            pre.push_back(d.p_farm + d.epsilons[i]);
            post.push_back(d.clipped.values[i]);
        }
        out[i] = {sample_correlation(pre, farm), sample_correlation(post, farm)};
    }
    return out;
}

}  // namespace faultloc
