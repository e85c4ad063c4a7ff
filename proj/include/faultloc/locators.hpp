#pragma once

// One-terminal impedance-based locators: the classical family and the
// compensated estimator that corrects the loop voltage for inverter current
// injected between the IED and the fault.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "faultloc/error.hpp"
#include "faultloc/fault_type.hpp"
#include "faultloc/feeder.hpp"
#include "faultloc/oracle.hpp"
#include "faultloc/phasor.hpp"

namespace faultloc {

enum class Method { impedance, reactance, taks, takn, takz, takz_new, proposed };

inline constexpr Method kAllMethods[] = {Method::impedance, Method::reactance, Method::taks,    Method::takn,
                                         Method::takz,      Method::takz_new,  Method::proposed};

inline std::string_view to_string(Method m) {
    switch (m) {
        case Method::impedance: return "impedance";
        case Method::reactance: return "reactance";
        case Method::taks: return "taks";
        case Method::takn: return "takn";
        case Method::takz: return "takz";
        case Method::takz_new: return "takz_new";
        case Method::proposed: return "proposed";
    }
    return "?";
}

inline Method parse_method(std::string_view text) {
    for (auto m : kAllMethods)
        if (text == to_string(m)) return m;
    throw ConfigError("unknown method '" + std::string(text) + "'");
}

enum class CurrentSource { ground_truth, practical_proxy };

/// How the ground-loop current weights the zero-sequence term.
/// line_exact: I_x + (K0 - 1) I0, the drop of a homogeneous line.
/// table_literal: I_x + K0 I0 as tabulated for the loop rows.
enum class ResidualCompensation { line_exact, table_literal };

/// How the compensation voltage enters each pass of the estimator.
/// affine_in_region: the distance dependence of V_comp inside the current
/// upstream-tap set is solved with the loop equation, so each set is settled
/// in one pass. substitution: V_comp is evaluated at the previous estimate.
enum class CompensationUpdate { affine_in_region, substitution };

enum class Polarization { zero_sequence, negative_sequence, superposition };

struct LocatorConfig {
    double tolerance = 1e-6;
    int max_iterations = 50;
    double clamp_lo = 0.0;
    double clamp_hi = 1.0;
    ResidualCompensation residual = ResidualCompensation::line_exact;
    CompensationUpdate update = CompensationUpdate::affine_in_region;
    FaultType three_phase_loop = FaultType::AB;  // AB, BC or CA
};

struct LoopQuantities {
    Phasor v_loop{};
    Phasor i_loop{};
    Phasor i_polarizing{};
    Phasor i_w_proxy{};
    FaultType fault_type = FaultType::AG;
    bool proxy_available = false;
    bool polarizing_fallback = false;
};

struct CompensationInput {
    std::vector<double> tap_positions;
    std::vector<Phasor> tap_currents;
    Phasor z1{};
};

struct DistanceEstimate {
    Method method = Method::proposed;
    double d_hat = 0.0;
    int iterations = 0;
    bool converged = false;
    bool clamped = false;
    bool polarizing_fallback = false;
};

namespace detail {

struct LoopShape {
    FaultClass cls;
    Phase p;
    Phase q;
};

inline LoopShape loop_shape(FaultType type, const LocatorConfig& cfg) {
    const auto cls = fault_class(type);
    if (cls == FaultClass::P3) {
        const auto t = cfg.three_phase_loop;
        if (t != FaultType::AB && t != FaultType::BC && t != FaultType::CA)
            throw ConfigError("three_phase_loop must be AB, BC or CA");
        const auto ph = loop_phases(t);
        return {cls, ph.first, ph.second};
    }
    const auto ph = loop_phases(type);
    return {cls, ph.first, ph.second};
}

inline Phasor residual_weight(Phasor k0, ResidualCompensation mode) {
    return mode == ResidualCompensation::line_exact ? k0 - 1.0 : k0;
}

// Loop combination of a phase set; `ground` adds the residual term.
inline Phasor combine(const LoopShape& s, const ThreePhaseSet& x) {
    switch (s.cls) {
        case FaultClass::SLG: return x[s.p];
        case FaultClass::DLG: return x[s.p] + x[s.q];
        case FaultClass::LL:
        case FaultClass::P3: return x[s.p] - x[s.q];
    }
    return {};
}

inline Phasor loop_current(const LoopShape& s, const ThreePhaseSet& i, Phasor kres) {
    const Phasor base = combine(s, i);
    const Phasor i0 = (i.a + i.b + i.c) / 3.0;
    switch (s.cls) {
        case FaultClass::SLG: return base + kres * i0;
        case FaultClass::DLG: return base + 2.0 * kres * i0;
        default: return base;
    }
}

inline Phasor tap_loop_current(const LoopShape& s, const TapSolution& tap) {
    return combine(s, from_sequence({tap.injected, tap.injected_neg, Phasor{}}));
}

// Fault-point current of the loop expressed through the IED negative-sequence current.
inline Phasor negative_sequence_polarizer(const LoopShape& s, const ThreePhaseSet& i) {
    const Phasor i2 = to_sequence(i).neg;
    const auto inv = [](Phase x) { return std::conj(phase_weight(Sequence::neg, x)); };
    if (s.cls == FaultClass::SLG) return 3.0 * i2 / inv(s.p);
    return 3.0 * i2 / (inv(s.p) - inv(s.q));
}

}  // namespace detail

/// Polarizing current of the requested kind for a loop.
inline Phasor polarizing_current(Polarization kind, FaultType type, const ThreePhaseSet& fault_i,
                                 const std::optional<ThreePhaseSet>& prefault_i, Phasor k0, const LocatorConfig& cfg,
                                 bool* fallback = nullptr) {
    const auto shape = detail::loop_shape(type, cfg);
    switch (kind) {
        case Polarization::zero_sequence: return fault_i.a + fault_i.b + fault_i.c;
        case Polarization::negative_sequence: return detail::negative_sequence_polarizer(shape, fault_i);
        case Polarization::superposition: {
            const Phasor kres = detail::residual_weight(k0, cfg.residual);
            const Phasor loop = detail::loop_current(shape, fault_i, kres);
            if (!prefault_i) {
                if (fallback) *fallback = true;
                return loop;
            }
            return loop - detail::loop_current(shape, *prefault_i, kres);
        }
    }
    return {};
}

/// Loop quantities for a fault type, polarized as the compensated estimator uses them.
/// The proxy is the loop combination of the pre-fault current flowing from the
/// feeder into the bus, i.e. the aggregate inverter output seen at the IED.
inline LoopQuantities select_loop(FaultType type, const ThreePhaseSet& fault_v, const ThreePhaseSet& fault_i,
                                  const std::optional<ThreePhaseSet>& prefault_i, Phasor k0, const LocatorConfig& cfg = {}) {
    if (!fault_v.finite() || !fault_i.finite()) throw InvalidInput("select_loop: non-finite phasors");
    const auto shape = detail::loop_shape(type, cfg);
    LoopQuantities out;
    out.fault_type = type;
    out.v_loop = detail::combine(shape, fault_v);
    out.i_loop = detail::loop_current(shape, fault_i, detail::residual_weight(k0, cfg.residual));
    if (prefault_i) {
        out.i_w_proxy = -detail::combine(shape, *prefault_i);
        out.proxy_available = true;
    }
    Polarization pol = Polarization::superposition;
    if (involves_ground(type)) pol = Polarization::zero_sequence;
    else if (shape.cls == FaultClass::LL) pol = Polarization::negative_sequence;
    out.i_polarizing = polarizing_current(pol, type, fault_i, prefault_i, k0, cfg, &out.polarizing_fallback);
    return out;
}

/// Sum over taps strictly upstream of d of -(d - d_k) z1 I_k.
inline Phasor compensation_voltage(double d, const CompensationInput& comp) {
    if (comp.tap_positions.size() != comp.tap_currents.size())
        throw InvalidInput("compensation_voltage: positions and currents differ in length");
    if (!(d >= 0.0 && d <= 1.0)) throw RangeError("compensation_voltage: distance outside [0,1]");
    Phasor sum{};
    for (std::size_t k = 0; k < comp.tap_positions.size(); ++k)
        if (comp.tap_positions[k] < d) sum += (d - comp.tap_positions[k]) * comp.tap_currents[k];
    return -comp.z1 * sum;
}

inline std::vector<Phasor> practical_proxy_currents(const LoopQuantities& loop, std::size_t n_taps) {
    if (n_taps == 0) return {};
    return std::vector<Phasor>(n_taps, loop.i_w_proxy / static_cast<double>(n_taps));
}

inline double estimate_distance_once(const LoopQuantities& loop, Phasor v_comp, Phasor z1) {
    const Phasor pol = std::conj(loop.i_polarizing);
    const double den = std::imag(z1 * loop.i_loop * pol);
    if (!(std::abs(den) >= 1e-12)) throw SingularLoop("loop denominator vanishes; polarizing current unusable");
    return std::imag((loop.v_loop + v_comp) * pol) / den;
}

/// Fixed-point distance estimate with the compensation voltage re-evaluated
/// against the upstream-tap set of the previous estimate.
inline DistanceEstimate iterate_compensated(const LoopQuantities& loop, const CompensationInput& comp, const LocatorConfig& cfg) {
    if (!(cfg.tolerance > 0.0)) throw ConfigError("locator tolerance must be positive");
    if (comp.tap_positions.size() != comp.tap_currents.size())
        throw InvalidInput("compensation input: positions and currents differ in length");
    DistanceEstimate est;
    double d = estimate_distance_once(loop, Phasor{}, comp.z1);
    est.iterations = 1;
    while (est.iterations < cfg.max_iterations) {
        const double probe = std::clamp(d, 0.0, 1.0);
        double next;
        if (cfg.update == CompensationUpdate::affine_in_region) {
            Phasor slope{}, offset{};
            bool any = false;
            for (std::size_t k = 0; k < comp.tap_positions.size(); ++k) {
                if (comp.tap_positions[k] < probe) {
                    slope += comp.tap_currents[k];
                    offset += comp.tap_positions[k] * comp.tap_currents[k];
                    any = true;
                }
            }
            if (any) {
                LoopQuantities adjusted = loop;
                adjusted.v_loop += comp.z1 * offset;
                adjusted.i_loop += slope;
                next = estimate_distance_once(adjusted, Phasor{}, comp.z1);
            } else {
                next = estimate_distance_once(loop, Phasor{}, comp.z1);
            }
        } else {
            next = estimate_distance_once(loop, compensation_voltage(probe, comp), comp.z1);
        }
        ++est.iterations;
        const double step = std::abs(next - d);
        d = next;
        if (step <= cfg.tolerance) {
            est.converged = true;
            break;
        }
    }
    est.d_hat = std::clamp(d, cfg.clamp_lo, cfg.clamp_hi);
    est.clamped = est.d_hat != d;
    return est;
}

namespace detail {

inline void check_record(const ScenarioRecord& rec, const FeederSpec& spec) {
    if (!rec.fault_v.finite() || !rec.fault_i.finite()) throw InvalidInput("record has non-finite fault phasors");
    if (!rec.tap_solutions.empty() && rec.tap_solutions.size() != spec.taps.size())
        throw InvalidInput("record tap count does not match feeder");
}

inline DistanceEstimate finish(Method m, double d, const LocatorConfig& cfg) {
    DistanceEstimate est;
    est.method = m;
    est.iterations = 1;
    est.converged = std::isfinite(d);
    est.d_hat = std::isfinite(d) ? std::clamp(d, cfg.clamp_lo, cfg.clamp_hi) : d;
    est.clamped = est.d_hat != d;
    return est;
}

}  // namespace detail

inline bool is_applicable(Method m, FaultType type) {
    const auto cls = fault_class(type);
    switch (m) {
        case Method::takz: return cls == FaultClass::SLG || cls == FaultClass::DLG;
        case Method::takz_new: return cls == FaultClass::DLG;
        case Method::takn: return cls == FaultClass::SLG || cls == FaultClass::LL;
        default: return true;
    }
}

inline DistanceEstimate locate_compensated(const ScenarioRecord& rec, const FeederSpec& spec, const LocatorConfig& cfg,
                                           CurrentSource source) {
    detail::check_record(rec, spec);
    const Phasor z1 = spec.line.z1;
    const Phasor k0 = zero_seq_factor(spec.line);
    const auto loop = select_loop(rec.fault.type, rec.fault_v, rec.fault_i, rec.prefault_i, k0, cfg);
    const auto shape = detail::loop_shape(rec.fault.type, cfg);

    CompensationInput comp;
    comp.z1 = z1;
    for (const auto& tap : spec.taps) comp.tap_positions.push_back(tap.position);
    if (source == CurrentSource::ground_truth) {
        if (rec.tap_solutions.size() != spec.taps.size())
            throw InvalidInput("ground-truth compensation needs one tap solution per feeder tap");
        for (const auto& tap : rec.tap_solutions) comp.tap_currents.push_back(detail::tap_loop_current(shape, tap));
    } else {
        if (!loop.proxy_available) throw InvalidInput("practical proxy needs pre-fault currents");
        comp.tap_currents = practical_proxy_currents(loop, spec.taps.size());
    }
    auto est = iterate_compensated(loop, comp, cfg);
    est.method = Method::proposed;
    est.polarizing_fallback = loop.polarizing_fallback;
    return est;
}

inline DistanceEstimate locate_classical(Method method, const ScenarioRecord& rec, const FeederSpec& spec,
                                         const LocatorConfig& cfg = {}) {
    if (method == Method::proposed) throw UnsupportedType("locate_classical: 'proposed' is not a classical method");
    if (!is_applicable(method, rec.fault.type))
        throw UnsupportedType(std::string(to_string(method)) + " is not applicable to " + std::string(to_string(rec.fault.type)));
    detail::check_record(rec, spec);
    const Phasor z1 = spec.line.z1;
    const Phasor k0 = zero_seq_factor(spec.line);
    const auto type = rec.fault.type;

    // Classical zero-sequence Takagi on a DLG fault uses the leading phase's ground loop.
    FaultType loop_type = type;
    if (method == Method::takz && fault_class(type) == FaultClass::DLG) {
        static constexpr FaultType lead[] = {FaultType::AG, FaultType::BG, FaultType::CG};
        loop_type = lead[static_cast<int>(loop_phases(type).first)];
    }
    auto loop = select_loop(loop_type, rec.fault_v, rec.fault_i, rec.prefault_i, k0, cfg);

    switch (method) {
        case Method::impedance: {
            if (std::abs(loop.i_loop) == 0.0) throw SingularLoop("impedance: zero loop current");
            return detail::finish(method, std::abs(loop.v_loop / loop.i_loop) / std::abs(z1), cfg);
        }
        case Method::reactance: {
            if (std::abs(loop.i_loop) == 0.0 || z1.imag() == 0.0) throw SingularLoop("reactance: zero loop current or line reactance");
            return detail::finish(method, std::imag(loop.v_loop / loop.i_loop) / z1.imag(), cfg);
        }
        case Method::taks:
        case Method::takn:
        case Method::takz:
        case Method::takz_new: {
            const Polarization pol = method == Method::taks   ? Polarization::superposition
                                     : method == Method::takn ? Polarization::negative_sequence
                                                              : Polarization::zero_sequence;
            bool fallback = false;
            loop.i_polarizing = polarizing_current(pol, loop_type, rec.fault_i, rec.prefault_i, k0, cfg, &fallback);
            auto est = detail::finish(method, estimate_distance_once(loop, Phasor{}, z1), cfg);
            est.polarizing_fallback = fallback;
            return est;
        }
        case Method::proposed: break;
    }
    throw UnsupportedType("unhandled method");
}

/// Uncompensated estimator with the polarization the compensated method uses for this fault class.
inline Method uncompensated_counterpart(FaultType type) {
    switch (fault_class(type)) {
        case FaultClass::SLG: return Method::takz;
        case FaultClass::DLG: return Method::takz_new;
        case FaultClass::LL: return Method::takn;
        case FaultClass::P3: return Method::taks;
    }
    return Method::taks;
}

/// Most accurate classical baseline per fault class in the published comparison.
inline Method reference_baseline(FaultType type) {
    return fault_class(type) == FaultClass::P3 ? Method::reactance : uncompensated_counterpart(type);
}

inline DistanceEstimate locate(Method method, const ScenarioRecord& rec, const FeederSpec& spec, const LocatorConfig& cfg,
                               CurrentSource source) {
    return method == Method::proposed ? locate_compensated(rec, spec, cfg, source) : locate_classical(method, rec, spec, cfg);
}

}  // namespace faultloc
