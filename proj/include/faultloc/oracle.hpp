#pragma once

// Quasi-static sequence-network short-circuit solver for a radial feeder with
// inverter taps. Inverters are positive-sequence current sources driven by a
// voltage-dependent control law; the law is resolved by damped fixed-point
// iteration around an exact linear ladder solve.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "faultloc/error.hpp"
#include "faultloc/fault_type.hpp"
#include "faultloc/feeder.hpp"
#include "faultloc/phasor.hpp"

namespace faultloc {

struct FaultSpec {
    FaultType type = FaultType::AG;
    double distance = 0.0;                 // per-unit
    double resistance = 0.0;               // per-unit
    double inception_deg = 0.0;            // metadata only
    std::optional<double> resistance_ohm;  // metadata only
};

struct PenetrationVector {
    std::vector<double> values;
};

struct TapSolution {
    Phasor injected{};      // positive-sequence injection
    Phasor toward_grid{};   // part returning through the grid source
    Phasor toward_fault{};  // part flowing into the fault
    Phasor pcc_voltage{};   // positive-sequence PCC voltage
    Phasor injected_neg{};  // negative-sequence injection (zero unless enabled)
};

enum class SegmentClass { primary, secondary };

inline std::string_view to_string(SegmentClass c) { return c == SegmentClass::primary ? "primary" : "secondary"; }

struct ScenarioRecord {
    std::size_t scenario_id = 0;
    FaultSpec fault;
    PenetrationVector penetration;
    std::optional<ThreePhaseSet> prefault_v;
    std::optional<ThreePhaseSet> prefault_i;
    ThreePhaseSet fault_v;
    ThreePhaseSet fault_i;
    std::vector<TapSolution> tap_solutions;  // empty when ground truth is unavailable
    double i_cc = 0.0;
    SegmentClass segment_class = SegmentClass::primary;

    bool proxy_available() const noexcept { return prefault_i.has_value(); }
};

struct IbrControlConfig {
    double current_limit = 1.1;            // per-unit of tap rating
    double ride_through_threshold = 0.85;  // per-unit voltage
    double reactive_gain = 2.0;            // per-unit current per per-unit voltage dip
    bool negative_seq_injection = false;
    int max_iterations = 100;
    double tolerance = 1e-9;               // relative, on node voltages
    double damping = 0.5;
    // Below this PCC voltage the synchronizing angle blends linearly toward the
    // pre-fault PCC angle and is frozen at zero voltage.
    double pll_lock_voltage = 0.2;
};

inline void validate(const IbrControlConfig& cfg) {
    if (!(cfg.current_limit > 0.0)) throw ConfigError("current_limit must be positive");
    if (!(cfg.ride_through_threshold > 0.0 && cfg.ride_through_threshold < 1.0))
        throw ConfigError("ride_through_threshold must lie in (0,1)");
    if (!(cfg.reactive_gain >= 0.0)) throw ConfigError("reactive_gain must be non-negative");
    if (cfg.max_iterations < 1) throw ConfigError("max_iterations must be at least 1");
    if (!(cfg.damping > 0.0 && cfg.damping <= 1.0)) throw ConfigError("damping must lie in (0,1]");
    if (!(cfg.pll_lock_voltage >= 0.0 && cfg.pll_lock_voltage < 1.0)) throw ConfigError("pll_lock_voltage must lie in [0,1)");
}

/// Per-tap current sources (current injected into the feeder node).
struct TapInjection {
    Phasor pos{};
    Phasor neg{};
};

/// Solution of the linear network for a fixed set of injections.
struct NetworkState {
    std::vector<double> positions;        // node positions, node 0 is the IED bus
    std::vector<SequenceSet> node_v;      // per node
    SequenceSet source_i;                 // grid source into the IED bus, i.e. the IED branch current
    SequenceSet fault_i;                  // current drawn at the fault node (zero without fault)
    std::vector<std::size_t> tap_node;    // node index of every tap
    std::optional<std::size_t> fault_node;

    ThreePhaseSet ied_v() const { return from_sequence(node_v.front()); }
    ThreePhaseSet ied_i() const { return from_sequence(source_i); }
};

namespace detail {

// Radial chain with no shunt elements: the grid source is the only return
// path besides the fault, so branch currents follow from KCL alone.
inline std::vector<Phasor> solve_chain(std::span<const double> pos, std::span<const Phasor> inj, Phasor z_per_unit,
                                       Phasor z_source, Phasor emf, Phasor& source_current) {
    Phasor total{};
    for (auto x : inj) total += x;
    source_current = -total;
    std::vector<Phasor> v(pos.size());
    v[0] = emf - z_source * source_current;
    Phasor branch = source_current + inj[0];
    for (std::size_t j = 1; j < pos.size(); ++j) {
        v[j] = v[j - 1] - (pos[j] - pos[j - 1]) * z_per_unit * branch;
        branch += inj[j];
    }
    return v;
}

inline Phase reference_phase(FaultType t) {
    switch (t) {
        case FaultType::BG:
        case FaultType::CA:
        case FaultType::CAG: return Phase::b;
        case FaultType::CG:
        case FaultType::AB:
        case FaultType::ABG: return Phase::c;
        default: return Phase::a;
    }
}

// Fault-point sequence currents from Thevenin voltages/impedances; `voc` and
// `zth` are indexed pos, neg, zero.
inline SequenceSet interconnect(FaultType type, double rf, const SequenceSet& voc, const SequenceSet& zth) {
    const auto cls = fault_class(type);
    if (cls == FaultClass::P3) {
        return {voc.pos / (zth.pos + rf), voc.neg / (zth.neg + rf), Phasor{}};
    }
    const Phase ref = reference_phase(type);
    const Phasor w1 = phase_weight(Sequence::pos, ref);
    const Phasor w2 = phase_weight(Sequence::neg, ref);
    const Phasor v1 = w1 * voc.pos, v2 = w2 * voc.neg, v0 = voc.zero;
    Phasor i1{}, i2{}, i0{};
    switch (cls) {
        case FaultClass::SLG: {
            const Phasor den = zth.pos + zth.neg + zth.zero + 3.0 * rf;
            if (std::abs(den) == 0.0) throw DegenerateImpedance("SLG interconnection has zero impedance");
            i1 = i2 = i0 = (v1 + v2 + v0) / den;
            break;
        }
        case FaultClass::LL: {
            const Phasor den = zth.pos + zth.neg + rf;
            if (std::abs(den) == 0.0) throw DegenerateImpedance("LL interconnection has zero impedance");
            i1 = (v1 - v2) / den;
            i2 = -i1;
            break;
        }
        case FaultClass::DLG: {
            // R_F in each faulted phase, bonded solidly to ground.
            const Phasor z1 = zth.pos + rf, z2 = zth.neg + rf, z0 = zth.zero + rf;
            if (std::abs(z1) == 0.0 || std::abs(z2) == 0.0 || std::abs(z0) == 0.0)
                throw DegenerateImpedance("DLG interconnection has a zero branch impedance");
            const Phasor u = (v1 / z1 + v2 / z2 + v0 / z0) / (1.0 / z1 + 1.0 / z2 + 1.0 / z0);
            i1 = (v1 - u) / z1;
            i2 = (v2 - u) / z2;
            i0 = (v0 - u) / z0;
            break;
        }
        case FaultClass::P3: break;
    }
    return {i1 / w1, i2 / w2, i0};
}

}  // namespace detail

/// Exact solve of the three sequence ladders for fixed tap injections.
/// `emf` replaces the source EMF so that superposition terms can be isolated.
inline NetworkState solve_network(const FeederSpec& spec, const std::optional<FaultSpec>& fault, Phasor emf,
                                  std::span<const TapInjection> injections) {
    if (injections.size() != spec.taps.size()) throw InvalidInput("solve_network: injection count != tap count");
    NetworkState st;
    st.positions.push_back(0.0);
    for (const auto& tap : spec.taps) st.positions.push_back(tap.position);
    if (fault) {
        if (!(fault->distance >= 0.0 && fault->distance <= 1.0)) throw RangeError("fault distance outside [0,1]");
        if (!(fault->resistance >= 0.0)) throw RangeError("fault resistance must be non-negative");
        st.positions.push_back(fault->distance);
    }
    std::sort(st.positions.begin(), st.positions.end());
    st.positions.erase(std::unique(st.positions.begin(), st.positions.end()), st.positions.end());
    const auto node_of = [&](double x) {
        return static_cast<std::size_t>(std::lower_bound(st.positions.begin(), st.positions.end(), x) - st.positions.begin());
    };
    for (const auto& tap : spec.taps) st.tap_node.push_back(node_of(tap.position));
    if (fault) st.fault_node = node_of(fault->distance);

    const std::size_t n = st.positions.size();
    std::vector<Phasor> inj[3];
    for (auto& v : inj) v.assign(n, Phasor{});
    for (std::size_t k = 0; k < spec.taps.size(); ++k) {
        inj[0][st.tap_node[k]] += injections[k].pos;
        inj[1][st.tap_node[k]] += injections[k].neg;
    }
    const Sequence seqs[3] = {Sequence::pos, Sequence::neg, Sequence::zero};
    const Phasor emfs[3] = {emf, Phasor{}, Phasor{}};

    if (fault) {
        SequenceSet voc, zth;
        Phasor* vo[3] = {&voc.pos, &voc.neg, &voc.zero};
        Phasor* zt[3] = {&zth.pos, &zth.neg, &zth.zero};
        for (int s = 0; s < 3; ++s) {
            Phasor is;
            const auto v = detail::solve_chain(st.positions, inj[s], spec.line[seqs[s]], spec.source[seqs[s]], emfs[s], is);
            *vo[s] = v[*st.fault_node];
            *zt[s] = spec.source[seqs[s]] + fault->distance * spec.line[seqs[s]];
        }
        st.fault_i = detail::interconnect(fault->type, fault->resistance, voc, zth);
        inj[0][*st.fault_node] -= st.fault_i.pos;
        inj[1][*st.fault_node] -= st.fault_i.neg;
        inj[2][*st.fault_node] -= st.fault_i.zero;
    }

    st.node_v.assign(n, SequenceSet{});
    Phasor* src[3] = {&st.source_i.pos, &st.source_i.neg, &st.source_i.zero};
    for (int s = 0; s < 3; ++s) {
        const auto v = detail::solve_chain(st.positions, inj[s], spec.line[seqs[s]], spec.source[seqs[s]], emfs[s], *src[s]);
        for (std::size_t j = 0; j < n; ++j) {
            Phasor* slot = s == 0 ? &st.node_v[j].pos : s == 1 ? &st.node_v[j].neg : &st.node_v[j].zero;
            *slot = v[j];
        }
    }
    return st;
}

/// Control-law target injection for one tap given its PCC sequence voltages.
/// `sync_ref` is the unit phasor the PLL holds when the PCC voltage collapses.
inline TapInjection control_law(const IbrTap& tap, double penetration, const SequenceSet& pcc, const IbrControlConfig& cfg,
                                Phasor sync_ref = {1.0, 0.0}) {
    const double rated = tap.rated_power;
    const double limit = cfg.current_limit * rated;
    const double vm = std::abs(pcc.pos);
    Phasor unit = vm > 0.0 ? pcc.pos / vm : sync_ref;
    if (vm < cfg.pll_lock_voltage) {
        const double w = vm / cfg.pll_lock_voltage;
        const Phasor blend = w * unit + (1.0 - w) * sync_ref;
        unit = std::abs(blend) > 0.0 ? blend / std::abs(blend) : sync_ref;
    }
    const double demand = vm > 0.0 ? penetration * rated / vm : limit;
    TapInjection out;
    if (vm >= cfg.ride_through_threshold) {
        out.pos = std::min(demand, limit) * unit;
        return out;
    }
    // Ride-through: reactive priority, active current takes the remaining headroom.
    const double iq = std::min(cfg.current_limit, cfg.reactive_gain * (cfg.ride_through_threshold - vm)) * rated;
    const double ip = std::min(demand, std::sqrt(std::max(0.0, limit * limit - iq * iq)));
    out.pos = Phasor{ip, -iq} * unit;
    if (cfg.negative_seq_injection) {
        Phasor i2 = Phasor{0.0, cfg.reactive_gain * rated} * pcc.neg;
        const double room = std::max(0.0, limit - std::abs(out.pos));
        if (std::abs(i2) > room) i2 *= room / std::abs(i2);
        out.neg = i2;
    }
    return out;
}

struct SteadyState {
    NetworkState network;
    std::vector<TapInjection> injections;
    int iterations = 0;
};

namespace detail {

inline void check_penetration(const FeederSpec& spec, const PenetrationVector& pen) {
    if (pen.values.size() != spec.taps.size())
        throw InvalidInput("penetration vector length " + std::to_string(pen.values.size()) + " != tap count " +
                           std::to_string(spec.taps.size()));
    for (double p : pen.values)
        if (!(p >= 0.0 && p <= 1.0)) throw RangeError("penetration values must lie in [0,1]");
}

inline SteadyState iterate_control(const FeederSpec& spec, const std::optional<FaultSpec>& fault,
                                   const PenetrationVector& pen, const IbrControlConfig& cfg,
                                   std::vector<TapInjection> start, std::span<const Phasor> sync_ref) {
    SteadyState out;
    out.injections = std::move(start);
    std::vector<SequenceSet> previous;
    for (int it = 1; it <= cfg.max_iterations; ++it) {
        out.network = solve_network(spec, fault, spec.source.emf, out.injections);
        out.iterations = it;
        if (!previous.empty()) {
            double diff = 0.0, scale = 1.0;
            for (std::size_t j = 0; j < previous.size(); ++j) {
                const auto& a = previous[j];
                const auto& b = out.network.node_v[j];
                diff = std::max({diff, std::abs(a.pos - b.pos), std::abs(a.neg - b.neg), std::abs(a.zero - b.zero)});
                scale = std::max(scale, std::abs(b.pos));
            }
            if (diff <= cfg.tolerance * scale) return out;
        }
        previous = out.network.node_v;
        bool moved = false;
        for (std::size_t k = 0; k < spec.taps.size(); ++k) {
            const auto target =
                control_law(spec.taps[k], pen.values[k], out.network.node_v[out.network.tap_node[k]], cfg, sync_ref[k]);
            auto& cur = out.injections[k];
            const TapInjection next{cur.pos + cfg.damping * (target.pos - cur.pos), cur.neg + cfg.damping * (target.neg - cur.neg)};
            moved = moved || next.pos != cur.pos || next.neg != cur.neg;
            cur = next;
        }
        if (!moved) return out;
    }
    throw NoConvergence("inverter control fixed point did not converge within " + std::to_string(cfg.max_iterations) +
                        " iterations");
}

// Superposition split of every tap's positive-sequence injection into the
// part returning through the grid and the part entering the fault.
inline std::vector<TapSolution> split_tap_currents(const FeederSpec& spec, const std::optional<FaultSpec>& fault,
                                                   const SteadyState& ss) {
    std::vector<TapSolution> out(spec.taps.size());
    std::vector<TapInjection> single(spec.taps.size());
    for (std::size_t k = 0; k < spec.taps.size(); ++k) {
        single.assign(spec.taps.size(), TapInjection{});
        single[k].pos = ss.injections[k].pos;
        const auto part = solve_network(spec, fault, Phasor{}, single);
        out[k].injected = ss.injections[k].pos;
        out[k].injected_neg = ss.injections[k].neg;
        out[k].toward_grid = -part.source_i.pos;
        out[k].toward_fault = part.fault_i.pos;
        out[k].pcc_voltage = ss.network.node_v[ss.network.tap_node[k]].pos;
    }
    return out;
}

inline std::vector<TapInjection> nominal_injections(const FeederSpec& spec, const PenetrationVector& pen) {
    std::vector<TapInjection> inj(spec.taps.size());
    const Phasor unit = spec.source.emf / std::abs(spec.source.emf);
    for (std::size_t k = 0; k < spec.taps.size(); ++k) inj[k].pos = pen.values[k] * spec.taps[k].rated_power * unit;
    return inj;
}

}  // namespace detail

struct PrefaultSolution {
    ThreePhaseSet v;
    ThreePhaseSet i;
    std::vector<TapSolution> taps;
    SteadyState state;
};

/// Balanced pre-fault operating point with every tap at unity power factor.
inline PrefaultSolution solve_prefault(const FeederSpec& spec, const PenetrationVector& pen, const IbrControlConfig& cfg = {}) {
    require_valid(spec);
    validate(cfg);
    detail::check_penetration(spec, pen);
    PrefaultSolution out;
    const std::vector<Phasor> sync(spec.taps.size(), spec.source.emf / std::abs(spec.source.emf));
    out.state = detail::iterate_control(spec, std::nullopt, pen, cfg, detail::nominal_injections(spec, pen), sync);
    out.v = out.state.network.ied_v();
    out.i = out.state.network.ied_i();
    out.taps = detail::split_tap_currents(spec, std::nullopt, out.state);
    return out;
}

namespace detail {

inline SteadyState solve_fault_state(const FeederSpec& spec, const FaultSpec& fault, const PenetrationVector& pen,
                                     const IbrControlConfig& cfg, const PrefaultSolution& pre) {
    std::vector<Phasor> sync;
    for (std::size_t k = 0; k < spec.taps.size(); ++k) {
        const Phasor v = pre.state.network.node_v[pre.state.network.tap_node[k]].pos;
        sync.push_back(std::abs(v) > 0.0 ? v / std::abs(v) : Phasor{1.0, 0.0});
    }
    return iterate_control(spec, fault, pen, cfg, pre.state.injections, sync);
}

inline FaultSpec reference_fault() { return FaultSpec{FaultType::ABC, 1.0, 0.0, 0.0, 0.0}; }

}  // namespace detail

/// |I_a| at the IED for a bolted three-phase fault at the remote end.
inline double short_circuit_magnitude(const FeederSpec& spec, const PenetrationVector& pen, const IbrControlConfig& cfg = {}) {
    require_valid(spec);
    validate(cfg);
    detail::check_penetration(spec, pen);
    const auto pre = solve_prefault(spec, pen, cfg);
    const auto st = detail::solve_fault_state(spec, detail::reference_fault(), pen, cfg, pre);
    return std::abs(st.network.ied_i().a);
}

inline ScenarioRecord solve_fault(const FeederSpec& spec, const FaultSpec& fault, const PenetrationVector& pen,
                                  const IbrControlConfig& cfg = {}) {
    require_valid(spec);
    validate(cfg);
    detail::check_penetration(spec, pen);
    if (!(fault.distance >= 0.0 && fault.distance <= 1.0)) throw RangeError("fault distance outside [0,1]");
    if (!(fault.resistance >= 0.0)) throw RangeError("fault resistance must be non-negative");

    const auto pre = solve_prefault(spec, pen, cfg);
    const auto st = detail::solve_fault_state(spec, fault, pen, cfg, pre);

    ScenarioRecord rec;
    rec.fault = fault;
    rec.penetration = pen;
    rec.prefault_v = pre.v;
    rec.prefault_i = pre.i;
    rec.fault_v = st.network.ied_v();
    rec.fault_i = st.network.ied_i();
    rec.tap_solutions = detail::split_tap_currents(spec, fault, st);
    const auto ref = detail::reference_fault();
    if (fault.type == ref.type && fault.distance == ref.distance && fault.resistance == 0.0)
        rec.i_cc = std::abs(rec.fault_i.a);
    else
        rec.i_cc = std::abs(detail::solve_fault_state(spec, ref, pen, cfg, pre).network.ied_i().a);
    rec.segment_class = has_upstream_tap(spec, fault.distance) ? SegmentClass::secondary : SegmentClass::primary;
    return rec;
}

}  // namespace faultloc
