#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "faultloc/error.hpp"
#include "faultloc/phasor.hpp"

namespace faultloc {

struct IbrTap {
    std::string id;
    double position = 0.0;      // per-unit distance from the IED
    double rated_power = 0.0;   // per-unit on the system MVA base
};

/// Thevenin equivalent of the grid behind the IED bus.
struct GridSource {
    Phasor emf{1.0, 0.0};
    Phasor z1{};
    Phasor z2{};
    Phasor z0{};

    Phasor operator[](Sequence s) const noexcept {
        switch (s) {
            case Sequence::pos: return z1;
            case Sequence::neg: return z2;
            case Sequence::zero: return z0;
        }
        return z1;
    }
};

struct PerUnitBase {
    double mva = 100.0;
    double kv = 34.5;

    double impedance_ohm() const noexcept { return kv * kv / mva; }
    double current_amp() const noexcept { return mva * 1e3 / (std::sqrt(3.0) * kv); }
};

struct FeederSpec {
    std::string name;
    PerUnitBase base;
    SequenceImpedances line;
    std::vector<IbrTap> taps;   // ascending by position
    GridSource source;

    std::size_t tap_count() const noexcept { return taps.size(); }
};

struct Segment {
    double from = 0.0;
    double to = 0.0;
};

struct ValidationFinding {
    enum class Kind { out_of_range, duplicate_position, not_ascending, non_positive_power, degenerate_line, bad_source, bad_base };
    Kind kind;
    std::string detail;
};

using ValidationReport = std::vector<ValidationFinding>;

inline ValidationReport validate(const FeederSpec& spec) {
    using Kind = ValidationFinding::Kind;
    ValidationReport report;
    if (!(std::abs(spec.line.z1) > 0.0) || !is_finite(spec.line.z1) || !is_finite(spec.line.z2) || !is_finite(spec.line.z0))
        report.push_back({Kind::degenerate_line, "line z1 must be finite and non-zero"});
    if (!(std::abs(spec.source.emf) > 0.0) || !is_finite(spec.source.emf))
        report.push_back({Kind::bad_source, "source emf must be finite and non-zero"});
    if (!(spec.base.mva > 0.0) || !(spec.base.kv > 0.0))
        report.push_back({Kind::bad_base, "base_mva and base_kv must be positive"});
    for (std::size_t k = 0; k < spec.taps.size(); ++k) {
        const auto& tap = spec.taps[k];
        if (!(tap.position > 0.0 && tap.position < 1.0))
            report.push_back({Kind::out_of_range, "tap '" + tap.id + "' position " + std::to_string(tap.position) + " outside (0,1)"});
        if (!(tap.rated_power > 0.0))
            report.push_back({Kind::non_positive_power, "tap '" + tap.id + "' rated_power must be positive"});
        if (k > 0) {
            const auto& prev = spec.taps[k - 1];
            if (tap.position == prev.position)
                report.push_back({Kind::duplicate_position, "taps '" + prev.id + "' and '" + tap.id + "' share a position"});
            else if (tap.position < prev.position)
                report.push_back({Kind::not_ascending, "tap '" + tap.id + "' is out of order"});
        }
    }
    return report;
}

inline void require_valid(const FeederSpec& spec) {
    const auto report = validate(spec);
    if (!report.empty()) throw ConfigError("invalid feeder '" + spec.name + "': " + report.front().detail);
}

inline Phasor segment_impedance(const FeederSpec& spec, Segment seg, Sequence s) {
    if (!(0.0 <= seg.from && seg.from <= seg.to && seg.to <= 1.0))
        throw RangeError("segment_impedance: segment must satisfy 0 <= from <= to <= 1");
    return (seg.to - seg.from) * spec.line[s];
}

/// Taps with position strictly below d, ascending.
inline std::vector<IbrTap> taps_upstream_of(const FeederSpec& spec, double d) {
    if (!(d >= 0.0 && d <= 1.0)) throw RangeError("taps_upstream_of: distance outside [0,1]");
    std::vector<IbrTap> out;
    for (const auto& tap : spec.taps)
        if (tap.position < d) out.push_back(tap);
    return out;
}

inline bool has_upstream_tap(const FeederSpec& spec, double d) {
    return std::any_of(spec.taps.begin(), spec.taps.end(), [d](const IbrTap& t) { return t.position < d; });
}

}  // namespace faultloc
