#pragma once

#include <cmath>
#include <complex>
#include <numbers>

#include "faultloc/error.hpp"

namespace faultloc {

/// Per-unit complex phasor. Angles are radians internally.
using Phasor = std::complex<double>;

inline bool is_finite(Phasor p) noexcept { return std::isfinite(p.real()) && std::isfinite(p.imag()); }

inline Phasor polar_deg(double magnitude, double angle_deg) {
    return std::polar(magnitude, angle_deg * std::numbers::pi / 180.0);
}

inline double angle_deg(Phasor p) { return std::arg(p) * 180.0 / std::numbers::pi; }

/// Unit phasor at +120 degrees.
inline constexpr Phasor kAlpha{-0.5, 0.8660254037844386};
inline constexpr Phasor kAlpha2{-0.5, -0.8660254037844386};

enum class Phase { a, b, c };
enum class Sequence { pos, neg, zero };

struct ThreePhaseSet {
    Phasor a{};
    Phasor b{};
    Phasor c{};

    Phasor operator[](Phase p) const noexcept {
        switch (p) {
            case Phase::a: return a;
            case Phase::b: return b;
            case Phase::c: return c;
        }
        return a;
    }

    bool finite() const noexcept { return is_finite(a) && is_finite(b) && is_finite(c); }

    friend ThreePhaseSet operator+(const ThreePhaseSet& x, const ThreePhaseSet& y) {
        return {x.a + y.a, x.b + y.b, x.c + y.c};
    }
    friend ThreePhaseSet operator-(const ThreePhaseSet& x, const ThreePhaseSet& y) {
        return {x.a - y.a, x.b - y.b, x.c - y.c};
    }
    friend ThreePhaseSet operator*(Phasor k, const ThreePhaseSet& x) { return {k * x.a, k * x.b, k * x.c}; }
    bool operator==(const ThreePhaseSet&) const = default;
};

struct SequenceSet {
    Phasor pos{};
    Phasor neg{};
    Phasor zero{};

    Phasor operator[](Sequence s) const noexcept {
        switch (s) {
            case Sequence::pos: return pos;
            case Sequence::neg: return neg;
            case Sequence::zero: return zero;
        }
        return pos;
    }

    bool finite() const noexcept { return is_finite(pos) && is_finite(neg) && is_finite(zero); }

    friend SequenceSet operator+(const SequenceSet& x, const SequenceSet& y) {
        return {x.pos + y.pos, x.neg + y.neg, x.zero + y.zero};
    }
    friend SequenceSet operator*(Phasor k, const SequenceSet& x) { return {k * x.pos, k * x.neg, k * x.zero}; }
    bool operator==(const SequenceSet&) const = default;
};

/// Total end-to-end line impedance per sequence.
struct SequenceImpedances {
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

    /// Builds a set with z2 = z1.
    static SequenceImpedances symmetric(Phasor z1, Phasor z0) { return {z1, z1, z0}; }
};

inline SequenceSet to_sequence(const ThreePhaseSet& abc) {
    if (!abc.finite()) throw InvalidInput("to_sequence: non-finite phase quantity");
    return {(abc.a + kAlpha * abc.b + kAlpha2 * abc.c) / 3.0,
            (abc.a + kAlpha2 * abc.b + kAlpha * abc.c) / 3.0,
            (abc.a + abc.b + abc.c) / 3.0};
}

inline ThreePhaseSet from_sequence(const SequenceSet& seq) {
    if (!seq.finite()) throw InvalidInput("from_sequence: non-finite sequence quantity");
    return {seq.zero + seq.pos + seq.neg,
            seq.zero + kAlpha2 * seq.pos + kAlpha * seq.neg,
            seq.zero + kAlpha * seq.pos + kAlpha2 * seq.neg};
}

/// Phase-x component of a positive- or negative-sequence quantity with unit a-phase value.
inline Phasor phase_weight(Sequence s, Phase x) noexcept {
    if (s == Sequence::zero || x == Phase::a) return 1.0;
    const bool b = x == Phase::b;
    if (s == Sequence::pos) return b ? kAlpha2 : kAlpha;
    return b ? kAlpha : kAlpha2;
}

/// K0 = Z0 / Z1.
inline Phasor zero_seq_factor(const SequenceImpedances& z) {
    if (std::abs(z.z1) == 0.0) throw DegenerateImpedance("zero_seq_factor: |z1| = 0");
    return z.z0 / z.z1;
}

}  // namespace faultloc
