#pragma once

#include <complex>
#include <random>

#include "faultloc/faultloc.hpp"

namespace support {

using faultloc::Phasor;

// Five equally rated taps on a 34.5 kV cable feeder behind a stiff-ish grid.
inline faultloc::FeederSpec reference_feeder(std::size_t taps = 5) {
    faultloc::FeederSpec f;
    f.name = "reference";
    f.base = {100.0, 34.5};
    f.line = faultloc::SequenceImpedances::symmetric({0.126, 0.378}, {0.38, 1.13});
    f.source = {Phasor{1.0, 0.0}, {0.0, 0.05}, {0.0, 0.05}, {0.0, 0.05}};
    const double pos[] = {0.3, 0.45, 0.6, 0.75, 0.9};
    for (std::size_t k = 0; k < taps && k < 5; ++k) f.taps.push_back({"WT" + std::to_string(k + 1), pos[k], 0.042});
    return f;
}

inline faultloc::PenetrationVector uniform(const faultloc::FeederSpec& f, double p) {
    return {std::vector<double>(f.taps.size(), p)};
}

inline Phasor random_phasor(std::mt19937_64& rng, double scale = 2.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    return {u(rng), u(rng)};
}

inline faultloc::ThreePhaseSet random_set(std::mt19937_64& rng, double scale = 2.0) {
    return {random_phasor(rng, scale), random_phasor(rng, scale), random_phasor(rng, scale)};
}

inline faultloc::FaultSpec fault(faultloc::FaultType t, double d, double rf = 0.0) {
    faultloc::FaultSpec f;
    f.type = t;
    f.distance = d;
    f.resistance = rf;
    return f;
}

}  // namespace support
