#pragma once

#include <array>
#include <string>
#include <string_view>

#include "faultloc/error.hpp"
#include "faultloc/phasor.hpp"

namespace faultloc {

enum class FaultType { AG, BG, CG, AB, BC, CA, ABG, BCG, CAG, ABC };

enum class FaultClass { SLG, LL, DLG, P3 };

inline constexpr std::array<FaultType, 10> kAllFaultTypes{FaultType::AG,  FaultType::BG,  FaultType::CG,  FaultType::AB,
                                                           FaultType::BC,  FaultType::CA,  FaultType::ABG, FaultType::BCG,
                                                           FaultType::CAG, FaultType::ABC};

inline std::string_view to_string(FaultType t) {
    switch (t) {
        case FaultType::AG: return "AG";
        case FaultType::BG: return "BG";
        case FaultType::CG: return "CG";
        case FaultType::AB: return "AB";
        case FaultType::BC: return "BC";
        case FaultType::CA: return "CA";
        case FaultType::ABG: return "ABG";
        case FaultType::BCG: return "BCG";
        case FaultType::CAG: return "CAG";
        case FaultType::ABC: return "ABC";
    }
    return "?";
}

inline std::string_view to_string(FaultClass c) {
    switch (c) {
        case FaultClass::SLG: return "SLG";
        case FaultClass::LL: return "LL";
        case FaultClass::DLG: return "DLG";
        case FaultClass::P3: return "3P";
    }
    return "?";
}

/// Accepts "AG", "ag", "A-G", "AB-G" and "3P" spellings.
inline FaultType parse_fault_type(std::string_view text) {
    std::string key;
    for (char ch : text) {
        if (ch == '-' || ch == '_' || ch == ' ') continue;
        key.push_back(static_cast<char>(ch >= 'a' && ch <= 'z' ? ch - 'a' + 'A' : ch));
    }
    if (key == "3P" || key == "3PH" || key == "ABCG") return FaultType::ABC;
    for (auto t : kAllFaultTypes)
        if (key == to_string(t)) return t;
    throw UnsupportedType("unknown fault type '" + std::string(text) + "'");
}

inline FaultClass fault_class(FaultType t) {
    switch (t) {
        case FaultType::AG:
        case FaultType::BG:
        case FaultType::CG: return FaultClass::SLG;
        case FaultType::AB:
        case FaultType::BC:
        case FaultType::CA: return FaultClass::LL;
        case FaultType::ABG:
        case FaultType::BCG:
        case FaultType::CAG: return FaultClass::DLG;
        case FaultType::ABC: return FaultClass::P3;
    }
    return FaultClass::P3;
}

inline bool involves_ground(FaultType t) {
    const auto c = fault_class(t);
    return c == FaultClass::SLG || c == FaultClass::DLG;
}

/// Faulted phase(s) in loop order: the single phase, or the ordered pair of a
/// phase-pair loop (AB -> a,b; CA -> c,a). ABC uses its configured pair elsewhere.
struct LoopPhases {
    Phase first;
    Phase second;
    bool pair;
};

inline LoopPhases loop_phases(FaultType t) {
    switch (t) {
        case FaultType::AG: return {Phase::a, Phase::a, false};
        case FaultType::BG: return {Phase::b, Phase::b, false};
        case FaultType::CG: return {Phase::c, Phase::c, false};
        case FaultType::AB:
        case FaultType::ABG:
        case FaultType::ABC: return {Phase::a, Phase::b, true};
        case FaultType::BC:
        case FaultType::BCG: return {Phase::b, Phase::c, true};
        case FaultType::CA:
        case FaultType::CAG: return {Phase::c, Phase::a, true};
    }
    return {Phase::a, Phase::a, false};
}

}  // namespace faultloc
