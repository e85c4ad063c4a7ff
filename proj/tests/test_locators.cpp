#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace faultloc;
using support::fault;
using support::reference_feeder;
using support::uniform;

namespace {

void expect_near(Phasor a, Phasor b, double tol = 1e-12) {
    EXPECT_NEAR(a.real(), b.real(), tol);
    EXPECT_NEAR(a.imag(), b.imag(), tol);
}

const ThreePhaseSet kV{{0.7, -0.1}, {-0.5, -0.8}, {-0.4, 0.9}};
const ThreePhaseSet kI{{2.1, -1.3}, {-0.3, 0.2}, {0.1, 0.4}};
const ThreePhaseSet kPre{{-0.2, 0.01}, {0.09, 0.17}, {0.11, -0.18}};

ScenarioRecord scaled(const ScenarioRecord& r, Phasor k) {
    auto out = r;
    out.fault_v = k * r.fault_v;
    out.fault_i = k * r.fault_i;
    if (r.prefault_v) out.prefault_v = k * *r.prefault_v;
    if (r.prefault_i) out.prefault_i = k * *r.prefault_i;
    for (auto& t : out.tap_solutions) {
        t.injected *= k, t.injected_neg *= k, t.toward_grid *= k, t.toward_fault *= k, t.pcc_voltage *= k;
    }
    return out;
}

}  // namespace

TEST(SelectLoop, GroundRowWithUnitK0) {
    LocatorConfig literal;
    literal.residual = ResidualCompensation::table_literal;
    const auto loop = select_loop(FaultType::AG, kV, kI, kPre, 1.0, literal);
    const Phasor i0 = (kI.a + kI.b + kI.c) / 3.0;
    EXPECT_EQ(loop.v_loop, kV.a);
    expect_near(loop.i_loop, kI.a + i0);
    // The default weights the residual by K0 - 1, so K0 = 1 leaves I_a.
    expect_near(select_loop(FaultType::AG, kV, kI, kPre, 1.0).i_loop, kI.a);
}

TEST(SelectLoop, PhasePairRow) {
    const auto loop = select_loop(FaultType::AB, kV, kI, kPre, 3.0);
    EXPECT_EQ(loop.v_loop, kV.a - kV.b);
    EXPECT_EQ(loop.i_loop, kI.a - kI.b);
    // IED current is positive into the line; the proxy is the inverter output seen at the bus.
    EXPECT_EQ(loop.i_w_proxy, -(kPre.a - kPre.b));
    EXPECT_TRUE(loop.proxy_available);
}

TEST(SelectLoop, DoubleGroundRow) {
    const Phasor k0{2.9, -0.1};
    LocatorConfig literal;
    literal.residual = ResidualCompensation::table_literal;
    const Phasor i0 = (kI.a + kI.b + kI.c) / 3.0;
    expect_near(select_loop(FaultType::ABG, kV, kI, kPre, k0, literal).i_loop, kI.a + kI.b + 2.0 * k0 * i0);
    expect_near(select_loop(FaultType::ABG, kV, kI, kPre, k0).i_loop, kI.a + kI.b + 2.0 * (k0 - 1.0) * i0);
    EXPECT_EQ(select_loop(FaultType::ABG, kV, kI, kPre, k0).v_loop, kV.a + kV.b);
}

TEST(SelectLoop, EveryRowUsesItsPhases) {
    const Phasor k0 = 2.0;
    const Phasor i0 = (kI.a + kI.b + kI.c) / 3.0;
    EXPECT_EQ(select_loop(FaultType::BG, kV, kI, kPre, k0).v_loop, kV.b);
    expect_near(select_loop(FaultType::CG, kV, kI, kPre, k0).i_loop, kI.c + i0);
    EXPECT_EQ(select_loop(FaultType::BC, kV, kI, kPre, k0).v_loop, kV.b - kV.c);
    EXPECT_EQ(select_loop(FaultType::CA, kV, kI, kPre, k0).i_loop, kI.c - kI.a);
    EXPECT_EQ(select_loop(FaultType::CAG, kV, kI, kPre, k0).v_loop, kV.c + kV.a);
    EXPECT_EQ(select_loop(FaultType::ABC, kV, kI, kPre, k0).v_loop, kV.a - kV.b);
    LocatorConfig bc;
    bc.three_phase_loop = FaultType::BC;
    EXPECT_EQ(select_loop(FaultType::ABC, kV, kI, kPre, k0, bc).v_loop, kV.b - kV.c);
    bc.three_phase_loop = FaultType::AG;
    EXPECT_THROW(select_loop(FaultType::ABC, kV, kI, kPre, k0, bc), ConfigError);
}

TEST(SelectLoop, PolarizationPerFaultClass) {
    const Phasor k0 = 2.0;
    EXPECT_EQ(select_loop(FaultType::AG, kV, kI, kPre, k0).i_polarizing, kI.a + kI.b + kI.c);
    EXPECT_EQ(select_loop(FaultType::BCG, kV, kI, kPre, k0).i_polarizing, kI.a + kI.b + kI.c);
    // Negative-sequence polarizer of an AB loop: the a-b difference of a pure negative-sequence set.
    const Phasor i2 = to_sequence(kI).neg;
    const auto neg = from_sequence({0.0, i2, 0.0});
    const auto ll = select_loop(FaultType::AB, kV, kI, kPre, k0);
    expect_near(ll.i_polarizing, 3.0 * i2 / (std::conj(neg.a / i2) - std::conj(neg.b / i2)));
    const auto p3 = select_loop(FaultType::ABC, kV, kI, kPre, k0);
    EXPECT_EQ(p3.i_polarizing, (kI.a - kI.b) - (kPre.a - kPre.b));
    EXPECT_FALSE(p3.polarizing_fallback);
    const auto nopre = select_loop(FaultType::ABC, kV, kI, std::nullopt, k0);
    EXPECT_TRUE(nopre.polarizing_fallback);
    EXPECT_EQ(nopre.i_polarizing, nopre.i_loop);
    EXPECT_FALSE(nopre.proxy_available);
}

TEST(CompensationVoltage, Examples) {
    const Phasor z1{0.0, 1.0};
    EXPECT_EQ(compensation_voltage(0.3, {{0.3, 0.6}, {1.0, 1.0}, z1}), Phasor(0.0));
    expect_near(compensation_voltage(0.8, {{0.5}, {1.0}, z1}), {0.0, -0.3});
    const Phasor i{0.4, -0.2}, z{0.1, 0.3};
    expect_near(compensation_voltage(0.6, {{0.2, 0.5}, {i, i}, z}), -z * i * (0.4 + 0.1));
    EXPECT_THROW(compensation_voltage(0.6, {{0.2, 0.5}, {i}, z}), InvalidInput);
    EXPECT_THROW(compensation_voltage(1.2, {{0.2}, {i}, z}), RangeError);
}

TEST(PracticalProxy, Examples) {
    LoopQuantities loop;
    loop.i_w_proxy = 3.0;
    EXPECT_EQ(practical_proxy_currents(loop, 3), (std::vector<Phasor>{1.0, 1.0, 1.0}));
    EXPECT_EQ(practical_proxy_currents(loop, 1), (std::vector<Phasor>{3.0}));
    EXPECT_TRUE(practical_proxy_currents(loop, 0).empty());
    const auto ag = select_loop(FaultType::AG, kV, kI, kPre, 2.0);
    const auto split = practical_proxy_currents(ag, 4);
    expect_near(split[2], -kPre.a / 4.0);
}

TEST(EstimateOnce, Examples) {
    const Phasor z1{0.0, 1.0};
    LoopQuantities loop;
    loop.i_loop = 1.0;
    loop.i_polarizing = 1.0;
    loop.v_loop = 0.3 * z1;
    EXPECT_NEAR(estimate_distance_once(loop, 0.0, z1), 0.3, 1e-15);
    loop.v_loop += 0.7 * loop.i_polarizing;
    EXPECT_NEAR(estimate_distance_once(loop, 0.0, z1), 0.3, 1e-15);
    loop.i_polarizing = 0.0;
    EXPECT_THROW(estimate_distance_once(loop, 0.0, z1), SingularLoop);
}

TEST(LocateCompensated, NoUpstreamTapsIsUncompensated) {
    const auto f = reference_feeder();
    for (auto type : kAllFaultTypes) {
        for (double d : {0.05, 0.2, 0.28}) {
            const auto rec = solve_fault(f, fault(type, d, 0.15), uniform(f, 0.7));
            const auto counterpart = uncompensated_counterpart(type);
            const auto base = locate_classical(counterpart, rec, f);
            for (auto src : {CurrentSource::ground_truth, CurrentSource::practical_proxy}) {
                const auto est = locate_compensated(rec, f, {}, src);
                EXPECT_EQ(est.d_hat, base.d_hat) << to_string(type) << " d=" << d;
            }
        }
    }
}

TEST(LocateCompensated, GroundTruthRecoversDistance) {
    const auto f = reference_feeder();
    for (auto type : {FaultType::AG, FaultType::CG, FaultType::ABG, FaultType::BCG}) {
        for (double d : {0.35, 0.5, 0.66, 0.8, 1.0}) {
            for (double rf : {0.0, 0.5, 4.0}) {
                const auto rec = solve_fault(f, fault(type, d, rf), uniform(f, 0.8));
                const auto est = locate_compensated(rec, f, {}, CurrentSource::ground_truth);
                EXPECT_TRUE(est.converged);
                EXPECT_NEAR(est.d_hat, d, 1e-6) << to_string(type) << " d=" << d << " rf=" << rf;
                EXPECT_LE(est.iterations, static_cast<int>(f.taps.size()) + 2);
            }
        }
    }
}

TEST(LocateCompensated, ProxyBeatsZeroSequenceTakagi) {
    const auto f = reference_feeder();
    for (double d : {0.5, 0.7, 0.95}) {
        const auto rec = solve_fault(f, fault(FaultType::AG, d, 0.4), uniform(f, 0.8));
        const auto prop = locate_compensated(rec, f, {}, CurrentSource::practical_proxy);
        const auto takz = locate_classical(Method::takz, rec, f);
        const double ep = std::abs(prop.d_hat - d), eb = std::abs(takz.d_hat - d);
        EXPECT_GT(ep, 0.0);
        EXPECT_LT(ep, eb);
    }
}

TEST(LocateCompensated, MissingData) {
    const auto f = reference_feeder();
    auto rec = solve_fault(f, fault(FaultType::AG, 0.7), uniform(f, 0.8));
    auto no_truth = rec;
    no_truth.tap_solutions.clear();
    EXPECT_THROW(locate_compensated(no_truth, f, {}, CurrentSource::ground_truth), InvalidInput);
    rec.prefault_i.reset();
    EXPECT_THROW(locate_compensated(rec, f, {}, CurrentSource::practical_proxy), InvalidInput);
    rec.tap_solutions.pop_back();
    EXPECT_THROW(locate_compensated(rec, f, {}, CurrentSource::practical_proxy), InvalidInput);
}

TEST(LocateClassical, BoltedNoTapsEveryMethodExact) {
    const auto f = reference_feeder(0);
    for (auto type : kAllFaultTypes) {
        for (double d : {0.15, 0.5, 0.9}) {
            const auto rec = solve_fault(f, fault(type, d), {{}});
            for (auto m : kAllMethods) {
                if (!is_applicable(m, type)) continue;
                const auto est = locate(m, rec, f, {}, CurrentSource::practical_proxy);
                EXPECT_NEAR(est.d_hat, d, 1e-9) << to_string(m) << " " << to_string(type);
            }
        }
    }
}

TEST(LocateClassical, ReactanceOverreachesWithInfeed) {
    const auto f = reference_feeder();
    const auto rec = solve_fault(f, fault(FaultType::AG, 0.7, 0.5), uniform(f, 1.0));
    EXPECT_GT(locate_classical(Method::reactance, rec, f).d_hat, 0.7);
}

TEST(LocateClassical, Applicability) {
    const auto f = reference_feeder();
    const auto ll = solve_fault(f, fault(FaultType::AB, 0.5), uniform(f, 0.5));
    EXPECT_THROW(locate_classical(Method::takz, ll, f), UnsupportedType);
    EXPECT_THROW(locate_classical(Method::takz_new, ll, f), UnsupportedType);
    EXPECT_THROW(locate_classical(Method::proposed, ll, f), UnsupportedType);
    const auto p3 = solve_fault(f, fault(FaultType::ABC, 0.5), uniform(f, 0.5));
    EXPECT_THROW(locate_classical(Method::takn, p3, f), UnsupportedType);
    EXPECT_NO_THROW(locate_classical(Method::taks, p3, f));
    EXPECT_EQ(reference_baseline(FaultType::ABC), Method::reactance);
    EXPECT_EQ(reference_baseline(FaultType::CAG), Method::takz_new);
    EXPECT_EQ(parse_method("takz_new"), Method::takz_new);
    EXPECT_THROW(parse_method("mho"), ConfigError);
}

TEST(LocateClassical, ClampsAndFlags) {
    const auto f = reference_feeder();
    const auto rec = solve_fault(f, fault(FaultType::AG, 0.95, 4.0), uniform(f, 1.0));
    const auto est = locate_classical(Method::impedance, rec, f);
    EXPECT_EQ(est.d_hat, 1.0);
    EXPECT_TRUE(est.clamped);
}

TEST(LocatorProperties, PiecewiseLinearFixedPoint) {
    const auto f = reference_feeder();
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 300; ++i) {
        const auto type = kAllFaultTypes[i % kAllFaultTypes.size()];
        const auto rec = solve_fault(f, fault(type, u(rng), 0.3 * u(rng)), uniform(f, u(rng)));
        for (auto src : {CurrentSource::ground_truth, CurrentSource::practical_proxy}) {
            const auto est = locate_compensated(rec, f, {}, src);
            EXPECT_TRUE(est.converged);
            EXPECT_LE(est.iterations, static_cast<int>(f.taps.size()) + 2);
        }
    }
}

TEST(LocatorProperties, SubstitutionReachesSameFixedPoint) {
    const auto f = reference_feeder();
    LocatorConfig sub;
    sub.update = CompensationUpdate::substitution;
    for (double d : {0.5, 0.8}) {
        const auto rec = solve_fault(f, fault(FaultType::AG, d, 0.2), uniform(f, 0.6));
        const auto est = locate_compensated(rec, f, sub, CurrentSource::ground_truth);
        EXPECT_TRUE(est.converged);
        EXPECT_NEAR(est.d_hat, d, 1e-5);
    }
}

TEST(LocatorProperties, Homogeneity) {
    const auto f = reference_feeder();
    std::mt19937_64 rng(22);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 60; ++i) {
        const auto type = kAllFaultTypes[i % kAllFaultTypes.size()];
        const auto rec = solve_fault(f, fault(type, u(rng), 0.5 * u(rng)), uniform(f, u(rng)));
        const Phasor k = std::polar(0.1 + 5.0 * u(rng), 6.28 * u(rng));
        const auto other = scaled(rec, k);
        for (auto m : kAllMethods) {
            if (!is_applicable(m, type)) continue;
            for (auto src : {CurrentSource::ground_truth, CurrentSource::practical_proxy}) {
                const double a = locate(m, rec, f, {}, src).d_hat, b = locate(m, other, f, {}, src).d_hat;
                EXPECT_NEAR(a, b, 1e-9) << to_string(m) << " " << to_string(type);
            }
        }
    }
}

TEST(LocatorProperties, GroundLoopResidualAtEstimate) {
    const auto f = reference_feeder();
    const Phasor z1 = f.line.z1, k0 = zero_seq_factor(f.line);
    for (auto type : {FaultType::BG, FaultType::ABG}) {
        for (double d : {0.55, 0.85}) {
            const double rf = 0.7;
            const auto rec = solve_fault(f, fault(type, d, rf), uniform(f, 0.9));
            const auto est = locate_compensated(rec, f, {}, CurrentSource::ground_truth);
            const auto loop = select_loop(type, rec.fault_v, rec.fault_i, rec.prefault_i, k0);
            const auto shape = detail::loop_shape(type, {});
            CompensationInput comp{{}, {}, z1};
            for (std::size_t k = 0; k < f.taps.size(); ++k) {
                comp.tap_positions.push_back(f.taps[k].position);
                comp.tap_currents.push_back(detail::tap_loop_current(shape, rec.tap_solutions[k]));
            }
            const Phasor drop = loop.v_loop + compensation_voltage(est.d_hat, comp) - est.d_hat * z1 * loop.i_loop;
            // What remains is the fault-path term, R_F times 3I0 for SLG.
            if (type == FaultType::BG) {
                EXPECT_LT(std::abs(drop - rf * loop.i_polarizing), 1e-9);
            }
            // Imaginary-part residual against the polarizer vanishes for both types.
            EXPECT_LT(std::abs(std::imag(drop * std::conj(loop.i_polarizing))), 1e-9);
        }
    }
}
