#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace faultloc;
using Kind = ValidationFinding::Kind;

namespace {

FeederSpec three_tap() {
    auto f = support::reference_feeder(0);
    f.taps = {{"A", 0.2, 0.1}, {"B", 0.5, 0.1}, {"C", 0.8, 0.1}};
    return f;
}

std::vector<double> positions(const std::vector<IbrTap>& taps) {
    std::vector<double> out;
    for (const auto& t : taps) out.push_back(t.position);
    return out;
}

}  // namespace

TEST(Validate, WellFormedFeeder) { EXPECT_TRUE(validate(support::reference_feeder()).empty()); }

TEST(Validate, DuplicatePosition) {
    auto f = support::reference_feeder();
    f.taps[2].position = f.taps[1].position;
    const auto r = validate(f);
    ASSERT_EQ(r.size(), 1u);
    EXPECT_EQ(r[0].kind, Kind::duplicate_position);
}

TEST(Validate, OutOfRangeTap) {
    auto f = support::reference_feeder(0);
    f.taps = {{"X", 1.2, 0.1}};
    const auto r = validate(f);
    ASSERT_EQ(r.size(), 1u);
    EXPECT_EQ(r[0].kind, Kind::out_of_range);
}

TEST(Validate, ReportsEveryViolation) {
    auto f = support::reference_feeder(0);
    f.line.z1 = 0.0;
    f.source.emf = 0.0;
    f.taps = {{"X", 0.6, -1.0}, {"Y", 0.4, 0.1}};
    const auto r = validate(f);
    std::vector<Kind> kinds;
    for (const auto& x : r) kinds.push_back(x.kind);
    EXPECT_EQ(kinds, (std::vector<Kind>{Kind::degenerate_line, Kind::bad_source, Kind::non_positive_power, Kind::not_ascending}));
    EXPECT_THROW(require_valid(f), ConfigError);
}

TEST(SegmentImpedance, Examples) {
    auto f = support::reference_feeder();
    f.line.z0 = {0.6, 1.2};
    EXPECT_EQ(segment_impedance(f, {0.0, 1.0}, Sequence::pos), f.line.z1);
    EXPECT_EQ(segment_impedance(f, {0.3, 0.3}, Sequence::zero), Phasor(0.0));
    const auto z = segment_impedance(f, {0.25, 0.75}, Sequence::zero);
    EXPECT_NEAR(z.real(), 0.5 * 0.6, 1e-15);
    EXPECT_NEAR(z.imag(), 0.5 * 1.2, 1e-15);
}

TEST(SegmentImpedance, InvalidSegment) {
    const auto f = support::reference_feeder();
    EXPECT_THROW(segment_impedance(f, {0.6, 0.4}, Sequence::pos), RangeError);
    EXPECT_THROW(segment_impedance(f, {-0.1, 0.4}, Sequence::pos), RangeError);
    EXPECT_THROW(segment_impedance(f, {0.1, 1.4}, Sequence::pos), RangeError);
}

TEST(SegmentImpedance, Additivity) {
    const auto f = support::reference_feeder();
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        double x[3] = {u(rng), u(rng), u(rng)};
        std::sort(x, x + 3);
        for (auto s : {Sequence::pos, Sequence::neg, Sequence::zero}) {
            const Phasor lhs = segment_impedance(f, {x[0], x[1]}, s) + segment_impedance(f, {x[1], x[2]}, s);
            const Phasor rhs = segment_impedance(f, {x[0], x[2]}, s);
            EXPECT_NEAR(std::abs(lhs - rhs), 0.0, 1e-12);
        }
    }
}

TEST(TapsUpstream, Examples) {
    const auto f = three_tap();
    EXPECT_TRUE(taps_upstream_of(f, 0.1).empty());
    EXPECT_EQ(positions(taps_upstream_of(f, 0.6)), (std::vector<double>{0.2, 0.5}));
    EXPECT_EQ(positions(taps_upstream_of(f, 0.5)), (std::vector<double>{0.2}));
    EXPECT_THROW(taps_upstream_of(f, 1.01), RangeError);
    EXPECT_THROW(taps_upstream_of(f, -0.01), RangeError);
}

TEST(TapsUpstream, Monotone) {
    const auto f = support::reference_feeder();
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 500; ++i) {
        double d1 = u(rng), d2 = u(rng);
        if (d1 > d2) std::swap(d1, d2);
        const auto a = positions(taps_upstream_of(f, d1));
        const auto b = positions(taps_upstream_of(f, d2));
        EXPECT_TRUE(std::includes(b.begin(), b.end(), a.begin(), a.end()));
        EXPECT_EQ(has_upstream_tap(f, d1), !a.empty());
    }
}

TEST(PerUnitBase, Conversions) {
    const PerUnitBase b{100.0, 34.5};
    EXPECT_NEAR(b.impedance_ohm(), 11.9025, 1e-12);
    EXPECT_NEAR(b.current_amp(), 1673.4790, 1e-3);
}
