#pragma once

// Benchmark protocol: run locators over scenario records, score location
// errors as a percentage of line length, and aggregate grouped statistics.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "faultloc/error.hpp"
#include "faultloc/feeder.hpp"
#include "faultloc/locators.hpp"
#include "faultloc/oracle.hpp"
#include "faultloc/parallel.hpp"
#include "faultloc/scenario.hpp"

namespace faultloc {

/// |clamp(d_hat) - d_true| in percent of line length; unconverged estimates score 100.
inline double error_pct(double d_hat, double d_true, bool converged = true) {
    if (!converged || !std::isfinite(d_hat)) return 100.0;
    return std::abs(std::clamp(d_hat, 0.0, 1.0) - d_true) * 100.0;
}

struct ErrorSample {
    std::size_t scenario_id = 0;
    Method method = Method::proposed;
    FaultType fault_type = FaultType::AG;
    double error_pct = 0.0;
    double penetration_total = 0.0;  // farm output as a fraction of total tap rating
    SegmentClass segment_class = SegmentClass::primary;
    bool converged = true;
    double d_true = 0.0;
    double d_hat = 0.0;
};

struct BenchmarkConfig {
    LocatorConfig locator;
    CurrentSource source = CurrentSource::practical_proxy;
};

inline double farm_output_fraction(const FeederSpec& spec, const PenetrationVector& pen) {
    double rated = 0.0, out = 0.0;
    for (std::size_t k = 0; k < spec.taps.size() && k < pen.values.size(); ++k) {
        rated += spec.taps[k].rated_power;
        out += spec.taps[k].rated_power * pen.values[k];
    }
    return rated > 0.0 ? out / rated : 0.0;
}

/// Reason a method is skipped on a record, or empty when it runs.
inline std::string skip_reason(Method m, const ScenarioRecord& rec, const BenchmarkConfig& cfg) {
    if (!is_applicable(m, rec.fault.type))
        return std::string(to_string(m)) + " not applicable to " + std::string(to_string(rec.fault.type));
    if (m == Method::proposed && cfg.source == CurrentSource::practical_proxy && !rec.proxy_available())
        return "pre-fault phasors unavailable for the practical proxy";
    if (m == Method::proposed && cfg.source == CurrentSource::ground_truth && rec.tap_solutions.empty())
        return "ground-truth tap currents unavailable";
    return {};
}

/// One sample per (record, applicable method), ordered by record then method list order.
inline std::vector<ErrorSample> run_benchmark(std::span<const ScenarioRecord> records, std::span<const Method> methods,
                                              const FeederSpec& spec, const BenchmarkConfig& cfg = {}) {
    if (records.empty()) throw ConfigError("run_benchmark: no records");
    if (methods.empty()) throw ConfigError("run_benchmark: no methods");
    std::vector<std::vector<ErrorSample>> per_record(records.size());
    parallel_for(records.size(), [&](std::size_t r) {
        const auto& rec = records[r];
        for (auto m : methods) {
            if (!skip_reason(m, rec, cfg).empty()) continue;
            ErrorSample s;
            s.scenario_id = rec.scenario_id;
            s.method = m;
            s.fault_type = rec.fault.type;
            s.penetration_total = farm_output_fraction(spec, rec.penetration);
            s.segment_class = rec.segment_class;
            s.d_true = rec.fault.distance;
            try {
                const auto est = locate(m, rec, spec, cfg.locator, cfg.source);
                s.converged = est.converged;
                s.d_hat = est.d_hat;
            } catch (const SingularLoop&) {
                s.converged = false;
                s.d_hat = std::nan("");
            }
            s.error_pct = error_pct(s.d_hat, s.d_true, s.converged);
            per_record[r].push_back(s);
        }
    });
    std::vector<ErrorSample> out;
    for (auto& v : per_record) out.insert(out.end(), v.begin(), v.end());
    return out;
}

enum class GroupKey { method, fault_type, fault_class, penetration_bin, segment_class };

inline std::string_view to_string(GroupKey k) {
    switch (k) {
        case GroupKey::method: return "method";
        case GroupKey::fault_type: return "fault_type";
        case GroupKey::fault_class: return "fault_class";
        case GroupKey::penetration_bin: return "penetration_bin";
        case GroupKey::segment_class: return "segment_class";
    }
    return "?";
}

inline GroupKey parse_group_key(std::string_view text) {
    for (auto k : {GroupKey::method, GroupKey::fault_type, GroupKey::fault_class, GroupKey::penetration_bin, GroupKey::segment_class})
        if (text == to_string(k)) return k;
    throw ConfigError("unknown group key '" + std::string(text) + "'");
}

/// Decile of farm output, 0..9.
inline int penetration_decile(double fraction) { return std::clamp(static_cast<int>(std::floor(fraction * 10.0)), 0, 9); }

struct BoxStats {
    std::size_t count = 0;
    double mean = 0.0;
    double min = 0.0;
    double max = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double whisker_lo = 0.0;  // Tukey, 1.5 IQR
    double whisker_hi = 0.0;
};

inline BoxStats box_stats(std::vector<double> v) {
    if (v.empty()) throw InsufficientData("box_stats of an empty group");
    std::sort(v.begin(), v.end());
    BoxStats s;
    s.count = v.size();
    // Summation in sorted order keeps the mean independent of input order.
    s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    s.min = v.front();
    s.max = v.back();
    s.q1 = percentile_sorted(v, 25.0);
    s.median = percentile_sorted(v, 50.0);
    s.q3 = percentile_sorted(v, 75.0);
    const double iqr = s.q3 - s.q1;
    const double lo_fence = s.q1 - 1.5 * iqr, hi_fence = s.q3 + 1.5 * iqr;
    s.whisker_lo = *std::lower_bound(v.begin(), v.end(), lo_fence);
    s.whisker_hi = *(std::upper_bound(v.begin(), v.end(), hi_fence) - 1);
    s.mean = std::clamp(s.mean, s.min, s.max);  // rounding
    return s;
}

struct ErrorGroup {
    std::vector<std::pair<std::string, std::string>> key;
    BoxStats stats;
};

struct ErrorTable {
    std::vector<GroupKey> group_by;
    std::vector<ErrorGroup> groups;  // ordered by key
};

inline std::string group_value(GroupKey k, const ErrorSample& s) {
    switch (k) {
        case GroupKey::method: return std::string(to_string(s.method));
        case GroupKey::fault_type: return std::string(to_string(s.fault_type));
        case GroupKey::fault_class: return std::string(to_string(fault_class(s.fault_type)));
        case GroupKey::penetration_bin: return std::to_string(penetration_decile(s.penetration_total));
        case GroupKey::segment_class: return std::string(to_string(s.segment_class));
    }
    return {};
}

inline ErrorTable aggregate(std::span<const ErrorSample> samples, std::span<const GroupKey> group_by) {
    if (samples.empty()) throw ConfigError("aggregate: no samples");
    if (group_by.empty()) throw ConfigError("aggregate: empty group set");
    std::map<std::vector<std::string>, std::vector<double>> buckets;
    for (const auto& s : samples) {
        std::vector<std::string> key;
        for (auto k : group_by) key.push_back(group_value(k, s));
        buckets[key].push_back(s.error_pct);
    }
    ErrorTable table;
    table.group_by.assign(group_by.begin(), group_by.end());
    for (auto& [key, values] : buckets) {
        ErrorGroup g;
        for (std::size_t i = 0; i < key.size(); ++i) g.key.emplace_back(to_string(group_by[i]), key[i]);
        g.stats = box_stats(std::move(values));
        table.groups.push_back(std::move(g));
    }
    return table;
}

}  // namespace faultloc
