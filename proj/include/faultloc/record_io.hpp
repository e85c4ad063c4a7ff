#pragma once

// File formats: feeder and Monte Carlo configs (JSON), scenario records
// (JSON Lines with a header line), error samples (CSV), error tables (JSON)
// and convergence traces (CSV). Complex values are always [re, im].

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "faultloc/bench.hpp"
#include "faultloc/error.hpp"
#include "faultloc/feeder.hpp"
#include "faultloc/oracle.hpp"
#include "faultloc/scenario.hpp"

namespace faultloc {

using ojson = nlohmann::ordered_json;

inline constexpr std::string_view kRecordFormat = "collector-faultloc/1";

namespace detail {

// Tracks the current line and the dotted field path for parse errors.
struct ParseContext {
    std::size_t line = 1;

    [[noreturn]] void fail(const std::string& field, const std::string& what) const { throw ParseError(line, field, what); }

    const ojson& at(const ojson& obj, const std::string& key, const std::string& path) const {
        if (!obj.is_object()) fail(path, "expected an object");
        auto it = obj.find(key);
        if (it == obj.end()) fail(path.empty() ? key : path + "." + key, "missing");
        return *it;
    }

    double number(const ojson& v, const std::string& field) const {
        if (!v.is_number()) fail(field, "expected a number");
        return v.get<double>();
    }

    Phasor complex(const ojson& v, const std::string& field) const {
        if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
            fail(field, "expected a complex value [re, im]");
        return {v[0].get<double>(), v[1].get<double>()};
    }

    ThreePhaseSet three_phase(const ojson& v, const std::string& field) const {
        if (!v.is_array() || v.size() != 3) fail(field, "expected three complex values");
        return {complex(v[0], field + "[0]"), complex(v[1], field + "[1]"), complex(v[2], field + "[2]")};
    }
};

inline ojson to_json(Phasor p) { return ojson::array({p.real(), p.imag()}); }

inline ojson to_json(const ThreePhaseSet& s) { return ojson::array({to_json(s.a), to_json(s.b), to_json(s.c)}); }

}  // namespace detail

// ---------------------------------------------------------------- feeder

inline FeederSpec parse_feeder(const ojson& j) {
    detail::ParseContext ctx;
    FeederSpec spec;
    spec.name = j.value("name", std::string{});
    spec.base.mva = ctx.number(ctx.at(j, "base_mva", ""), "base_mva");
    spec.base.kv = ctx.number(ctx.at(j, "base_kv", ""), "base_kv");
    const auto& line = ctx.at(j, "line", "");
    spec.line.z1 = ctx.complex(ctx.at(line, "z1", "line"), "line.z1");
    spec.line.z2 = line.contains("z2") ? ctx.complex(line["z2"], "line.z2") : spec.line.z1;
    spec.line.z0 = ctx.complex(ctx.at(line, "z0", "line"), "line.z0");
    const auto& src = ctx.at(j, "source", "");
    spec.source.emf = ctx.complex(ctx.at(src, "emf", "source"), "source.emf");
    spec.source.z1 = ctx.complex(ctx.at(src, "z1", "source"), "source.z1");
    spec.source.z2 = src.contains("z2") ? ctx.complex(src["z2"], "source.z2") : spec.source.z1;
    spec.source.z0 = ctx.complex(ctx.at(src, "z0", "source"), "source.z0");
    if (j.contains("taps")) {
        if (!j["taps"].is_array()) ctx.fail("taps", "expected an array");
        for (std::size_t k = 0; k < j["taps"].size(); ++k) {
            const auto& t = j["taps"][k];
            const std::string path = "taps[" + std::to_string(k) + "]";
            IbrTap tap;
            tap.id = t.value("id", "T" + std::to_string(k + 1));
            tap.position = ctx.number(ctx.at(t, "position", path), path + ".position");
            tap.rated_power = ctx.number(ctx.at(t, "rated_power", path), path + ".rated_power");
            spec.taps.push_back(tap);
        }
    }
    return spec;
}

inline ojson feeder_to_json(const FeederSpec& spec) {
    ojson j;
    j["name"] = spec.name;
    j["base_mva"] = spec.base.mva;
    j["base_kv"] = spec.base.kv;
    j["line"] = {{"z1", detail::to_json(spec.line.z1)}, {"z2", detail::to_json(spec.line.z2)}, {"z0", detail::to_json(spec.line.z0)}};
    j["source"] = {{"emf", detail::to_json(spec.source.emf)},
                   {"z1", detail::to_json(spec.source.z1)},
                   {"z2", detail::to_json(spec.source.z2)},
                   {"z0", detail::to_json(spec.source.z0)}};
    j["taps"] = ojson::array();
    for (const auto& t : spec.taps) j["taps"].push_back({{"id", t.id}, {"position", t.position}, {"rated_power", t.rated_power}});
    return j;
}

inline ojson read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    try {
        return ojson::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(1, path, e.what());
    }
}

/// Loads and validates a feeder file.
inline FeederSpec load_feeder(const std::string& path) {
    auto spec = parse_feeder(read_json_file(path));
    require_valid(spec);
    return spec;
}

// ---------------------------------------------------------------- control / Monte Carlo config

inline IbrControlConfig parse_control(const ojson& j) {
    IbrControlConfig c;
    if (j.is_null()) return c;
    c.current_limit = j.value("current_limit", c.current_limit);
    c.ride_through_threshold = j.value("ride_through_threshold", c.ride_through_threshold);
    c.reactive_gain = j.value("reactive_gain", c.reactive_gain);
    c.negative_seq_injection = j.value("negative_seq_injection", c.negative_seq_injection);
    c.max_iterations = j.value("max_iterations", c.max_iterations);
    c.tolerance = j.value("tolerance", c.tolerance);
    c.damping = j.value("damping", c.damping);
    c.pll_lock_voltage = j.value("pll_lock_voltage", c.pll_lock_voltage);
    validate(c);
    return c;
}

/// Parses a Monte Carlo config; per-unit resistances are derived from the feeder base.
inline McConfig parse_mc_config(const ojson& j, const FeederSpec& spec) {
    McConfig c;
    try {
        c.r_max = j.value("r_max", c.r_max);
        c.n_taps = j.value("n_taps", spec.taps.size());
        if (j.contains("fault_locations")) c.fault_locations = j["fault_locations"].get<std::vector<double>>();
        if (j.contains("fault_types")) {
            c.fault_types.clear();
            for (const auto& t : j["fault_types"]) c.fault_types.push_back(parse_fault_type(t.get<std::string>()));
        }
        if (j.contains("resistances_ohm")) c.resistances_ohm = j["resistances_ohm"].get<std::vector<double>>();
        if (j.contains("resistances_pu")) {
            c.resistances = j["resistances_pu"].get<std::vector<double>>();
            if (!j.contains("resistances_ohm")) c.resistances_ohm.clear();
        }
        if (j.contains("inception_angles")) c.inception_angles = j["inception_angles"].get<std::vector<double>>();
        c.tol_amps = j.value("tol_amps", c.tol_amps);
        c.percentile = j.value("percentile", c.percentile);
        c.seed = j.value("seed", c.seed);
        c.max_scenarios = j.value("max_scenarios", c.max_scenarios);
        c.min_scenarios = j.value("min_scenarios", c.min_scenarios);
        c.batch = j.value("batch", c.batch);
        c.equal_penetration = j.value("equal_penetration", c.equal_penetration);
        if (j.contains("control")) c.control = parse_control(j["control"]);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("Monte Carlo config: ") + e.what());
    }
    c = resolve_config(std::move(c), spec);
    validate(c);
    return c;
}

// ---------------------------------------------------------------- scenario records

struct RecordHeader {
    std::string format{kRecordFormat};
    double base_mva = 0.0;
    double base_kv = 0.0;
    std::string feeder;
};

inline RecordHeader header_for(const FeederSpec& spec) { return {std::string(kRecordFormat), spec.base.mva, spec.base.kv, spec.name}; }

inline ojson record_to_json(const ScenarioRecord& r) {
    ojson j;
    j["scenario_id"] = r.scenario_id;
    ojson fault;
    fault["type"] = std::string(to_string(r.fault.type));
    fault["distance"] = r.fault.distance;
    fault["resistance_pu"] = r.fault.resistance;
    fault["resistance_ohm"] = r.fault.resistance_ohm ? ojson(*r.fault.resistance_ohm) : ojson(nullptr);
    fault["inception_deg"] = r.fault.inception_deg;
    j["fault"] = std::move(fault);
    j["penetration"] = r.penetration.values;
    if (r.prefault_v) j["prefault_v"] = detail::to_json(*r.prefault_v);
    if (r.prefault_i) j["prefault_i"] = detail::to_json(*r.prefault_i);
    j["fault_v"] = detail::to_json(r.fault_v);
    j["fault_i"] = detail::to_json(r.fault_i);
    if (!r.tap_solutions.empty()) {
        ojson taps = ojson::array();
        for (const auto& t : r.tap_solutions) {
            taps.push_back({{"injected", detail::to_json(t.injected)},
                            {"toward_grid", detail::to_json(t.toward_grid)},
                            {"toward_fault", detail::to_json(t.toward_fault)},
                            {"pcc_voltage", detail::to_json(t.pcc_voltage)},
                            {"injected_neg", detail::to_json(t.injected_neg)}});
        }
        j["tap_solutions"] = std::move(taps);
    }
    j["i_cc"] = r.i_cc;
    j["segment_class"] = std::string(to_string(r.segment_class));
    return j;
}

inline ScenarioRecord record_from_json(const ojson& j, std::size_t line) {
    detail::ParseContext ctx{line};
    ScenarioRecord r;
    const auto& id = ctx.at(j, "scenario_id", "");
    if (!id.is_number_unsigned()) ctx.fail("scenario_id", "expected a non-negative integer");
    r.scenario_id = id.get<std::size_t>();
    const auto& f = ctx.at(j, "fault", "");
    const auto& type = ctx.at(f, "type", "fault");
    if (!type.is_string()) ctx.fail("fault.type", "expected a string");
    try {
        r.fault.type = parse_fault_type(type.get<std::string>());
    } catch (const UnsupportedType& e) {
        ctx.fail("fault.type", e.what());
    }
    r.fault.distance = ctx.number(ctx.at(f, "distance", "fault"), "fault.distance");
    if (!(r.fault.distance >= 0.0 && r.fault.distance <= 1.0)) ctx.fail("fault.distance", "outside [0,1]");
    r.fault.resistance = ctx.number(ctx.at(f, "resistance_pu", "fault"), "fault.resistance_pu");
    if (f.contains("resistance_ohm") && !f["resistance_ohm"].is_null())
        r.fault.resistance_ohm = ctx.number(f["resistance_ohm"], "fault.resistance_ohm");
    r.fault.inception_deg = f.contains("inception_deg") ? ctx.number(f["inception_deg"], "fault.inception_deg") : 0.0;
    const auto& pen = ctx.at(j, "penetration", "");
    if (!pen.is_array()) ctx.fail("penetration", "expected an array");
    for (std::size_t i = 0; i < pen.size(); ++i) r.penetration.values.push_back(ctx.number(pen[i], "penetration[" + std::to_string(i) + "]"));
    if (j.contains("prefault_v")) r.prefault_v = ctx.three_phase(j["prefault_v"], "prefault_v");
    if (j.contains("prefault_i")) r.prefault_i = ctx.three_phase(j["prefault_i"], "prefault_i");
    r.fault_v = ctx.three_phase(ctx.at(j, "fault_v", ""), "fault_v");
    r.fault_i = ctx.three_phase(ctx.at(j, "fault_i", ""), "fault_i");
    if (j.contains("tap_solutions")) {
        const auto& taps = j["tap_solutions"];
        if (!taps.is_array()) ctx.fail("tap_solutions", "expected an array");
        for (std::size_t k = 0; k < taps.size(); ++k) {
            const std::string p = "tap_solutions[" + std::to_string(k) + "]";
            TapSolution t;
            t.injected = ctx.complex(ctx.at(taps[k], "injected", p), p + ".injected");
            t.toward_grid = ctx.complex(ctx.at(taps[k], "toward_grid", p), p + ".toward_grid");
            t.toward_fault = ctx.complex(ctx.at(taps[k], "toward_fault", p), p + ".toward_fault");
            t.pcc_voltage = ctx.complex(ctx.at(taps[k], "pcc_voltage", p), p + ".pcc_voltage");
            if (taps[k].contains("injected_neg")) t.injected_neg = ctx.complex(taps[k]["injected_neg"], p + ".injected_neg");
            r.tap_solutions.push_back(t);
        }
    }
    r.i_cc = ctx.number(ctx.at(j, "i_cc", ""), "i_cc");
    const auto& seg = ctx.at(j, "segment_class", "");
    if (seg == "primary") r.segment_class = SegmentClass::primary;
    else if (seg == "secondary") r.segment_class = SegmentClass::secondary;
    else ctx.fail("segment_class", "expected 'primary' or 'secondary'");
    return r;
}

inline void export_records(std::ostream& out, const RecordHeader& header, std::span<const ScenarioRecord> records) {
    ojson h;
    h["format"] = header.format;
    h["base_mva"] = header.base_mva;
    h["base_kv"] = header.base_kv;
    h["feeder"] = header.feeder;
    out << h.dump() << '\n';
    for (const auto& r : records) out << record_to_json(r).dump() << '\n';
}

struct RecordFile {
    RecordHeader header;
    std::vector<ScenarioRecord> records;
};

inline RecordFile ingest_records(std::istream& in) {
    RecordFile file;
    std::string text;
    std::size_t line = 0;
    bool have_header = false;
    while (std::getline(in, text)) {
        ++line;
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        ojson j;
        try {
            j = ojson::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(line, "<line>", std::string("malformed JSON: ") + e.what());
        }
        if (!have_header) {
            detail::ParseContext ctx{line};
            const auto& fmt = ctx.at(j, "format", "");
            if (!fmt.is_string() || fmt.get<std::string>() != kRecordFormat)
                ctx.fail("format", "expected '" + std::string(kRecordFormat) + "'");
            file.header.format = fmt.get<std::string>();
            file.header.base_mva = ctx.number(ctx.at(j, "base_mva", ""), "base_mva");
            file.header.base_kv = ctx.number(ctx.at(j, "base_kv", ""), "base_kv");
            file.header.feeder = j.value("feeder", std::string{});
            have_header = true;
            continue;
        }
        file.records.push_back(record_from_json(j, line));
    }
    if (!have_header) throw ParseError(line == 0 ? 1 : line, "format", "missing header line");
    return file;
}

/// Rejects records whose per-unit bases differ from the feeder's.
inline void check_bases(const RecordHeader& header, const FeederSpec& spec) {
    const auto close = [](double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(std::abs(a), std::abs(b)); };
    if (!close(header.base_mva, spec.base.mva) || !close(header.base_kv, spec.base.kv))
        throw UnitError("record bases (" + std::to_string(header.base_mva) + " MVA, " + std::to_string(header.base_kv) +
                        " kV) differ from feeder bases (" + std::to_string(spec.base.mva) + " MVA, " +
                        std::to_string(spec.base.kv) + " kV)");
}

inline RecordFile ingest_records(const std::string& path, const FeederSpec* spec = nullptr) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    auto file = ingest_records(in);
    if (spec) check_bases(file.header, *spec);
    return file;
}

inline void export_records(const std::string& path, const RecordHeader& header, std::span<const ScenarioRecord> records) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    export_records(out, header, records);
}

// ---------------------------------------------------------------- scenario list (simulate)

struct ScenarioRequest {
    FaultSpec fault;
    PenetrationVector penetration;
    std::optional<std::size_t> scenario_id;
};

struct ScenarioFile {
    IbrControlConfig control;
    std::vector<ScenarioRequest> scenarios;
};

inline ScenarioFile parse_scenarios(const ojson& j, const FeederSpec& spec) {
    detail::ParseContext ctx;
    ScenarioFile file;
    if (j.contains("control")) file.control = parse_control(j["control"]);
    const auto& list = ctx.at(j, "scenarios", "");
    if (!list.is_array()) ctx.fail("scenarios", "expected an array");
    const double zb = spec.base.impedance_ohm();
    for (std::size_t s = 0; s < list.size(); ++s) {
        const auto& e = list[s];
        const std::string p = "scenarios[" + std::to_string(s) + "]";
        ScenarioRequest req;
        if (e.contains("scenario_id")) req.scenario_id = e["scenario_id"].get<std::size_t>();
        const auto& f = ctx.at(e, "fault", p);
        try {
            req.fault.type = parse_fault_type(ctx.at(f, "type", p + ".fault").get<std::string>());
        } catch (const UnsupportedType& ex) {
            throw ConfigError(p + ".fault.type: " + ex.what());
        }
        req.fault.distance = ctx.number(ctx.at(f, "distance", p + ".fault"), p + ".fault.distance");
        if (f.contains("resistance_ohm")) {
            req.fault.resistance_ohm = ctx.number(f["resistance_ohm"], p + ".fault.resistance_ohm");
            req.fault.resistance = *req.fault.resistance_ohm / zb;
        } else {
            req.fault.resistance = f.contains("resistance_pu") ? ctx.number(f["resistance_pu"], p + ".fault.resistance_pu") : 0.0;
        }
        req.fault.inception_deg = f.value("inception_deg", 0.0);
        if (e.contains("penetration")) {
            const auto& pen = e["penetration"];
            if (pen.is_number()) req.penetration.values.assign(spec.taps.size(), pen.get<double>());
            else req.penetration.values = pen.get<std::vector<double>>();
        } else {
            req.penetration.values.assign(spec.taps.size(), 1.0);
        }
        file.scenarios.push_back(std::move(req));
    }
    return file;
}

// ---------------------------------------------------------------- error samples, tables, traces

inline void write_samples_csv(std::ostream& out, std::span<const ErrorSample> samples) {
    out << "scenario_id,method,fault_type,error_pct,penetration_total,segment_class,converged,d_true,d_hat\n";
    out << std::setprecision(17);
    for (const auto& s : samples) {
        out << s.scenario_id << ',' << to_string(s.method) << ',' << to_string(s.fault_type) << ',' << s.error_pct << ','
            << s.penetration_total << ',' << to_string(s.segment_class) << ',' << (s.converged ? 1 : 0) << ',' << s.d_true
            << ',' << s.d_hat << '\n';
    }
}

inline std::vector<ErrorSample> read_samples_csv(std::istream& in) {
    std::vector<ErrorSample> out;
    std::string text;
    std::size_t line = 0;
    if (!std::getline(in, text)) throw ParseError(1, "<header>", "empty samples file");
    ++line;
    static const std::string kHeader = "scenario_id,method,fault_type,error_pct,penetration_total,segment_class,converged,d_true,d_hat";
    if (text != kHeader && text != kHeader + "\r") throw ParseError(1, "<header>", "unexpected columns");
    static const char* kNames[] = {"scenario_id", "method",    "fault_type", "error_pct", "penetration_total",
                                   "segment_class", "converged", "d_true",     "d_hat"};
    while (std::getline(in, text)) {
        ++line;
        if (!text.empty() && text.back() == '\r') text.pop_back();
        if (text.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(text);
        for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
        if (cells.size() != 9) throw ParseError(line, "<row>", "expected 9 columns");
        std::size_t col = 0;
        const auto num = [&](std::size_t c) {
            col = c;
            const auto& cell = cells[c];
            if (cell == "nan" || cell == "-nan") return std::numeric_limits<double>::quiet_NaN();
            std::size_t used = 0;
            double v = std::stod(cell, &used);
            if (used != cell.size()) throw std::invalid_argument("trailing characters");
            return v;
        };
        try {
            ErrorSample s;
            col = 0;
            s.scenario_id = std::stoull(cells[0]);
            col = 1;
            s.method = parse_method(cells[1]);
            col = 2;
            s.fault_type = parse_fault_type(cells[2]);
            s.error_pct = num(3);
            s.penetration_total = num(4);
            col = 5;
            if (cells[5] == "primary") s.segment_class = SegmentClass::primary;
            else if (cells[5] == "secondary") s.segment_class = SegmentClass::secondary;
            else throw std::invalid_argument("bad segment class");
            col = 6;
            if (cells[6] != "0" && cells[6] != "1") throw std::invalid_argument("expected 0 or 1");
            s.converged = cells[6] == "1";
            s.d_true = num(7);
            s.d_hat = num(8);
            out.push_back(s);
        } catch (const std::exception& e) {
            throw ParseError(line, kNames[col], e.what());
        }
    }
    return out;
}

inline ojson table_to_json(const ErrorTable& t) {
    ojson j;
    j["error_definition"] = "abs(clamp(d_hat,0,1) - d_true) * 100, percent of line length; unconverged estimates score 100";
    j["whiskers"] = "Tukey, 1.5 IQR";
    j["group_by"] = ojson::array();
    for (auto k : t.group_by) j["group_by"].push_back(std::string(to_string(k)));
    j["groups"] = ojson::array();
    for (const auto& g : t.groups) {
        ojson row;
        for (const auto& [k, v] : g.key) row[k] = v;
        row["count"] = g.stats.count;
        row["mean"] = g.stats.mean;
        row["min"] = g.stats.min;
        row["q1"] = g.stats.q1;
        row["median"] = g.stats.median;
        row["q3"] = g.stats.q3;
        row["max"] = g.stats.max;
        row["whisker_lo"] = g.stats.whisker_lo;
        row["whisker_hi"] = g.stats.whisker_hi;
        j["groups"].push_back(std::move(row));
    }
    return j;
}

inline void write_trace_csv(std::ostream& out, const ConvergenceTrace& trace, double amp_base) {
    out << "n,epsilon_p\n" << std::setprecision(17);
    for (std::size_t i = 0; i < trace.epsilon.size(); ++i) {
        const double e = trace.epsilon[i];
        out << (i + 1) << ',';
        if (std::isinf(e)) out << "inf";
        else out << e * amp_base;
        out << '\n';
    }
}

}  // namespace faultloc
