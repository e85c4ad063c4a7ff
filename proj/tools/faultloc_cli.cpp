// faultloc command line: calibrate, simulate, montecarlo, locate, report.
// Exit codes: 0 success, 1 configuration error, 2 parse error, 3 non-convergence.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "faultloc/faultloc.hpp"

namespace fl = faultloc;

namespace {

enum Exit { kOk = 0, kConfig = 1, kParse = 2, kNoConvergence = 3 };

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');)
        if (!item.empty()) out.push_back(item);
    return out;
}

std::optional<std::uint64_t> env_seed() {
    const char* s = std::getenv("FAULTLOC_SEED");
    if (!s || !*s) return std::nullopt;
    char* end = nullptr;
    const auto v = std::strtoull(s, &end, 10);
    if (*end != '\0') throw fl::ConfigError("FAULTLOC_SEED must be an unsigned integer");
    return v;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw fl::ConfigError("cannot write '" + path + "'");
    return out;
}

int cmd_calibrate(double r_max, std::size_t draws, std::size_t taps) {
    const double delta = fl::calibrate_delta(r_max);
    std::printf("delta %.9f\n", delta);
    std::printf("analytic_correlation %.12f\n", fl::analytic_correlation(delta));
    if (draws >= 2) {
        std::mt19937_64 rng(env_seed().value_or(1));
        std::vector<fl::PenetrationDraw> sample;
        sample.reserve(draws);
        for (std::size_t s = 0; s < draws; ++s) sample.push_back(fl::sample_penetration(rng, delta, taps));
        const auto corr = fl::penetration_correlations(sample);
        for (std::size_t i = 0; i < corr.size(); ++i)
            std::printf("turbine %zu pre_clip %.6f post_clip %.6f\n", i + 1, corr[i].pre_clip, corr[i].post_clip);
    }
    return kOk;
}

int cmd_simulate(const std::string& feeder_path, const std::string& scenarios_path, const std::string& out_path) {
    const auto spec = fl::load_feeder(feeder_path);
    const auto file = fl::parse_scenarios(fl::read_json_file(scenarios_path), spec);
    std::vector<fl::ScenarioRecord> records(file.scenarios.size());
    fl::parallel_for(records.size(), [&](std::size_t s) {
        const auto& req = file.scenarios[s];
        records[s] = fl::solve_fault(spec, req.fault, req.penetration, file.control);
        records[s].scenario_id = req.scenario_id.value_or(s);
    });
    fl::export_records(out_path, fl::header_for(spec), records);
    std::fprintf(stderr, "simulate: %zu records written to %s\n", records.size(), out_path.c_str());
    return kOk;
}

int cmd_montecarlo(const std::string& feeder_path, const std::string& config_path, const std::string& out_path,
                   const std::string& trace_path) {
    const auto spec = fl::load_feeder(feeder_path);
    auto cfg = fl::parse_mc_config(fl::read_json_file(config_path), spec);
    if (auto seed = env_seed()) cfg.seed = *seed;
    const auto result = fl::run_until_converged(spec, cfg);
    fl::export_records(out_path, fl::header_for(spec), result.records);
    if (!trace_path.empty()) {
        auto out = open_out(trace_path);
        fl::write_trace_csv(out, result.trace, spec.base.current_amp());
    }
    std::fprintf(stderr, "montecarlo: %zu scenarios, delta %.6f, seed %llu\n", result.records.size(), result.delta,
                 static_cast<unsigned long long>(cfg.seed));
    if (result.unconverged_warning) {
        std::fprintf(stderr, "warning: resolution did not reach %.3f A within %zu scenarios\n", cfg.tol_amps, cfg.max_scenarios);
        return kNoConvergence;
    }
    std::fprintf(stderr, "montecarlo: converged at n = %zu\n", *result.trace.converged_at);
    return kOk;
}

int cmd_locate(const std::string& records_path, const std::string& feeder_path, const std::string& methods_text,
               const std::string& source_text, const std::string& out_path) {
    const auto spec = fl::load_feeder(feeder_path);
    const auto file = fl::ingest_records(records_path, &spec);
    std::vector<fl::Method> methods;
    for (const auto& m : split_list(methods_text)) methods.push_back(fl::parse_method(m));
    fl::BenchmarkConfig cfg;
    if (source_text == "proxy") cfg.source = fl::CurrentSource::practical_proxy;
    else if (source_text == "truth") cfg.source = fl::CurrentSource::ground_truth;
    else throw fl::ConfigError("--current-source must be 'proxy' or 'truth'");

    std::size_t skipped = 0;
    for (const auto& r : file.records)
        for (auto m : methods)
            if (const auto why = fl::skip_reason(m, r, cfg); !why.empty()) {
                if (skipped++ < 5) std::fprintf(stderr, "skip scenario %zu %s: %s\n", r.scenario_id, std::string(fl::to_string(m)).c_str(), why.c_str());
            }
    const auto samples = fl::run_benchmark(file.records, methods, spec, cfg);
    auto out = open_out(out_path);
    fl::write_samples_csv(out, samples);
    std::size_t unconverged = 0;
    for (const auto& s : samples) unconverged += s.converged ? 0 : 1;
    std::fprintf(stderr, "locate: %zu samples (%zu skipped, %zu unconverged)\n", samples.size(), skipped, unconverged);
    return kOk;
}

int cmd_report(const std::string& errors_path, const std::string& group_text, const std::string& out_path) {
    std::ifstream in(errors_path);
    if (!in) throw fl::ConfigError("cannot open '" + errors_path + "'");
    const auto samples = fl::read_samples_csv(in);
    std::vector<fl::GroupKey> keys;
    for (const auto& k : split_list(group_text)) keys.push_back(fl::parse_group_key(k));
    const auto table = fl::aggregate(samples, keys);
    const auto j = fl::table_to_json(table);
    if (out_path.empty() || out_path == "-") {
        std::cout << j.dump(2) << '\n';
    } else {
        auto out = open_out(out_path);
        out << j.dump(2) << '\n';
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"One-terminal fault location on feeders with inverter taps"};
    app.require_subcommand(1);

    double r_max = 0.97;
    std::size_t draws = 0, corr_taps = 5;
    auto* calibrate = app.add_subcommand("calibrate", "Turbine dispersion half-width for a correlation bound");
    calibrate->add_option("--rmax", r_max, "Turbine/farm correlation bound")->required();
    calibrate->add_option("--draws", draws, "Also report empirical correlations over this many draws");
    calibrate->add_option("--taps", corr_taps, "Turbines per draw");

    std::string feeder, scenarios, out, config, trace, records, methods = "takz,takz_new,takn,taks,reactance,impedance,proposed",
                                                           source = "proxy", errors, group_by = "method,fault_type";
    auto* simulate = app.add_subcommand("simulate", "Solve listed fault scenarios");
    simulate->add_option("--feeder", feeder)->required();
    simulate->add_option("--scenarios", scenarios)->required();
    simulate->add_option("--out", out)->required();

    auto* montecarlo = app.add_subcommand("montecarlo", "Generate scenarios until the short-circuit resolution converges");
    montecarlo->add_option("--feeder", feeder)->required();
    montecarlo->add_option("--config", config)->required();
    montecarlo->add_option("--out", out)->required();
    montecarlo->add_option("--trace", trace);

    auto* locate = app.add_subcommand("locate", "Run locators over a record file");
    locate->add_option("--records", records)->required();
    locate->add_option("--feeder", feeder)->required();
    locate->add_option("--methods", methods);
    locate->add_option("--current-source", source)->check(CLI::IsMember({"proxy", "truth"}));
    locate->add_option("--out", out)->required();

    auto* report = app.add_subcommand("report", "Aggregate error samples");
    report->add_option("--errors", errors)->required();
    report->add_option("--group-by", group_by);
    report->add_option("--out", out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfig;
    }

    try {
        if (*calibrate) return cmd_calibrate(r_max, draws, corr_taps);
        if (*simulate) return cmd_simulate(feeder, scenarios, out);
        if (*montecarlo) return cmd_montecarlo(feeder, config, out, trace);
        if (*locate) return cmd_locate(records, feeder, methods, source, out);
        if (*report) return cmd_report(errors, group_by, out);
    } catch (const fl::ParseError& e) {
        std::fprintf(stderr, "parse error: %s\n", e.what());
        return kParse;
    } catch (const fl::NoConvergence& e) {
        std::fprintf(stderr, "no convergence: %s\n", e.what());
        return kNoConvergence;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kConfig;
    }
    return kConfig;
}
