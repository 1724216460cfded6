// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: `run` executes a configured sweep and writes
// results.csv plus a run_meta.json sidecar (and trace.csv when enabled);
// `aggregate` reduces a results file to per-cell statistics. Exit codes:
// 0 full success, 2 configuration/usage error or partial cell failure,
// 1 unexpected failure.
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "starbeam/experiment.hpp"
#include "starbeam/version.hpp"

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw starbeam::config_error("cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw starbeam::config_error("failed while writing '" + path.string() + "'");
}

int run_command(const std::string& config_path, const std::vector<std::string>& overrides,
                const std::optional<std::uint64_t>& seed, const std::string& out_dir, int jobs) {
    starbeam::FlatConfig flat;
    if (!config_path.empty()) flat = starbeam::FlatConfig::from_file(config_path);
    for (const std::string& spec : overrides) flat.set_override(spec);
    if (seed) flat.set_override("seed=" + std::to_string(*seed));
    const starbeam::ExperimentConfig cfg = starbeam::ExperimentConfig::from_flat(flat);

    const starbeam::SweepResult result = starbeam::run_sweep(cfg, jobs);

    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);

    std::ostringstream results;
    starbeam::write_results_csv(result, results);
    write_file(dir / "results.csv", results.str());

    const std::vector<std::string> failures = starbeam::cell_failures(result);
    nlohmann::json meta;
    meta["version"] = starbeam::library_version;
    meta["rows"] = result.rows.size();
    meta["cell_failures"] = failures;
    for (const auto& [key, value] : cfg.resolved()) meta["config"][key] = value;
    write_file(dir / "run_meta.json", meta.dump(2) + "\n");

    if (cfg.write_trace) {
        std::ostringstream trace;
        starbeam::write_trace_csv(result, trace);
        write_file(dir / "trace.csv", trace.str());
    }

    std::cout << "wrote " << result.rows.size() << " rows to " << (dir / "results.csv").string()
              << "\n";
    if (!failures.empty()) {
        for (const std::string& f : failures) std::cerr << "cell failed: " << f << "\n";
        std::cerr << failures.size() << " of " << result.rows.size() << " cells failed\n";
        return 2;
    }
    return 0;
}

int aggregate_command(const std::string& results_path, const std::string& out_path) {
    std::ifstream in(results_path);
    if (!in) throw starbeam::config_error("cannot open results file '" + results_path + "'");
    const starbeam::SweepResult result = starbeam::read_results_csv(in, results_path);
    const std::vector<starbeam::AggregateRow> rows = starbeam::aggregate_rows(result.rows);
    std::ostringstream os;
    starbeam::write_aggregate_csv(rows, os);
    write_file(out_path, os.str());
    std::cout << "wrote " << rows.size() << " aggregate rows to " << out_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"near-field beamforming experiments for simultaneously transmitting and "
                 "reflecting surfaces"};
    app.set_version_flag("--version", starbeam::library_version);
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "run a configured sweep and write CSV/JSON outputs");
    std::string config_path;
    std::string out_dir = "out";
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    int jobs = 1;
    run->add_option("--config", config_path, "flat key=value configuration file")
        ->check(CLI::ExistingFile);
    run->add_option("--seed", seed, "root seed (overrides the config value)");
    run->add_option("--out", out_dir, "output directory")->capture_default_str();
    run->add_option("--override", overrides, "KEY=VALUE configuration override (repeatable)");
    run->add_option("--jobs", jobs, "worker threads")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);

    auto* agg = app.add_subcommand("aggregate", "reduce a results.csv to per-cell statistics");
    std::string results_path;
    std::string agg_out = "aggregate.csv";
    agg->add_option("--results", results_path, "results.csv produced by the run subcommand")
        ->required();
    agg->add_option("--out", agg_out, "output CSV path")->capture_default_str();

    try {
        app.parse(argc, argv);
        if (run->parsed()) return run_command(config_path, overrides, seed, out_dir, jobs);
        return aggregate_command(results_path, agg_out);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const starbeam::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
