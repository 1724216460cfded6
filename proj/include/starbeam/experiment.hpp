// SPDX-License-Identifier: Apache-2.0
//
// Experiment driver: flat key=value configuration, deterministic sweeps over
// transmit power or surface size, CSV emission, and aggregation. Channel
// realizations are keyed by (seed, trial) only, so every variant within a
// trial sees the same links and comparisons are paired. Row order is fixed by
// the task list, independent of how many worker threads execute it.
#ifndef STARBEAM_EXPERIMENT_HPP
#define STARBEAM_EXPERIMENT_HPP

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <type_traits>
#include <utility>
#include <vector>

#include "starbeam/bcd.hpp"
#include "starbeam/channel.hpp"
#include "starbeam/geometry.hpp"
#include "starbeam/rng.hpp"
#include "starbeam/types.hpp"
#include "starbeam/version.hpp"

namespace starbeam {

// Configuration / input errors; the CLI maps these to exit code 2.
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string trim(std::string s) {
    const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
    size_t b = 0, e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return s.substr(b, e - b);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

template <typename T>
T parse_scalar(const std::string& text, const std::string& what, const std::string& origin) {
    const std::string t = detail::trim(text);
    if constexpr (std::is_floating_point_v<T>) {
        // from_chars covers the full strtod grammar, including the nan that
        // failed cells leave in result files; stream extraction rejects it.
        T value{};
        const char* b = t.data();
        const char* e = b + t.size();
        if (b != e && *b == '+') ++b;
        const auto r = std::from_chars(b, e, value);
        if (r.ec != std::errc{} || r.ptr != e)
            throw config_error(origin + ": cannot parse '" + text + "' as " + what);
        return value;
    } else {
        std::istringstream in(t);
        T value{};
        in >> value;
        if (in.fail() || !(in >> std::ws).eof())
            throw config_error(origin + ": cannot parse '" + text + "' as " + what);
        return value;
    }
}

}  // namespace detail

// Flat key=value store. Lines are `key = value`, `#` starts a comment, keys
// may repeat only via overrides (which win). Every key must be consumed by
// the experiment config, otherwise require_all_used reports it with its
// file:line origin.
class FlatConfig {
  public:
    FlatConfig() = default;

    static FlatConfig from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw config_error("cannot open config file '" + path + "'");
        FlatConfig cfg;
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const std::string origin = path + ":" + std::to_string(lineno);
            const size_t hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const std::string text = detail::trim(line);
            if (text.empty()) continue;
            const size_t eq = text.find('=');
            if (eq == std::string::npos)
                throw config_error(origin + ": expected 'key = value'");
            const std::string key = detail::trim(text.substr(0, eq));
            const std::string value = detail::trim(text.substr(eq + 1));
            if (key.empty()) throw config_error(origin + ": empty key");
            const auto prev = cfg.entries_.find(key);
            if (prev != cfg.entries_.end())
                throw config_error(origin + ": duplicate key '" + key + "' (first set at " +
                                   prev->second.origin + ")");
            cfg.entries_[key] = Entry{value, origin, false};
        }
        return cfg;
    }

    // KEY=VALUE from the command line; replaces any file value.
    void set_override(const std::string& spec) {
        const size_t eq = spec.find('=');
        if (eq == std::string::npos || detail::trim(spec.substr(0, eq)).empty())
            throw config_error("override '" + spec + "': expected KEY=VALUE");
        entries_[detail::trim(spec.substr(0, eq))] =
            Entry{detail::trim(spec.substr(eq + 1)), "override '" + spec + "'", false};
    }

    std::string get_string(const std::string& key, std::string fallback) {
        const auto it = entries_.find(key);
        if (it == entries_.end()) return fallback;
        it->second.used = true;
        return it->second.value;
    }

    template <typename T>
    T get_scalar(const std::string& key, T fallback, const char* what) {
        const auto it = entries_.find(key);
        if (it == entries_.end()) return fallback;
        it->second.used = true;
        return detail::parse_scalar<T>(it->second.value, what,
                                       it->second.origin + ": key '" + key + "'");
    }

    double get_double(const std::string& key, double fallback) {
        return get_scalar<double>(key, fallback, "a real number");
    }
    int get_int(const std::string& key, int fallback) {
        return get_scalar<int>(key, fallback, "an integer");
    }
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) {
        return get_scalar<std::uint64_t>(key, fallback, "an unsigned integer");
    }

    bool get_bool(const std::string& key, bool fallback) {
        const auto it = entries_.find(key);
        if (it == entries_.end()) return fallback;
        it->second.used = true;
        const std::string v = it->second.value;
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        throw config_error(it->second.origin + ": key '" + key + "': cannot parse '" + v +
                           "' as a boolean");
    }

    template <typename T>
    std::vector<T> get_list(const std::string& key, std::vector<T> fallback, const char* what) {
        const auto it = entries_.find(key);
        if (it == entries_.end()) return fallback;
        it->second.used = true;
        std::vector<T> out;
        for (const std::string& part : detail::split(it->second.value, ','))
            out.push_back(detail::parse_scalar<T>(
                part, what, it->second.origin + ": key '" + key + "'"));
        return out;
    }

    std::vector<std::string> get_string_list(const std::string& key,
                                             std::vector<std::string> fallback) {
        const auto it = entries_.find(key);
        if (it == entries_.end()) return fallback;
        it->second.used = true;
        std::vector<std::string> out;
        for (const std::string& part : detail::split(it->second.value, ','))
            out.push_back(detail::trim(part));
        return out;
    }

    void require_all_used() const {
        for (const auto& [key, entry] : entries_)
            if (!entry.used)
                throw config_error(entry.origin + ": unknown key '" + key + "'");
    }

  private:
    struct Entry {
        std::string value;
        std::string origin;
        bool used = false;
    };
    std::map<std::string, Entry> entries_;
};

enum class SweepKind { power, elements };

inline const char* sweep_tag(SweepKind s) { return s == SweepKind::power ? "power_dbm" : "elements"; }

struct VariantSpec {
    Algorithm algorithm = Algorithm::pen;
    Protocol protocol = Protocol::es;
    BaselineKind baseline = BaselineKind::star_ris;
};

// Variant tags look like pen_es, ele_ms, ele_es_conventional, ele_es_uniform,
// ele_es_farfield.
inline VariantSpec parse_variant(const std::string& tag) {
    const std::vector<std::string> parts = detail::split(tag, '_');
    if (parts.size() < 2 || parts.size() > 3)
        throw config_error("variant '" + tag + "': expected algorithm_protocol[_baseline]");
    VariantSpec v;
    if (parts[0] == "pen")
        v.algorithm = Algorithm::pen;
    else if (parts[0] == "ele")
        v.algorithm = Algorithm::ele;
    else
        throw config_error("variant '" + tag + "': unknown algorithm '" + parts[0] + "'");
    if (parts[1] == "es")
        v.protocol = Protocol::es;
    else if (parts[1] == "ms")
        v.protocol = Protocol::ms;
    else
        throw config_error("variant '" + tag + "': unknown protocol '" + parts[1] + "'");
    if (parts.size() == 3) {
        if (parts[2] == "conventional")
            v.baseline = BaselineKind::conventional_ris;
        else if (parts[2] == "uniform")
            v.baseline = BaselineKind::uniform_es;
        else if (parts[2] == "farfield")
            v.baseline = BaselineKind::far_field_design;
        else
            throw config_error("variant '" + tag + "': unknown baseline '" + parts[2] + "'");
    }
    if (v.baseline == BaselineKind::uniform_es && v.protocol != Protocol::es)
        throw config_error("variant '" + tag + "': the uniform split is not binary; use es");
    return v;
}

// Surface grid for a requested element count: the widest factorization with
// n_y <= n_z (largest divisor not exceeding sqrt(n)).
inline std::pair<int, int> surface_grid(int n) {
    require(n >= 1, "surface_grid: element count must be positive");
    int best = 1;
    for (int d = 1; d * d <= n; ++d)
        if (n % d == 0) best = d;
    return {best, n / best};
}

struct ExperimentConfig {
    std::uint64_t seed = 1;
    SweepKind sweep = SweepKind::power;
    std::vector<double> power_dbm = {0.0, 5.0, 10.0, 15.0, 20.0};
    std::vector<int> elements = {10, 20, 30, 40, 50};
    double fixed_power_dbm = 10.0;
    int trials = 20;
    std::vector<std::string> variant_tags = {"pen_es", "pen_ms", "ele_es", "ele_ms"};
    std::vector<VariantSpec> variants;
    ScenarioParams scenario;
    UserSetup user_setup = UserSetup::random_angles;
    double noise_dbm = -110.0;
    int clusters = 16;
    double eps_bcd = 1e-3;
    int max_bcd_iterations = 200;
    double ele_tol = 1e-9;
    bool write_trace = false;
    // Rate-reporting channel for the planar-design baseline: the true
    // spherical-wavefront links (default) or the planar links it designed on.
    bool farfield_report_far = false;
    PenConfig pen;

    static ExperimentConfig from_flat(FlatConfig& flat) {
        ExperimentConfig cfg;
        cfg.seed = flat.get_u64("seed", cfg.seed);

        const std::string sweep = flat.get_string("sweep.kind", "power");
        if (sweep == "power")
            cfg.sweep = SweepKind::power;
        else if (sweep == "elements")
            cfg.sweep = SweepKind::elements;
        else
            throw config_error("sweep.kind: expected 'power' or 'elements', got '" + sweep + "'");
        cfg.power_dbm = flat.get_list<double>("sweep.power_dbm", cfg.power_dbm, "a real number");
        cfg.elements = flat.get_list<int>("sweep.elements", cfg.elements, "an integer");

        cfg.scenario.lambda_c = flat.get_double("scenario.lambda_c", cfg.scenario.lambda_c);
        cfg.scenario.star_distance =
            flat.get_double("scenario.star_distance", cfg.scenario.star_distance);
        cfg.scenario.n_y = flat.get_int("scenario.elements_y", cfg.scenario.n_y);
        cfg.scenario.n_z = flat.get_int("scenario.elements_z", cfg.scenario.n_z);
        cfg.scenario.m_b = flat.get_int("scenario.bs_antennas", cfg.scenario.m_b);
        cfg.scenario.m = flat.get_int("scenario.user_antennas", cfg.scenario.m);
        cfg.scenario.k = flat.get_int("scenario.users", cfg.scenario.k);
        cfg.scenario.angle_min_rad =
            flat.get_double("scenario.angle_min_deg", cfg.scenario.angle_min_rad * 180.0 / pi) *
            pi / 180.0;
        cfg.scenario.angle_max_rad =
            flat.get_double("scenario.angle_max_deg", cfg.scenario.angle_max_rad * 180.0 / pi) *
            pi / 180.0;
        cfg.scenario.min_separation_rad =
            flat.get_double("scenario.min_separation_deg",
                            cfg.scenario.min_separation_rad * 180.0 / pi) *
            pi / 180.0;
        cfg.scenario.radii =
            flat.get_list<double>("scenario.radii", cfg.scenario.radii, "a real number");
        const std::string setup = flat.get_string("scenario.user_setup", "random");
        if (setup == "random")
            cfg.user_setup = UserSetup::random_angles;
        else if (setup == "inline")
            cfg.user_setup = UserSetup::inline_angles;
        else
            throw config_error("scenario.user_setup: expected 'random' or 'inline', got '" +
                               setup + "'");
        cfg.noise_dbm = flat.get_double("scenario.noise_dbm", cfg.noise_dbm);
        cfg.clusters = flat.get_int("scenario.clusters", cfg.clusters);

        cfg.trials = flat.get_int("run.trials", cfg.trials);
        cfg.fixed_power_dbm = flat.get_double("run.power_dbm", cfg.fixed_power_dbm);
        cfg.variant_tags = flat.get_string_list("run.variants", cfg.variant_tags);
        cfg.eps_bcd = flat.get_double("run.eps_bcd", cfg.eps_bcd);
        cfg.max_bcd_iterations = flat.get_int("run.max_iterations", cfg.max_bcd_iterations);
        cfg.ele_tol = flat.get_double("run.ele_tol", cfg.ele_tol);
        cfg.write_trace = flat.get_bool("run.trace", cfg.write_trace);
        const std::string report = flat.get_string("run.farfield_report", "near");
        if (report == "near")
            cfg.farfield_report_far = false;
        else if (report == "far")
            cfg.farfield_report_far = true;
        else
            throw config_error("run.farfield_report: expected 'near' or 'far', got '" + report +
                               "'");

        cfg.pen.eps_sca = flat.get_double("pen.eps_sca", cfg.pen.eps_sca);
        cfg.pen.eps_p = flat.get_double("pen.eps_p", cfg.pen.eps_p);
        cfg.pen.mu0 = flat.get_double("pen.mu0", cfg.pen.mu0);
        cfg.pen.chi0 = flat.get_double("pen.chi0", cfg.pen.chi0);
        cfg.pen.omega = flat.get_double("pen.growth", cfg.pen.omega);
        cfg.pen.varpi = cfg.pen.omega;
        cfg.pen.n_in = flat.get_int("pen.max_inner", cfg.pen.n_in);
        cfg.pen.n_out = flat.get_int("pen.max_outer", cfg.pen.n_out);
        cfg.pen.sdp_tol = flat.get_double("pen.sdp_tol", cfg.pen.sdp_tol);

        flat.require_all_used();

        if (cfg.trials < 1) throw config_error("run.trials: need at least one trial");
        if (cfg.variant_tags.empty()) throw config_error("run.variants: list is empty");
        for (const std::string& tag : cfg.variant_tags)
            cfg.variants.push_back(parse_variant(tag));
        if (cfg.sweep == SweepKind::power && cfg.power_dbm.empty())
            throw config_error("sweep.power_dbm: list is empty");
        if (cfg.sweep == SweepKind::elements && cfg.elements.empty())
            throw config_error("sweep.elements: list is empty");
        for (int n : cfg.elements)
            if (n < 1) throw config_error("sweep.elements: element counts must be positive");
        if (!(cfg.eps_bcd > 0.0)) throw config_error("run.eps_bcd: must be positive");
        if (cfg.max_bcd_iterations < 1) throw config_error("run.max_iterations: must be >= 1");
        if (cfg.clusters < 1) throw config_error("scenario.clusters: must be >= 1");
        try {
            cfg.scenario.validate();
        } catch (const std::exception& e) {
            throw config_error(e.what());
        }
        return cfg;
    }

    // Canonical key -> value form of every setting after defaults and
    // overrides, for the run metadata sidecar.
    std::map<std::string, std::string> resolved() const;
};

inline std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

template <typename T>
std::string join_list(const std::vector<T>& values) {
    std::string out;
    for (size_t i = 0; i < values.size(); ++i) {
        if (i) out += ",";
        if constexpr (std::is_same_v<T, std::string>)
            out += values[i];
        else if constexpr (std::is_same_v<T, double>)
            out += format_number(values[i]);
        else
            out += std::to_string(values[i]);
    }
    return out;
}

inline std::map<std::string, std::string> ExperimentConfig::resolved() const {
    std::map<std::string, std::string> out;
    out["seed"] = std::to_string(seed);
    out["sweep.kind"] = sweep == SweepKind::power ? "power" : "elements";
    out["sweep.power_dbm"] = join_list(power_dbm);
    out["sweep.elements"] = join_list(elements);
    out["scenario.lambda_c"] = format_number(scenario.lambda_c);
    out["scenario.star_distance"] = format_number(scenario.star_distance);
    out["scenario.elements_y"] = std::to_string(scenario.n_y);
    out["scenario.elements_z"] = std::to_string(scenario.n_z);
    out["scenario.bs_antennas"] = std::to_string(scenario.m_b);
    out["scenario.user_antennas"] = std::to_string(scenario.m);
    out["scenario.users"] = std::to_string(scenario.k);
    out["scenario.angle_min_deg"] = format_number(scenario.angle_min_rad * 180.0 / pi);
    out["scenario.angle_max_deg"] = format_number(scenario.angle_max_rad * 180.0 / pi);
    out["scenario.min_separation_deg"] = format_number(scenario.min_separation_rad * 180.0 / pi);
    out["scenario.radii"] = join_list(scenario.radii);
    out["scenario.user_setup"] = user_setup == UserSetup::random_angles ? "random" : "inline";
    out["scenario.noise_dbm"] = format_number(noise_dbm);
    out["scenario.clusters"] = std::to_string(clusters);
    out["run.trials"] = std::to_string(trials);
    out["run.power_dbm"] = format_number(fixed_power_dbm);
    out["run.variants"] = join_list(variant_tags);
    out["run.eps_bcd"] = format_number(eps_bcd);
    out["run.max_iterations"] = std::to_string(max_bcd_iterations);
    out["run.ele_tol"] = format_number(ele_tol);
    out["run.trace"] = write_trace ? "true" : "false";
    out["run.farfield_report"] = farfield_report_far ? "far" : "near";
    out["pen.eps_sca"] = format_number(pen.eps_sca);
    out["pen.eps_p"] = format_number(pen.eps_p);
    out["pen.mu0"] = format_number(pen.mu0);
    out["pen.chi0"] = format_number(pen.chi0);
    out["pen.growth"] = format_number(pen.omega);
    out["pen.max_inner"] = std::to_string(pen.n_in);
    out["pen.max_outer"] = std::to_string(pen.n_out);
    out["pen.sdp_tol"] = format_number(pen.sdp_tol);
    return out;
}

struct ResultRow {
    std::string sweep_name;
    double sweep_value = 0.0;
    int trial = 0;  // 1-based
    std::string algorithm;
    std::string protocol;
    std::string baseline;
    std::string user_setup;
    double wsr = 0.0;  // on the true channels
    RVec rates;
    int iterations = 0;
    double ms_per_iter = 0.0;
    double rank_violation = 0.0;
    std::vector<BcdIterationRow> trace;  // filled only when tracing is enabled
    std::string error;                   // nonempty when the cell failed
};

struct SweepResult {
    std::vector<ResultRow> rows;
    int users = 0;  // per-user rate column count
};

inline ResultRow cell_identity(const ExperimentConfig& cfg, double sweep_value, int trial,
                               const VariantSpec& variant) {
    ResultRow row;
    row.sweep_name = sweep_tag(cfg.sweep);
    row.sweep_value = sweep_value;
    row.trial = trial;
    row.algorithm = algorithm_tag(variant.algorithm);
    row.protocol = variant.protocol == Protocol::es ? "es" : "ms";
    row.baseline = baseline_tag(variant.baseline);
    row.user_setup = cfg.user_setup == UserSetup::random_angles ? "random" : "inline";
    return row;
}

// A failed cell keeps its identity columns so the grid stays complete; the
// numeric fields become NaN and the message rides along for the caller.
inline ResultRow failed_cell(const ExperimentConfig& cfg, double sweep_value, int trial,
                             const VariantSpec& variant, const std::string& message) {
    ResultRow row = cell_identity(cfg, sweep_value, trial, variant);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    row.wsr = nan;
    row.rates = RVec::Constant(cfg.scenario.k, nan);
    row.ms_per_iter = nan;
    row.rank_violation = nan;
    row.error = message;
    return row;
}

// Run one (sweep value, trial, variant) cell. Exposed separately so tests can
// drive individual cells without the scheduler.
inline ResultRow run_cell(const ExperimentConfig& cfg, double sweep_value, int trial,
                          const VariantSpec& variant) {
    ScenarioParams params = cfg.scenario;
    double power_dbm = cfg.fixed_power_dbm;
    if (cfg.sweep == SweepKind::elements) {
        const auto [ny, nz] = surface_grid(static_cast<int>(sweep_value));
        params.n_y = ny;
        params.n_z = nz;
    } else {
        power_dbm = sweep_value;
    }
    const SeedKey trial_seed =
        SeedKey{cfg.seed}.derive(seed_label::trial_base + static_cast<std::uint64_t>(trial));
    const ScenarioGeometry geo = sample_scenario(cfg.user_setup, trial_seed, params);
    const ChannelSet channels =
        make_channel_set(geo, trial_seed, dbm_to_watts(cfg.noise_dbm), cfg.clusters);
    const ChannelSet design = variant.baseline == BaselineKind::far_field_design
                                  ? to_far_field_design(channels, geo)
                                  : channels;

    BcdConfig bcd;
    bcd.algorithm = variant.algorithm;
    bcd.protocol = variant.protocol;
    bcd.baseline = variant.baseline;
    bcd.power_watts = dbm_to_watts(power_dbm);
    bcd.eps_bcd = cfg.eps_bcd;
    bcd.max_bcd_iterations = cfg.max_bcd_iterations;
    bcd.pen = cfg.pen;
    bcd.ele_tol = cfg.ele_tol;
    bcd.seed = trial_seed;
    const BcdResult res = run_bcd(design, bcd);
    const RVec eta = uniform_weights(channels.k());
    // Planar-design rates are reported on the true links unless the config
    // asks for design-side reporting.
    const ChannelSet& report = cfg.farfield_report_far ? design : channels;
    const SolutionReport rep = evaluate_solution(report, res.trc, res.w, eta);

    ResultRow row = cell_identity(cfg, sweep_value, trial, variant);
    row.wsr = rep.wsr;
    row.rates = rep.rates;
    row.iterations = static_cast<int>(res.trace.rows.size());
    double ms = 0.0, viol = 0.0;
    for (const auto& r : res.trace.rows) {
        ms += r.elapsed_ms;
        viol = std::max(viol, r.violation);
    }
    row.ms_per_iter = res.trace.rows.empty() ? 0.0 : ms / static_cast<double>(res.trace.rows.size());
    row.rank_violation = viol;
    if (cfg.write_trace) row.trace = res.trace.rows;
    return row;
}

// Execute the full sweep with a caller-supplied cell function. Tasks are
// indexed up front; workers fill slots by index, so the output order never
// depends on scheduling. A throwing cell is recorded in its row and the
// sweep always completes the full grid.
template <typename CellFn>
SweepResult run_sweep_with(const ExperimentConfig& cfg, int jobs, CellFn&& cell) {
    struct Task {
        double value;
        int trial;
        int variant;
    };
    std::vector<Task> tasks;
    if (cfg.sweep == SweepKind::power) {
        for (double p : cfg.power_dbm)
            for (int t = 1; t <= cfg.trials; ++t)
                for (size_t v = 0; v < cfg.variants.size(); ++v)
                    tasks.push_back({p, t, static_cast<int>(v)});
    } else {
        for (int n : cfg.elements)
            for (int t = 1; t <= cfg.trials; ++t)
                for (size_t v = 0; v < cfg.variants.size(); ++v)
                    tasks.push_back({static_cast<double>(n), t, static_cast<int>(v)});
    }

    SweepResult out;
    out.users = cfg.scenario.k;
    out.rows.resize(tasks.size());
    std::atomic<size_t> next{0};
    const auto worker = [&]() {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            const VariantSpec& variant = cfg.variants[tasks[i].variant];
            try {
                out.rows[i] = cell(cfg, tasks[i].value, tasks[i].trial, variant);
            } catch (const std::exception& e) {
                out.rows[i] = failed_cell(cfg, tasks[i].value, tasks[i].trial, variant, e.what());
            }
        }
    };
    const int threads = std::max(1, jobs);
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    return out;
}

inline SweepResult run_sweep(const ExperimentConfig& cfg, int jobs = 1) {
    return run_sweep_with(cfg, jobs,
                          [](const ExperimentConfig& c, double value, int trial,
                             const VariantSpec& variant) { return run_cell(c, value, trial, variant); });
}

// Human-readable description of every failed cell, in row order.
inline std::vector<std::string> cell_failures(const SweepResult& result) {
    std::vector<std::string> out;
    for (const ResultRow& r : result.rows)
        if (!r.error.empty())
            out.push_back(r.sweep_name + "=" + format_number(r.sweep_value) + " trial " +
                          std::to_string(r.trial) + " " + r.algorithm + "_" + r.protocol + " " +
                          r.baseline + ": " + r.error);
    return out;
}

inline void write_results_csv(const SweepResult& result, std::ostream& os) {
    os << "sweep_name,sweep_value,trial,algorithm,protocol,baseline,user_setup,wsr_bps_hz";
    for (int u = 1; u <= result.users; ++u) os << ",rate_user_" << u;
    os << ",iterations,ms_per_iter,rank_violation\n";
    for (const ResultRow& r : result.rows) {
        os << r.sweep_name << ',' << format_number(r.sweep_value) << ',' << r.trial << ','
           << r.algorithm << ',' << r.protocol << ',' << r.baseline << ',' << r.user_setup << ','
           << format_number(r.wsr);
        for (int u = 0; u < result.users; ++u) os << ',' << format_number(r.rates(u));
        os << ',' << r.iterations << ',' << format_number(r.ms_per_iter) << ','
           << format_number(r.rank_violation) << '\n';
    }
}

// Per-iteration objective traces; no timing column, so the file is
// bit-reproducible for a fixed seed.
inline void write_trace_csv(const SweepResult& result, std::ostream& os) {
    os << "sweep_name,sweep_value,trial,algorithm,protocol,baseline,user_setup,iteration,wsr,"
          "violation\n";
    for (const ResultRow& r : result.rows)
        for (const BcdIterationRow& it : r.trace)
            os << r.sweep_name << ',' << format_number(r.sweep_value) << ',' << r.trial << ','
               << r.algorithm << ',' << r.protocol << ',' << r.baseline << ',' << r.user_setup
               << ',' << it.iteration << ',' << format_number(it.wsr) << ','
               << format_number(it.violation) << '\n';
}

struct AggregateRow {
    std::string sweep_name;
    double sweep_value = 0.0;
    std::string algorithm;
    std::string protocol;  // es | ms | es_minus_ms
    std::string baseline;
    std::string user_setup;
    int count = 0;
    double wsr_mean = 0.0;
    double wsr_std = 0.0;
};

namespace detail {

inline std::pair<double, double> mean_std(const std::vector<double>& xs) {
    if (xs.empty()) return {0.0, 0.0};
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    if (xs.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

}  // namespace detail

// Group rows by cell and report mean/std of the weighted sum rate, plus
// paired per-trial es-minus-ms differences where both protocols are present.
inline std::vector<AggregateRow> aggregate_rows(const std::vector<ResultRow>& rows) {
    const auto cell_key = [](const ResultRow& r, const std::string& protocol) {
        return r.sweep_name + '\x1f' + format_number(r.sweep_value) + '\x1f' + r.algorithm +
               '\x1f' + protocol + '\x1f' + r.baseline + '\x1f' + r.user_setup;
    };
    std::vector<std::string> order;
    std::map<std::string, std::vector<double>> groups;
    std::map<std::string, const ResultRow*> sample;
    const auto push = [&](const std::string& key, double value, const ResultRow& r) {
        if (!groups.count(key)) order.push_back(key);
        groups[key].push_back(value);
        if (!sample.count(key)) sample[key] = &r;
    };
    for (const ResultRow& r : rows) push(cell_key(r, r.protocol), r.wsr, r);

    // paired protocol differences keyed by everything but the protocol
    std::map<std::string, std::map<int, std::pair<std::optional<double>, std::optional<double>>>>
        pairs;
    for (const ResultRow& r : rows) {
        if (r.protocol != "es" && r.protocol != "ms") continue;
        auto& slot = pairs[cell_key(r, "*")][r.trial];
        (r.protocol == "es" ? slot.first : slot.second) = r.wsr;
    }
    for (const ResultRow& r : rows) {
        if (r.protocol != "es") continue;
        const auto& slot = pairs[cell_key(r, "*")][r.trial];
        if (slot.first && slot.second)
            push(cell_key(r, "es_minus_ms"), *slot.first - *slot.second, r);
    }

    std::vector<AggregateRow> out;
    for (const std::string& key : order) {
        const std::vector<std::string> parts = detail::split(key, '\x1f');
        const ResultRow& r = *sample.at(key);
        AggregateRow a;
        a.sweep_name = parts[0];
        a.sweep_value = r.sweep_value;
        a.algorithm = parts[2];
        a.protocol = parts[3];
        a.baseline = parts[4];
        a.user_setup = parts[5];
        const auto [mean, sd] = detail::mean_std(groups.at(key));
        a.count = static_cast<int>(groups.at(key).size());
        a.wsr_mean = mean;
        a.wsr_std = sd;
        out.push_back(a);
    }
    return out;
}

inline void write_aggregate_csv(const std::vector<AggregateRow>& rows, std::ostream& os) {
    os << "sweep_name,sweep_value,algorithm,protocol,baseline,user_setup,count,wsr_mean,wsr_std\n";
    for (const AggregateRow& a : rows)
        os << a.sweep_name << ',' << format_number(a.sweep_value) << ',' << a.algorithm << ','
           << a.protocol << ',' << a.baseline << ',' << a.user_setup << ',' << a.count << ','
           << format_number(a.wsr_mean) << ',' << format_number(a.wsr_std) << '\n';
}

// Parse a results CSV produced by write_results_csv (for the aggregate
// subcommand). Tolerates any number of rate columns.
inline SweepResult read_results_csv(std::istream& is, const std::string& origin) {
    SweepResult out;
    std::string line;
    if (!std::getline(is, line)) throw config_error(origin + ": empty results file");
    const std::vector<std::string> header = detail::split(detail::trim(line), ',');
    std::map<std::string, int> col;
    for (size_t i = 0; i < header.size(); ++i) col[header[i]] = static_cast<int>(i);
    for (const char* need : {"sweep_name", "sweep_value", "trial", "algorithm", "protocol",
                             "baseline", "user_setup", "wsr_bps_hz", "iterations", "ms_per_iter",
                             "rank_violation"})
        if (!col.count(need))
            throw config_error(origin + ": missing column '" + std::string(need) + "'");
    std::vector<int> rate_cols;
    for (int u = 1; col.count("rate_user_" + std::to_string(u)); ++u)
        rate_cols.push_back(col.at("rate_user_" + std::to_string(u)));
    out.users = static_cast<int>(rate_cols.size());
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string text = detail::trim(line);
        if (text.empty()) continue;
        const std::string where = origin + ":" + std::to_string(lineno);
        const std::vector<std::string> f = detail::split(text, ',');
        if (f.size() != header.size())
            throw config_error(where + ": expected " + std::to_string(header.size()) +
                               " fields, got " + std::to_string(f.size()));
        ResultRow r;
        r.sweep_name = f[col.at("sweep_name")];
        r.sweep_value = detail::parse_scalar<double>(f[col.at("sweep_value")], "a real number", where);
        r.trial = detail::parse_scalar<int>(f[col.at("trial")], "an integer", where);
        r.algorithm = f[col.at("algorithm")];
        r.protocol = f[col.at("protocol")];
        r.baseline = f[col.at("baseline")];
        r.user_setup = f[col.at("user_setup")];
        r.wsr = detail::parse_scalar<double>(f[col.at("wsr_bps_hz")], "a real number", where);
        r.rates = RVec::Zero(out.users);
        for (int u = 0; u < out.users; ++u)
            r.rates(u) = detail::parse_scalar<double>(f[rate_cols[u]], "a real number", where);
        r.iterations = detail::parse_scalar<int>(f[col.at("iterations")], "an integer", where);
        r.ms_per_iter =
            detail::parse_scalar<double>(f[col.at("ms_per_iter")], "a real number", where);
        r.rank_violation =
            detail::parse_scalar<double>(f[col.at("rank_violation")], "a real number", where);
        out.rows.push_back(std::move(r));
    }
    return out;
}

}  // namespace starbeam

#endif
