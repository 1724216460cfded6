// SPDX-License-Identifier: Apache-2.0
#include <catch_amalgamated.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "starbeam/experiment.hpp"

using namespace starbeam;

namespace {

// Writes `text` to a scratch config file and returns its path.
std::string scratch_file(const std::string& name, const std::string& text) {
    const auto path = std::filesystem::temp_directory_path() / ("starbeam_test_" + name);
    std::ofstream out(path);
    out << text;
    out.close();
    return path.string();
}

ExperimentConfig tiny_experiment() {
    FlatConfig flat;
    flat.set_override("scenario.elements_y=2");
    flat.set_override("scenario.elements_z=2");
    flat.set_override("scenario.bs_antennas=2");
    flat.set_override("scenario.user_antennas=2");
    flat.set_override("scenario.users=2");
    flat.set_override("scenario.clusters=2");
    flat.set_override("sweep.power_dbm=10");
    flat.set_override("run.trials=1");
    flat.set_override("run.variants=ele_es,ele_ms");
    flat.set_override("run.eps_bcd=1e-2");
    flat.set_override("run.max_iterations=5");
    return ExperimentConfig::from_flat(flat);
}

}  // namespace

TEST_CASE("config files parse comments, blanks and whitespace", "[experiment]") {
    const std::string path = scratch_file("basic.cfg",
                                          "# leading comment\n"
                                          "\n"
                                          "seed = 7   # trailing comment\n"
                                          "  run.trials=3\n"
                                          "run.variants = ele_es , ele_ms\n"
                                          "scenario.radii = 2, 4\n");
    FlatConfig flat = FlatConfig::from_file(path);
    CHECK(flat.get_u64("seed", 0) == 7);
    CHECK(flat.get_int("run.trials", 0) == 3);
    const auto variants = flat.get_string_list("run.variants", {});
    REQUIRE(variants.size() == 2);
    CHECK(variants[0] == "ele_es");
    CHECK(variants[1] == "ele_ms");
    const auto radii = flat.get_list<double>("scenario.radii", {}, "a real number");
    REQUIRE(radii.size() == 2);
    CHECK(radii[0] == 2.0);
    CHECK(radii[1] == 4.0);
    CHECK(flat.get_string("missing", "fallback") == "fallback");
    std::remove(path.c_str());
}

TEST_CASE("config file errors carry file and line", "[experiment]") {
    const std::string dup = scratch_file("dup.cfg", "a = 1\na = 2\n");
    CHECK_THROWS_MATCHES(FlatConfig::from_file(dup), config_error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("duplicate key 'a'") &&
                             Catch::Matchers::ContainsSubstring(":2")));
    std::remove(dup.c_str());

    const std::string noeq = scratch_file("noeq.cfg", "just some text\n");
    CHECK_THROWS_MATCHES(FlatConfig::from_file(noeq), config_error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("expected 'key = value'")));
    std::remove(noeq.c_str());

    const std::string bad = scratch_file("bad.cfg", "seed = 1\nrun.trials = soon\n");
    FlatConfig flat = FlatConfig::from_file(bad);
    CHECK_THROWS_MATCHES(flat.get_int("run.trials", 0), config_error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring(":2") &&
                             Catch::Matchers::ContainsSubstring("an integer")));
    std::remove(bad.c_str());

    CHECK_THROWS_AS(FlatConfig::from_file("/nonexistent/sb.cfg"), config_error);
}

TEST_CASE("unknown keys are rejected after binding", "[experiment]") {
    FlatConfig flat;
    flat.set_override("seed=3");
    flat.set_override("run.typo=1");
    CHECK_THROWS_MATCHES(ExperimentConfig::from_flat(flat), config_error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("unknown key 'run.typo'")));
}

TEST_CASE("overrides replace file values and validate their shape", "[experiment]") {
    const std::string path = scratch_file("ovr.cfg", "seed = 1\n");
    FlatConfig flat = FlatConfig::from_file(path);
    flat.set_override("seed=42");
    CHECK(flat.get_u64("seed", 0) == 42);
    CHECK_THROWS_AS(flat.set_override("no-equals-sign"), config_error);
    CHECK_THROWS_AS(flat.set_override("=5"), config_error);
    std::remove(path.c_str());
}

TEST_CASE("boolean keys accept the usual spellings", "[experiment]") {
    FlatConfig flat;
    flat.set_override("a=true");
    flat.set_override("b=0");
    flat.set_override("c=yes");
    flat.set_override("d=off");
    CHECK(flat.get_bool("a", false));
    CHECK_FALSE(flat.get_bool("b", true));
    CHECK(flat.get_bool("c", false));
    CHECK_THROWS_AS(flat.get_bool("d", false), config_error);
    CHECK(flat.get_bool("missing", true));
}

TEST_CASE("variant tags map to algorithm, protocol and baseline", "[experiment]") {
    VariantSpec v = parse_variant("pen_es");
    CHECK(v.algorithm == Algorithm::pen);
    CHECK(v.protocol == Protocol::es);
    CHECK(v.baseline == BaselineKind::star_ris);
    v = parse_variant("ele_ms");
    CHECK(v.algorithm == Algorithm::ele);
    CHECK(v.protocol == Protocol::ms);
    v = parse_variant("ele_es_conventional");
    CHECK(v.baseline == BaselineKind::conventional_ris);
    v = parse_variant("ele_ms_conventional");
    CHECK(v.baseline == BaselineKind::conventional_ris);
    v = parse_variant("ele_es_uniform");
    CHECK(v.baseline == BaselineKind::uniform_es);
    v = parse_variant("pen_es_farfield");
    CHECK(v.baseline == BaselineKind::far_field_design);
    CHECK_THROWS_AS(parse_variant("ele_ms_uniform"), config_error);  // not a binary split
    CHECK_THROWS_AS(parse_variant("sdp_es"), config_error);
    CHECK_THROWS_AS(parse_variant("ele"), config_error);
    CHECK_THROWS_AS(parse_variant("ele_es_extra_bits"), config_error);
}

TEST_CASE("surface factorization picks the widest grid", "[experiment]") {
    CHECK(surface_grid(40) == std::make_pair(5, 8));
    CHECK(surface_grid(10) == std::make_pair(2, 5));
    CHECK(surface_grid(16) == std::make_pair(4, 4));
    CHECK(surface_grid(7) == std::make_pair(1, 7));
    CHECK(surface_grid(1) == std::make_pair(1, 1));
    CHECK(surface_grid(12) == std::make_pair(3, 4));
    CHECK_THROWS_AS(surface_grid(0), invalid_argument_error);
}

TEST_CASE("experiment defaults survive the flat-config roundtrip", "[experiment]") {
    FlatConfig flat;
    const ExperimentConfig cfg = ExperimentConfig::from_flat(flat);
    CHECK(cfg.seed == 1);
    CHECK(cfg.sweep == SweepKind::power);
    CHECK(cfg.trials == 20);
    CHECK(cfg.variant_tags.size() == 4);
    CHECK(cfg.pen.varpi == cfg.pen.omega);
    const auto resolved = cfg.resolved();
    CHECK(resolved.at("run.trials") == "20");
    CHECK(resolved.at("sweep.kind") == "power");
    CHECK(resolved.at("scenario.noise_dbm") == "-110");
}

TEST_CASE("experiment validation rejects malformed settings", "[experiment]") {
    const auto reject = [](const char* override_spec) {
        FlatConfig flat;
        flat.set_override(override_spec);
        CHECK_THROWS_AS(ExperimentConfig::from_flat(flat), config_error);
    };
    reject("sweep.kind=frequency");
    reject("scenario.user_setup=grid");
    reject("run.trials=0");
    reject("run.variants=");
    reject("run.eps_bcd=0");
    reject("run.max_iterations=0");
    reject("scenario.clusters=0");
    reject("scenario.users=0");
    reject("sweep.elements=0,10");
}

TEST_CASE("penalty growth override drives both penalty weights", "[experiment]") {
    FlatConfig flat;
    flat.set_override("pen.growth=25");
    const ExperimentConfig cfg = ExperimentConfig::from_flat(flat);
    CHECK(cfg.pen.omega == 25.0);
    CHECK(cfg.pen.varpi == 25.0);
}

TEST_CASE("tiny sweeps are reproducible and order-stable", "[experiment]") {
    const ExperimentConfig cfg = tiny_experiment();
    const SweepResult a = run_sweep(cfg, 1);
    const SweepResult b = run_sweep(cfg, 1);
    REQUIRE(a.rows.size() == 2);  // 1 power x 1 trial x 2 variants
    REQUIRE(a.rows.size() == b.rows.size());
    for (size_t i = 0; i < a.rows.size(); ++i) {
        CHECK(a.rows[i].wsr == b.rows[i].wsr);
        CHECK(a.rows[i].protocol == b.rows[i].protocol);
    }
    CHECK(a.rows[0].protocol == "es");
    CHECK(a.rows[1].protocol == "ms");
    for (const ResultRow& r : a.rows) {
        CHECK(r.sweep_name == "power_dbm");
        CHECK(r.sweep_value == 10.0);
        CHECK(r.trial == 1);
        CHECK(r.wsr > 0.0);
        CHECK(r.iterations >= 1);
        CHECK(r.rates.size() == 2);
    }
}

TEST_CASE("threaded execution matches the serial result", "[experiment]") {
    ExperimentConfig cfg = tiny_experiment();
    cfg.trials = 2;
    const SweepResult serial = run_sweep(cfg, 1);
    const SweepResult threaded = run_sweep(cfg, 2);
    REQUIRE(serial.rows.size() == threaded.rows.size());
    for (size_t i = 0; i < serial.rows.size(); ++i) {
        CHECK(serial.rows[i].wsr == threaded.rows[i].wsr);
        CHECK(serial.rows[i].trial == threaded.rows[i].trial);
        CHECK(serial.rows[i].protocol == threaded.rows[i].protocol);
    }
}

TEST_CASE("element sweeps refactor the surface grid per value", "[experiment]") {
    ExperimentConfig cfg = tiny_experiment();
    cfg.sweep = SweepKind::elements;
    cfg.elements = {6};
    const SweepResult res = run_sweep(cfg, 1);
    REQUIRE(res.rows.size() == 2);
    for (const ResultRow& r : res.rows) {
        CHECK(r.sweep_name == "elements");
        CHECK(r.sweep_value == 6.0);
        CHECK(r.wsr > 0.0);
    }
}

TEST_CASE("results survive a CSV write/read roundtrip", "[experiment]") {
    const ExperimentConfig cfg = tiny_experiment();
    const SweepResult res = run_sweep(cfg, 1);
    std::stringstream ss;
    write_results_csv(res, ss);
    const SweepResult back = read_results_csv(ss, "roundtrip");
    REQUIRE(back.users == res.users);
    REQUIRE(back.rows.size() == res.rows.size());
    for (size_t i = 0; i < res.rows.size(); ++i) {
        const ResultRow& x = res.rows[i];
        const ResultRow& y = back.rows[i];
        CHECK(y.sweep_name == x.sweep_name);
        CHECK(y.sweep_value == x.sweep_value);
        CHECK(y.trial == x.trial);
        CHECK(y.algorithm == x.algorithm);
        CHECK(y.protocol == x.protocol);
        CHECK(y.baseline == x.baseline);
        CHECK(y.user_setup == x.user_setup);
        CHECK(y.wsr == Catch::Approx(x.wsr).epsilon(1e-10));
        CHECK(y.iterations == x.iterations);
        for (int u = 0; u < res.users; ++u)
            CHECK(y.rates(u) == Catch::Approx(x.rates(u)).epsilon(1e-10));
    }
}

TEST_CASE("result parsing rejects malformed files", "[experiment]") {
    std::stringstream empty;
    CHECK_THROWS_AS(read_results_csv(empty, "t"), config_error);
    std::stringstream missing("sweep_name,sweep_value\n");
    CHECK_THROWS_AS(read_results_csv(missing, "t"), config_error);
    std::stringstream shortrow(
        "sweep_name,sweep_value,trial,algorithm,protocol,baseline,user_setup,wsr_bps_hz,"
        "iterations,ms_per_iter,rank_violation\npower_dbm,10\n");
    CHECK_THROWS_MATCHES(read_results_csv(shortrow, "t"), config_error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("t:2")));
}

TEST_CASE("aggregation reports cell statistics and paired differences", "[experiment]") {
    const auto mk = [](const std::string& proto, int trial, double wsr) {
        ResultRow r;
        r.sweep_name = "power_dbm";
        r.sweep_value = 10.0;
        r.trial = trial;
        r.algorithm = "ele";
        r.protocol = proto;
        r.baseline = "star_ris";
        r.user_setup = "random";
        r.wsr = wsr;
        return r;
    };
    std::vector<ResultRow> rows = {mk("es", 1, 10.0), mk("es", 2, 12.0), mk("es", 3, 14.0),
                                   mk("ms", 1, 9.0),  mk("ms", 2, 10.0)};
    const std::vector<AggregateRow> agg = aggregate_rows(rows);
    REQUIRE(agg.size() == 3);  // es, ms, es_minus_ms

    const auto find = [&](const std::string& proto) -> const AggregateRow& {
        for (const auto& a : agg)
            if (a.protocol == proto) return a;
        FAIL("missing protocol row " + proto);
        return agg.front();
    };
    const AggregateRow& es = find("es");
    CHECK(es.count == 3);
    CHECK(es.wsr_mean == Catch::Approx(12.0));
    CHECK(es.wsr_std == Catch::Approx(2.0));
    const AggregateRow& ms = find("ms");
    CHECK(ms.count == 2);
    CHECK(ms.wsr_mean == Catch::Approx(9.5));
    const AggregateRow& diff = find("es_minus_ms");
    CHECK(diff.count == 2);  // trial 3 has no ms partner
    CHECK(diff.wsr_mean == Catch::Approx(1.5));

    std::stringstream ss;
    write_aggregate_csv(agg, ss);
    const std::string text = ss.str();
    CHECK(text.find("sweep_name,sweep_value,algorithm,protocol,baseline,user_setup,count,"
                    "wsr_mean,wsr_std") == 0);
    CHECK(text.find("es_minus_ms") != std::string::npos);
}

TEST_CASE("far-field designs are scored on the true channels", "[experiment]") {
    ExperimentConfig cfg = tiny_experiment();
    const VariantSpec variant = parse_variant("ele_es_farfield");
    const ResultRow near_row = run_cell(cfg, 10.0, 1, variant);
    cfg.farfield_report_far = true;
    const ResultRow far_row = run_cell(cfg, 10.0, 1, variant);
    CHECK(near_row.baseline == "far_field_design");
    CHECK(near_row.wsr > 0.0);
    CHECK(std::isfinite(near_row.wsr));

    // Reproduce the cell by hand to pin which links each mode reports on.
    const SeedKey trial_seed = SeedKey{cfg.seed}.derive(seed_label::trial_base + 1);
    const ScenarioGeometry geo = sample_scenario(cfg.user_setup, trial_seed, cfg.scenario);
    const ChannelSet channels =
        make_channel_set(geo, trial_seed, dbm_to_watts(cfg.noise_dbm), cfg.clusters);
    const ChannelSet design = to_far_field_design(channels, geo);
    BcdConfig bcd;
    bcd.algorithm = variant.algorithm;
    bcd.protocol = variant.protocol;
    bcd.baseline = variant.baseline;
    bcd.power_watts = dbm_to_watts(10.0);
    bcd.eps_bcd = cfg.eps_bcd;
    bcd.max_bcd_iterations = cfg.max_bcd_iterations;
    bcd.pen = cfg.pen;
    bcd.ele_tol = cfg.ele_tol;
    bcd.seed = trial_seed;
    const BcdResult res = run_bcd(design, bcd);
    const RVec eta = uniform_weights(channels.k());
    CHECK(near_row.wsr == evaluate_solution(channels, res.trc, res.w, eta).wsr);
    CHECK(far_row.wsr == evaluate_solution(design, res.trc, res.w, eta).wsr);
    CHECK(near_row.wsr != far_row.wsr);
}

TEST_CASE("far-field report mode parses and round-trips", "[experiment]") {
    FlatConfig flat;
    flat.set_override("run.farfield_report=far");
    const ExperimentConfig cfg = ExperimentConfig::from_flat(flat);
    CHECK(cfg.farfield_report_far);
    CHECK(cfg.resolved().at("run.farfield_report") == "far");
    CHECK_FALSE(tiny_experiment().farfield_report_far);

    FlatConfig bad;
    bad.set_override("run.farfield_report=sideways");
    CHECK_THROWS_AS(ExperimentConfig::from_flat(bad), config_error);
}

TEST_CASE("cell failures are recorded in their rows and the sweep completes", "[experiment]") {
    ExperimentConfig cfg = tiny_experiment();
    cfg.trials = 2;
    const SweepResult res = run_sweep_with(
        cfg, 1, [](const ExperimentConfig& c, double value, int trial, const VariantSpec& v) {
            if (trial == 1 && v.protocol == Protocol::ms)
                throw std::runtime_error("synthetic subsolver failure");
            return run_cell(c, value, trial, v);
        });
    REQUIRE(res.rows.size() == 4);  // grid size preserved despite the failure
    const ResultRow& bad = res.rows[1];
    CHECK(bad.error == "synthetic subsolver failure");
    CHECK(bad.protocol == "ms");
    CHECK(bad.trial == 1);
    CHECK(std::isnan(bad.wsr));
    CHECK(bad.iterations == 0);
    REQUIRE(bad.rates.size() == cfg.scenario.k);
    CHECK(std::isnan(bad.rates(0)));
    for (const ResultRow& r : res.rows)
        if (r.error.empty()) CHECK(r.wsr > 0.0);

    const std::vector<std::string> failures = cell_failures(res);
    REQUIRE(failures.size() == 1);
    CHECK(failures[0].find("synthetic subsolver failure") != std::string::npos);
    CHECK(failures[0].find("trial 1") != std::string::npos);
    CHECK(cell_failures(run_sweep(tiny_experiment(), 1)).empty());
}

TEST_CASE("failed rows round-trip through the CSV as NaN", "[experiment]") {
    const ExperimentConfig cfg = tiny_experiment();
    const SweepResult res = run_sweep_with(
        cfg, 1, [](const ExperimentConfig& c, double value, int trial, const VariantSpec& v) {
            if (v.protocol == Protocol::ms) throw std::runtime_error("boom");
            return run_cell(c, value, trial, v);
        });
    std::ostringstream os;
    write_results_csv(res, os);
    std::istringstream is(os.str());
    const SweepResult back = read_results_csv(is, "mem");
    REQUIRE(back.rows.size() == 2);
    CHECK(std::isfinite(back.rows[0].wsr));
    CHECK(std::isnan(back.rows[1].wsr));
    CHECK(std::isnan(back.rows[1].rank_violation));
}
