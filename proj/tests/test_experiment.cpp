#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "risee/experiment.hpp"

using namespace risee;

namespace {

ExperimentConfig tiny_config() {
  ExperimentConfig cfg = make_preset("desk");
  cfg.params.K = 2;
  cfg.params.N = 8;
  cfg.params.N_B = 2;
  cfg.trials = 2;
  cfg.grid = {20.0, 30.0};
  cfg.schemes = "g";
  cfg.seed = 42;
  return cfg;
}

std::vector<RunRecord> strip_wall(std::vector<RunRecord> rs) {
  for (auto& r : rs) r.wall_ms = 0;
  return rs;
}

bool same_records(const std::vector<RunRecord>& a, const std::vector<RunRecord>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& x = a[i];
    const auto& y = b[i];
    if (x.trial != y.trial || x.seed != y.seed || x.scheme != y.scheme ||
        x.sweep_value != y.sweep_value || x.see_true != y.see_true || x.ssr_true != y.ssr_true ||
        x.see_stat != y.see_stat || x.p_tot != y.p_tot || x.outer_iters != y.outer_iters ||
        x.flags != y.flags)
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("presets pin the scenario sizes") {
  const ExperimentConfig desk = make_preset("desk");
  CHECK(desk.params.K == 2);
  CHECK(desk.params.N == 16);
  CHECK(desk.params.N_B == 2);
  CHECK(desk.trials == 50);
  CHECK(desk.solver.max_alt == 6);

  const ExperimentConfig paper = make_preset("paper");
  CHECK(paper.params.K == 4);
  CHECK(paper.params.N == 100);
  CHECK(paper.params.N_B == 4);
  CHECK(paper.trials == 1000);
  CHECK(paper.params.B == doctest::Approx(20e6));
  CHECK(paper.params.P_0 == doctest::Approx(dbm_to_watt(20.0)));
  CHECK(paper.params.P_0_RIS == doctest::Approx(dbm_to_watt(30.0)));
  CHECK(paper.params.P_c_n == doctest::Approx(dbm_to_watt(0.0)));

  CHECK_THROWS(make_preset("napkin"));
}

TEST_CASE("config parsing applies overrides and converts dBm once") {
  nlohmann::json j = {{"preset", "desk"},
                      {"K", 3},
                      {"N", 12},
                      {"P_tmax_dbm", 10.0},
                      {"P_R_max_dbm", 20.0},
                      {"ris_mode", "nearly_passive"},
                      {"schemes", "ag"},
                      {"trials", 5},
                      {"seed", 7},
                      {"sweep", {{"variable", "P_tmax"}, {"grid", {0.0, 10.0}}}},
                      {"solver", {{"max_alt", 3}}}};
  const ExperimentConfig cfg = parse_config(j);
  CHECK(cfg.params.K == 3);
  CHECK(cfg.params.N == 12);
  CHECK(cfg.params.P_max.size() == 3);
  CHECK(cfg.params.P_max(0) == doctest::Approx(0.01));
  CHECK(cfg.params.P_R_max == doctest::Approx(0.1));
  CHECK(cfg.params.ris_mode == RisMode::NearlyPassive);
  CHECK(cfg.schemes == "ag");
  CHECK(cfg.trials == 5);
  CHECK(cfg.seed == 7);
  CHECK(cfg.variable == SweepVariable::P_tmax);
  CHECK(cfg.grid == std::vector<double>{0.0, 10.0});
  CHECK(cfg.solver.max_alt == 3);
  CHECK_FALSE(cfg.echo.is_null());
}

TEST_CASE("sweep variable names round-trip") {
  for (auto v : {SweepVariable::P_tmax, SweepVariable::P_c_n_active, SweepVariable::NEV,
                 SweepVariable::quant_bits})
    CHECK(sweep_variable_from_string(to_string(v)) == v);
  CHECK_THROWS(sweep_variable_from_string("bananas"));
}

TEST_CASE("noise-error knob mapping") {
  CHECK(nev_target_from_db(0.0) == doctest::Approx(0.5));
  CHECK(nev_target_from_db(-10.0) == doctest::Approx(0.1 / 1.1));
  CHECK(nev_target_from_db(10.0) == doctest::Approx(10.0 / 11.0));
}

TEST_CASE("sweep output is deterministic and thread-count independent") {
  ExperimentConfig cfg = tiny_config();
  const auto first = run_sweep(cfg);
  REQUIRE(first.size() == 4);
  for (const auto& r : first) {
    CHECK((r.flags & 2u) == 0);
    CHECK(std::isfinite(r.see_true));
    CHECK(r.p_tot > 0.0);
  }
  // slots ordered by (sweep value, trial)
  CHECK(first[0].sweep_value == doctest::Approx(20.0));
  CHECK(first[0].trial == 0);
  CHECK(first[1].trial == 1);
  CHECK(first[2].sweep_value == doctest::Approx(30.0));

  const auto again = run_sweep(cfg);
  CHECK(same_records(strip_wall(first), strip_wall(again)));

  cfg.threads = 3;
  const auto threaded = run_sweep(cfg);
  CHECK(same_records(strip_wall(first), strip_wall(threaded)));
}

TEST_CASE("heuristic allocations respect the constraint set") {
  ExperimentConfig cfg = tiny_config();
  for (int trial = 0; trial < 4; ++trial) {
    const std::uint64_t seed = cfg.seed ^ static_cast<std::uint64_t>(trial);
    const ChannelSet ch = generate_scenario(cfg.params, cfg.geometry, cfg.fading, seed,
                                            nev_target_from_db(cfg.nev_db));
    const SchemeRun run = run_scheme('g', ch, cfg.params, cfg, seed);
    CHECK(check_feasibility(run.alloc, ch, cfg.params, 1e-8).feasible);
  }
}

TEST_CASE("quantization sweep treats zero bits as the continuous baseline") {
  ExperimentConfig cfg = tiny_config();
  cfg.variable = SweepVariable::quant_bits;
  cfg.grid = {0.0, 1.0, 4.0};
  cfg.trials = 3;
  const auto recs = run_sweep(cfg);
  REQUIRE(recs.size() == 9);
  const auto aggs = aggregate(recs);
  REQUIRE(aggs.size() == 3);
  for (const auto& a : aggs) {
    CHECK(a.count == 3);
    CHECK(a.failures == 0);
  }
}

TEST_CASE("active-vs-passive sweep doubles the schemes") {
  ExperimentConfig cfg = tiny_config();
  cfg.variable = SweepVariable::P_c_n_active;
  cfg.grid = {0.0};
  cfg.trials = 2;
  const auto recs = run_sweep(cfg);
  REQUIRE(recs.size() == 4);
  CHECK(recs[0].scheme == "g");
  CHECK(recs[1].scheme == "g_p");
  CHECK(recs[0].p_tot != recs[1].p_tot);
}

TEST_CASE("csv serialization is stable and parseable") {
  ExperimentConfig cfg = tiny_config();
  const auto recs = run_sweep(cfg);
  const std::string csv = to_csv(recs);
  std::istringstream is(csv);
  std::string line;
  REQUIRE(std::getline(is, line));
  CHECK(line == kCsvHeader);
  int rows = 0;
  while (std::getline(is, line)) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 10);
    // floats use scientific notation with 10 significant digits
    CHECK(line.find("e+") != std::string::npos);
  }
  CHECK(rows == static_cast<int>(recs.size()));

  const std::string empty = to_csv({});
  CHECK(empty == std::string(kCsvHeader) + "\n");
}

TEST_CASE("json record round-trip") {
  ExperimentConfig cfg = tiny_config();
  cfg.trials = 1;
  cfg.grid = {25.0};
  const auto recs = run_sweep(cfg);
  REQUIRE(recs.size() == 1);
  const nlohmann::json j = record_to_json(recs[0]);
  const RunRecord back = record_from_json(j);
  CHECK(same_records(recs, {back}));

  const std::string doc = to_json_string(recs, cfg);
  const nlohmann::json parsed = nlohmann::json::parse(doc);
  REQUIRE(parsed.contains("records"));
  CHECK(parsed["records"].size() == 1);
  const RunRecord again = record_from_json(parsed["records"][0]);
  CHECK(same_records(recs, {again}));
}
