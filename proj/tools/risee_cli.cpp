// Command-line front end: `sweep` runs a config file, `single` solves one
// trial and prints the trace, `validate` checks harness invariants.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "risee/experiment.hpp"

namespace {

risee::ExperimentConfig load_config(const std::string& path, const std::string& preset,
                                    std::uint64_t seed_override, bool seed_set, int threads) {
  nlohmann::json j = nlohmann::json::object();
  if (!path.empty()) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config file: " + path);
    is >> j;
  }
  risee::ExperimentConfig cfg = risee::parse_config(j, preset);
  if (seed_set) cfg.seed = seed_override;
  if (threads > 0) cfg.threads = threads;
  return cfg;
}

int cmd_sweep(const risee::ExperimentConfig& cfg, const std::string& out,
              const std::string& format) {
  const auto records = risee::run_sweep(cfg);
  if (out.empty()) {
    std::cout << (format == "json" ? risee::to_json_string(records, cfg)
                                   : risee::to_csv(records));
  } else {
    risee::emit(records, cfg, out, format);
  }
  int failures = 0;
  for (const auto& a : risee::aggregate(records)) {
    failures += a.failures;
    std::cerr << "scheme " << a.scheme << " @ " << a.sweep_value
              << ": mean SEE " << a.mean_see_true << " bits/J (se " << a.se_see_true << ", n="
              << a.count << ")\n";
  }
  if (failures > 0) std::cerr << failures << " trial runs failed\n";
  return 0;
}

int cmd_single(const risee::ExperimentConfig& cfg) {
  const auto channels =
      risee::generate_scenario(cfg.params, cfg.geometry, cfg.fading, cfg.seed,
                               risee::nev_target_from_db(cfg.nev_db));
  const char tag = cfg.schemes[0];
  risee::Allocation alloc;
  if (tag >= 'a' && tag <= 'd') {
    const risee::CsiMode mode =
        (tag == 'a' || tag == 'c') ? risee::CsiMode::Perfect : risee::CsiMode::Statistical;
    const risee::Objective obj =
        (tag == 'a' || tag == 'b') ? risee::Objective::SEE : risee::Objective::SSR;
    auto [sol, trace] = risee::alternate(channels, cfg.params, mode, obj, cfg.solver);
    alloc = std::move(sol);
    std::cout << "iter  objective      SEE [bits/J]   SSR [bits/s]   P_tot [W]\n";
    for (const auto& row : trace.rows)
      std::cout << row.iteration << "     " << row.objective << "   "
                << row.see_per_hz * cfg.params.B << "   " << row.ssr_per_hz * cfg.params.B
                << "   " << row.p_tot << (row.flagged ? "  [flagged]" : "") << "\n";
  } else {
    alloc = risee::run_scheme(tag, channels, cfg.params, cfg, cfg.seed).alloc;
  }
  const auto rep = risee::evaluate_allocation(alloc, channels, cfg.params);
  std::cout << "scheme " << tag << ": SEE " << rep.see_true << " bits/J, SSR " << rep.ssr_true
            << " bits/s, P_tot " << rep.p_tot << " W\n";
  std::cout << "p =";
  for (int k = 0; k < cfg.params.K; ++k) std::cout << ' ' << alloc.p(k);
  std::cout << " W\n|gamma| in [" << alloc.gamma.cwiseAbs().minCoeff() << ", "
            << alloc.gamma.cwiseAbs().maxCoeff() << "]\n";
  return 0;
}

// Masks the wall-time column, the one field that legitimately differs
// between reruns.
std::string strip_wall(const std::string& csv) {
  std::istringstream is(csv);
  std::ostringstream os;
  std::string line;
  while (std::getline(is, line)) {
    const auto last = line.rfind(',');
    const auto prev = line.rfind(',', last - 1);
    os << line.substr(0, prev) << line.substr(last) << "\n";
  }
  return os.str();
}

int cmd_validate(risee::ExperimentConfig cfg) {
  cfg.trials = std::min(cfg.trials, 3);
  cfg.grid = {cfg.grid.front()};
  int failed = 0;
  auto check = [&](const char* name, bool ok) {
    std::cout << (ok ? "PASS " : "FAIL ") << name << "\n";
    if (!ok) ++failed;
  };

  const auto r1 = risee::run_sweep(cfg);
  auto cfg2 = cfg;
  cfg2.threads = cfg.threads > 1 ? 1 : 2;
  const auto r2 = risee::run_sweep(cfg2);
  check("reproducible across reruns and thread counts",
        strip_wall(risee::to_csv(r1)) == strip_wall(risee::to_csv(r2)));

  bool feasible = true;
  for (int t = 0; t < cfg.trials; ++t) {
    const std::uint64_t seed = cfg.seed ^ static_cast<std::uint64_t>(t);
    const auto channels = risee::generate_scenario(cfg.params, cfg.geometry, cfg.fading, seed,
                                                   risee::nev_target_from_db(cfg.nev_db));
    for (char tag : cfg.schemes) {
      const auto run = risee::run_scheme(tag, channels, cfg.params, cfg, seed);
      feasible = feasible && risee::check_feasibility(run.alloc, channels, cfg.params).feasible;
    }
  }
  check("all scheme outputs feasible", feasible);

  bool roundtrip = true;
  for (const auto& rec : r1) {
    const auto back = risee::record_from_json(risee::record_to_json(rec));
    roundtrip = roundtrip && risee::to_csv({back}) == risee::to_csv({rec});
  }
  check("records round-trip through JSON", roundtrip);

  auto agg1 = risee::aggregate(r1);
  std::vector<risee::RunRecord> replay;
  {
    std::istringstream is(risee::to_csv(r1));
    std::string line;
    std::getline(is, line);
    while (std::getline(is, line)) {
      risee::RunRecord r;
      std::istringstream ls(line);
      std::string f;
      std::getline(ls, f, ','); r.trial = std::stoi(f);
      std::getline(ls, f, ','); r.seed = std::stoull(f);
      std::getline(ls, r.scheme, ',');
      std::getline(ls, f, ','); r.sweep_value = std::stod(f);
      std::getline(ls, f, ','); r.see_true = std::stod(f);
      std::getline(ls, f, ','); r.ssr_true = std::stod(f);
      std::getline(ls, f, ','); r.see_stat = std::stod(f);
      std::getline(ls, f, ','); r.p_tot = std::stod(f);
      std::getline(ls, f, ','); r.outer_iters = std::stoi(f);
      std::getline(ls, f, ','); r.wall_ms = std::stod(f);
      std::getline(ls, f, ','); r.flags = static_cast<unsigned>(std::stoul(f));
      replay.push_back(std::move(r));
    }
  }
  auto agg2 = risee::aggregate(replay);
  bool agg_ok = agg1.size() == agg2.size();
  for (std::size_t i = 0; agg_ok && i < agg1.size(); ++i)
    agg_ok = agg1[i].scheme == agg2[i].scheme &&
             std::abs(agg1[i].mean_see_true - agg2[i].mean_see_true) <=
                 1e-9 * std::abs(agg1[i].mean_see_true) + 1e-300;
  check("aggregates match an independent second pass", agg_ok);

  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RIS-aided uplink secrecy energy efficiency simulator"};
  app.require_subcommand(1);

  std::string config_path, out_path, format = "csv", preset = "paper";
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--seed", seed, "base seed override")->each([&](const std::string&) {
    seed_set = true;
  });
  app.add_option("--out", out_path, "output file (default stdout)");
  app.add_option("--format", format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--threads", threads, "worker thread count");
  app.add_option("--preset", preset, "desk or paper scale")
      ->check(CLI::IsMember({"desk", "paper"}));

  auto* sweep = app.add_subcommand("sweep", "run a Monte-Carlo sweep");
  auto* single = app.add_subcommand("single", "solve one trial and print the trace");
  auto* validate = app.add_subcommand("validate", "run the harness invariant checks");
  // let the global flags appear after the subcommand name as well
  for (auto* sub : {sweep, single, validate}) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    risee::ExperimentConfig cfg = load_config(config_path, preset, seed, seed_set, threads);
    if (sweep->parsed()) return cmd_sweep(cfg, out_path, format);
    if (single->parsed()) return cmd_single(cfg);
    if (validate->parsed()) return cmd_validate(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
