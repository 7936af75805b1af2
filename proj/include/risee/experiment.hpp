#pragma once

// Monte-Carlo sweep harness: config parsing, benchmark schemes, a worker
// pool over trials, and CSV/JSON emission.

#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "risee/channel.hpp"
#include "risee/quantizer.hpp"

namespace risee {

enum class SweepVariable { P_tmax, P_c_n_active, NEV, quant_bits };

inline std::string to_string(SweepVariable v) {
  switch (v) {
    case SweepVariable::P_tmax: return "P_tmax";
    case SweepVariable::P_c_n_active: return "P_c_n_active";
    case SweepVariable::NEV: return "NEV";
    default: return "quant_bits";
  }
}

inline SweepVariable sweep_variable_from_string(const std::string& s) {
  if (s == "P_tmax") return SweepVariable::P_tmax;
  if (s == "P_c_n_active") return SweepVariable::P_c_n_active;
  if (s == "NEV") return SweepVariable::NEV;
  if (s == "quant_bits") return SweepVariable::quant_bits;
  throw std::invalid_argument("unknown sweep variable: " + s);
}

/// NEV knob in dB mapped to the target ratio ||delta||^2 / ||g||^2 in [0, 1):
/// with g = g_hat + delta the ratio r = N sigma_g^2 / ||g_hat||^2 gives
/// NEV = r / (1 + r).
inline double nev_target_from_db(double nev_db) {
  const double r = std::pow(10.0, nev_db / 10.0);
  return r / (1.0 + r);
}

struct ExperimentConfig {
  SystemParams params;  // active-RIS template; sweeps override copies
  GeometryConfig geometry;
  FadingConfig fading;
  SolverConfig solver;
  SweepVariable variable = SweepVariable::P_tmax;
  std::vector<double> grid{30.0};  // dBm for power sweeps, dB for NEV, bits for quant_bits
  std::string schemes = "a";
  int trials = 1;
  std::uint64_t seed = 1;
  int threads = 1;
  double nev_db = 0.0;  // eavesdropper CSI quality when NEV is not swept
  double passive_P_c_n = dbm_to_watt(0.0);
  double passive_P_0_RIS = dbm_to_watt(10.0);
  int phase_grid = 16;    // schemes (e)/(f) per-element search resolution
  int modulus_grid = 8;
  nlohmann::json echo;  // effective settings, replayed into JSON output

  void validate() const {
    params.validate();
    geometry.validate();
    fading.validate();
    if (grid.empty()) throw std::invalid_argument("sweep grid must be non-empty");
    if (trials < 1) throw std::invalid_argument("trials must be >= 1");
    if (threads < 1) throw std::invalid_argument("threads must be >= 1");
    if (schemes.empty()) throw std::invalid_argument("schemes must be non-empty");
    for (char s : schemes)
      if (s < 'a' || s > 'g') throw std::invalid_argument("unknown scheme tag");
  }
};

inline ExperimentConfig make_preset(const std::string& name) {
  ExperimentConfig cfg;
  if (name == "desk") {
    cfg.params.K = 2;
    cfg.params.N_B = 2;
    cfg.params.N = 16;
    cfg.trials = 50;
    // lighter solver budgets so a full sweep stays within a few minutes on one core
    cfg.solver.max_alt = 6;
    cfg.solver.max_sca = 4;
    cfg.solver.max_outer = 10;
    cfg.solver.max_inner = 100;
  } else if (name == "paper") {
    cfg.params.K = 4;
    cfg.params.N_B = 4;
    cfg.params.N = 100;
    cfg.trials = 1000;
  } else {
    throw std::invalid_argument("unknown preset: " + name);
  }
  cfg.params.B = 20e6;
  const double noise = noise_power(cfg.params.B, cfg.fading.noise_psd_dbm_hz,
                                   cfg.fading.noise_figure_db);
  cfg.params.sigma2_B = cfg.params.sigma2_RIS = cfg.params.sigma2_E = noise;
  cfg.params.P_max = rvec::Constant(cfg.params.K, dbm_to_watt(30.0));
  cfg.params.P_R_max = dbm_to_watt(30.0);
  cfg.params.ris_mode = RisMode::Active;
  cfg.params.P_c_n = dbm_to_watt(0.0);
  cfg.params.P_0_RIS = dbm_to_watt(30.0);
  cfg.params.P_0 = dbm_to_watt(20.0);
  return cfg;
}

/// Builds a config from JSON, starting from a preset; dBm fields are converted
/// to watts here and nowhere else.
inline ExperimentConfig parse_config(const nlohmann::json& j, const std::string& preset = "paper") {
  ExperimentConfig cfg = make_preset(j.value("preset", preset));
  auto& p = cfg.params;
  p.K = j.value("K", p.K);
  p.N_B = j.value("N_B", p.N_B);
  p.N = j.value("N", p.N);
  p.B = j.value("B_hz", p.B);
  if (j.contains("fading")) {
    const auto& f = j["fading"];
    cfg.fading.n_h = f.value("n_h", cfg.fading.n_h);
    cfg.fading.n_gE = f.value("n_gE", cfg.fading.n_gE);
    cfg.fading.n_gB = f.value("n_gB", cfg.fading.n_gB);
    cfg.fading.K_t = f.value("K_t", cfg.fading.K_t);
    cfg.fading.K_r = f.value("K_r", cfg.fading.K_r);
    cfg.fading.noise_psd_dbm_hz = f.value("noise_psd_dbm_hz", cfg.fading.noise_psd_dbm_hz);
    cfg.fading.noise_figure_db = f.value("noise_figure_db", cfg.fading.noise_figure_db);
  }
  if (j.contains("geometry")) {
    const auto& g = j["geometry"];
    cfg.geometry.cell_radius = g.value("cell_radius", cfg.geometry.cell_radius);
    cfg.geometry.min_user_ris_dist = g.value("min_user_ris_dist", cfg.geometry.min_user_ris_dist);
    cfg.geometry.bs_ris_dist = g.value("bs_ris_dist", cfg.geometry.bs_ris_dist);
    cfg.geometry.eve_radius_around_bs =
        g.value("eve_radius_around_bs", cfg.geometry.eve_radius_around_bs);
  }
  const double noise = noise_power(p.B, cfg.fading.noise_psd_dbm_hz, cfg.fading.noise_figure_db);
  p.sigma2_B = p.sigma2_RIS = p.sigma2_E = noise;
  p.P_max = rvec::Constant(p.K, dbm_to_watt(j.value("P_tmax_dbm", 30.0)));
  p.P_R_max = dbm_to_watt(j.value("P_R_max_dbm", 30.0));
  p.P_c_n = dbm_to_watt(j.value("P_c_n_dbm", 0.0));
  p.P_0_RIS = dbm_to_watt(j.value("P_0_RIS_dbm", 30.0));
  p.P_0 = dbm_to_watt(j.value("P_0_dbm", 20.0));
  const std::string mode = j.value("ris_mode", "active");
  if (mode == "active")
    p.ris_mode = RisMode::Active;
  else if (mode == "nearly_passive")
    p.ris_mode = RisMode::NearlyPassive;
  else
    throw std::invalid_argument("ris_mode must be active or nearly_passive");

  if (j.contains("sweep")) {
    const auto& s = j["sweep"];
    cfg.variable = sweep_variable_from_string(s.value("variable", "P_tmax"));
    if (s.contains("grid")) cfg.grid = s["grid"].get<std::vector<double>>();
  }
  cfg.schemes = j.value("schemes", cfg.schemes);
  cfg.trials = j.value("trials", cfg.trials);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.threads = j.value("threads", cfg.threads);
  cfg.nev_db = j.value("nev_db", cfg.nev_db);
  cfg.passive_P_c_n = dbm_to_watt(j.value("passive_P_c_n_dbm", 0.0));
  cfg.passive_P_0_RIS = dbm_to_watt(j.value("passive_P_0_RIS_dbm", 10.0));
  cfg.phase_grid = j.value("phase_grid", cfg.phase_grid);
  cfg.modulus_grid = j.value("modulus_grid", cfg.modulus_grid);
  if (j.contains("solver")) {
    const auto& s = j["solver"];
    cfg.solver.eps_alt = s.value("eps_alt", cfg.solver.eps_alt);
    cfg.solver.max_alt = s.value("max_alt", cfg.solver.max_alt);
    cfg.solver.eps_sca = s.value("eps_sca", cfg.solver.eps_sca);
    cfg.solver.max_sca = s.value("max_sca", cfg.solver.max_sca);
    cfg.solver.max_sca_power = s.value("max_sca_power", cfg.solver.max_sca_power);
    cfg.solver.max_outer = s.value("max_outer", cfg.solver.max_outer);
    cfg.solver.max_inner = s.value("max_inner", cfg.solver.max_inner);
    cfg.solver.eps_outer = s.value("eps_outer", cfg.solver.eps_outer);
    cfg.solver.eps_inner = s.value("eps_inner", cfg.solver.eps_inner);
  }
  cfg.validate();

  cfg.echo = {{"K", p.K},
              {"N_B", p.N_B},
              {"N", p.N},
              {"B_hz", p.B},
              {"P_tmax_dbm", watt_to_dbm(p.P_max(0))},
              {"P_R_max_dbm", watt_to_dbm(p.P_R_max)},
              {"ris_mode", mode},
              {"sweep", {{"variable", to_string(cfg.variable)}, {"grid", cfg.grid}}},
              {"schemes", cfg.schemes},
              {"trials", cfg.trials},
              {"seed", cfg.seed},
              {"nev_db", cfg.nev_db}};
  return cfg;
}

struct RunRecord {
  int trial = 0;
  std::uint64_t seed = 0;
  std::string scheme;
  double sweep_value = 0;
  double see_true = 0;
  double ssr_true = 0;
  double see_stat = 0;
  double p_tot = 0;
  int outer_iters = 0;
  double wall_ms = 0;
  unsigned flags = 0;  // bit 0: solver flagged; bit 1: trial failed
};

struct SchemeRun {
  Allocation alloc;
  int outer_iters = 0;
  bool flagged = false;
};

namespace detail {

/// Schemes (e)/(f): the reflection step cycles elements, exhaustively trying
/// phase x modulus grids per element with the receive filters held fixed.
inline void gamma_elementwise_step(Allocation& alloc, const ChannelSet& channels,
                                   const SystemParams& params, CsiMode mode, Objective obj,
                                   int phase_grid, int modulus_grid) {
  const rvec R = r_diag(params, channels, alloc.p);
  const double trR = R.sum();
  const double upper = trR + params.ris_rf_budget();
  double best = objective_per_hz(alloc, channels, params, mode, obj);
  for (int n = 0; n < params.N; ++n) {
    const double s_other = R.dot(alloc.gamma.cwiseAbs2()) - R(n) * std::norm(alloc.gamma(n));
    double lo2 = 0.0, hi2;
    if (params.ris_mode == RisMode::Active) {
      lo2 = std::max(0.0, (trR - s_other) / R(n));
      hi2 = (upper - s_other) / R(n);
    } else {
      hi2 = (trR - s_other) / R(n);
    }
    if (hi2 < lo2) continue;
    const complexd saved = alloc.gamma(n);
    complexd best_gn = saved;
    for (int im = 0; im < modulus_grid; ++im) {
      const double frac = modulus_grid == 1 ? 0.0 : double(im) / (modulus_grid - 1);
      const double mod = std::sqrt(lo2 + frac * (hi2 - lo2));
      for (int ip = 0; ip < phase_grid; ++ip) {
        alloc.gamma(n) = std::polar(mod, 2.0 * M_PI * ip / phase_grid);
        const double val = objective_per_hz(alloc, channels, params, mode, obj);
        if (val > best) {
          best = val;
          best_gn = alloc.gamma(n);
        }
      }
    }
    alloc.gamma(n) = best_gn;
  }
}

inline std::pair<Allocation, int> alternate_elementwise(const ChannelSet& channels,
                                                        const SystemParams& params, CsiMode mode,
                                                        Objective obj, const SolverConfig& cfg,
                                                        int phase_grid, int modulus_grid) {
  Allocation alloc;
  alloc.gamma = cvec::Ones(params.N);
  alloc.p = params.P_max;
  alloc.C = lmmse_filters(alloc, channels, params);
  int iters = 0;
  for (int it = 0; it < cfg.max_alt; ++it) {
    ++iters;
    const double obj_in = objective_per_hz(alloc, channels, params, mode, obj);
    gamma_elementwise_step(alloc, channels, params, mode, obj, phase_grid, modulus_grid);
    alloc.p = optimize_power(alloc, channels, params, mode, obj, cfg).p;
    restore_reflection_feasibility(alloc.gamma, r_diag(params, channels, alloc.p), params);
    alloc.C = lmmse_filters(alloc, channels, params);
    if (std::abs(objective_per_hz(alloc, channels, params, mode, obj) - obj_in) < cfg.eps_alt)
      break;
  }
  return {alloc, iters};
}

inline Allocation heuristic_allocation(const ChannelSet& channels, const SystemParams& params,
                                       std::uint64_t seed) {
  Allocation alloc;
  alloc.p = params.P_max / params.K;
  const rvec R = r_diag(params, channels, alloc.p);
  const double mod2 =
      params.ris_mode == RisMode::Active ? 1.0 + params.P_R_max / R.sum() : 1.0;
  std::mt19937_64 rng(seed ^ 0xc2b2ae3d27d4eb4full);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
  alloc.gamma = cvec(params.N);
  for (int n = 0; n < params.N; ++n) alloc.gamma(n) = std::polar(std::sqrt(mod2), phase(rng));
  restore_reflection_feasibility(alloc.gamma, R, params);
  alloc.C = lmmse_filters(alloc, channels, params);
  return alloc;
}

}  // namespace detail

inline SchemeRun run_scheme(char tag, const ChannelSet& channels, const SystemParams& params,
                            const ExperimentConfig& cfg, std::uint64_t seed) {
  SchemeRun out;
  switch (tag) {
    case 'a':
    case 'b':
    case 'c':
    case 'd': {
      const CsiMode mode = (tag == 'a' || tag == 'c') ? CsiMode::Perfect : CsiMode::Statistical;
      const Objective obj = (tag == 'a' || tag == 'b') ? Objective::SEE : Objective::SSR;
      auto [alloc, trace] = alternate(channels, params, mode, obj, cfg.solver);
      out.alloc = std::move(alloc);
      out.outer_iters = static_cast<int>(trace.rows.size());
      for (const auto& row : trace.rows) out.flagged |= row.flagged;
      break;
    }
    case 'e':
    case 'f': {
      const CsiMode mode = tag == 'e' ? CsiMode::Perfect : CsiMode::Statistical;
      auto [alloc, iters] = detail::alternate_elementwise(
          channels, params, mode, Objective::SEE, cfg.solver, cfg.phase_grid, cfg.modulus_grid);
      out.alloc = std::move(alloc);
      out.outer_iters = iters;
      break;
    }
    case 'g':
      out.alloc = detail::heuristic_allocation(channels, params, seed);
      break;
    default:
      throw std::invalid_argument("unknown scheme tag");
  }
  return out;
}

namespace detail {

inline void parallel_for(int tasks, int threads, const std::function<void(int)>& fn) {
  if (threads <= 1 || tasks <= 1) {
    for (int i = 0; i < tasks; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i; (i = next.fetch_add(1)) < tasks;) fn(i);
  };
  std::vector<std::thread> pool;
  const int n = std::min(threads, tasks);
  pool.reserve(n);
  for (int t = 0; t < n; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

}  // namespace detail

/// Runs the full sweep. Records are laid out deterministically by
/// (sweep index, trial, scheme) regardless of the thread count. For the
/// active-vs-passive sweep every scheme is run twice on the same channels,
/// with the passive run tagged "<scheme>_p".
inline std::vector<RunRecord> run_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  const bool vs_passive = cfg.variable == SweepVariable::P_c_n_active;
  const int runs_per_scheme = vs_passive ? 2 : 1;
  const int per_trial = static_cast<int>(cfg.schemes.size()) * runs_per_scheme;
  const int grid_n = static_cast<int>(cfg.grid.size());
  std::vector<RunRecord> records(static_cast<std::size_t>(grid_n) * cfg.trials * per_trial);

  auto task = [&](int idx) {
    const int vi = idx / cfg.trials;
    const int trial = idx % cfg.trials;
    const double value = cfg.grid[vi];
    const std::uint64_t seed = cfg.seed ^ static_cast<std::uint64_t>(trial);

    std::vector<std::pair<std::string, SystemParams>> variants;
    double nev_db = cfg.nev_db;
    SystemParams base = cfg.params;
    switch (cfg.variable) {
      case SweepVariable::P_tmax:
        base.P_max = rvec::Constant(base.K, dbm_to_watt(value));
        variants.emplace_back("", base);
        break;
      case SweepVariable::P_c_n_active: {
        base.P_c_n = dbm_to_watt(value);
        variants.emplace_back("", base);
        SystemParams passive = cfg.params;
        passive.ris_mode = RisMode::NearlyPassive;
        passive.P_c_n = cfg.passive_P_c_n;
        passive.P_0_RIS = cfg.passive_P_0_RIS;
        variants.emplace_back("_p", passive);
        break;
      }
      case SweepVariable::NEV:
        nev_db = value;
        variants.emplace_back("", base);
        break;
      case SweepVariable::quant_bits:
        variants.emplace_back("", base);
        break;
    }

    const ChannelSet channels =
        generate_scenario(base, cfg.geometry, cfg.fading, seed, nev_target_from_db(nev_db));

    int slot = idx * per_trial;
    for (std::size_t si = 0; si < cfg.schemes.size(); ++si) {
      for (const auto& [suffix, params] : variants) {
        RunRecord& rec = records[slot++];
        rec.trial = trial;
        rec.seed = seed;
        rec.scheme = std::string(1, cfg.schemes[si]) + suffix;
        rec.sweep_value = value;
        const auto t0 = std::chrono::steady_clock::now();
        try {
          SchemeRun run = run_scheme(cfg.schemes[si], channels, params, cfg, seed);
          AllocationReport rep;
          if (cfg.variable == SweepVariable::quant_bits && value > 0) {
            QuantizationConfig q;
            q.bits_phase = q.bits_modulus = static_cast<int>(value);
            rep = quantized_evaluate(run.alloc, channels, params, q).second;
          } else {
            rep = evaluate_allocation(run.alloc, channels, params);
          }
          rec.see_true = rep.see_true;
          rec.ssr_true = rep.ssr_true;
          rec.see_stat = rep.see_stat;
          rec.p_tot = rep.p_tot;
          rec.outer_iters = run.outer_iters;
          if (run.flagged) rec.flags |= 1u;
        } catch (const std::exception&) {
          rec.flags |= 2u;
        }
        rec.wall_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
      }
    }
  };
  detail::parallel_for(grid_n * cfg.trials, cfg.threads, task);
  return records;
}

struct Aggregate {
  std::string scheme;
  double sweep_value = 0;
  int count = 0;
  int failures = 0;
  double mean_see_true = 0;
  double se_see_true = 0;  // standard error of the mean
  double mean_ssr_true = 0;
  double mean_see_stat = 0;
  double mean_p_tot = 0;
};

/// Mean and standard error per (scheme, sweep value); failed trials counted
/// but excluded from the statistics.
inline std::vector<Aggregate> aggregate(const std::vector<RunRecord>& records) {
  std::map<std::pair<std::string, double>, std::vector<const RunRecord*>> groups;
  for (const auto& r : records) groups[{r.scheme, r.sweep_value}].push_back(&r);
  std::vector<Aggregate> out;
  for (const auto& [key, rows] : groups) {
    Aggregate a;
    a.scheme = key.first;
    a.sweep_value = key.second;
    double sum = 0, sum2 = 0;
    for (const auto* r : rows) {
      if (r->flags & 2u) {
        ++a.failures;
        continue;
      }
      ++a.count;
      sum += r->see_true;
      sum2 += r->see_true * r->see_true;
      a.mean_ssr_true += r->ssr_true;
      a.mean_see_stat += r->see_stat;
      a.mean_p_tot += r->p_tot;
    }
    if (a.count > 0) {
      a.mean_see_true = sum / a.count;
      a.mean_ssr_true /= a.count;
      a.mean_see_stat /= a.count;
      a.mean_p_tot /= a.count;
      if (a.count > 1) {
        const double var = (sum2 - sum * sum / a.count) / (a.count - 1);
        a.se_see_true = std::sqrt(std::max(0.0, var) / a.count);
      }
    }
    out.push_back(std::move(a));
  }
  return out;
}

namespace detail {

inline std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9e", v);
  return buf;
}

}  // namespace detail

inline constexpr const char* kCsvHeader =
    "trial,seed,scheme,sweep_value,see_true,ssr_true,see_stat,p_tot,outer_iters,wall_ms,flags";

inline std::string to_csv(const std::vector<RunRecord>& records) {
  std::ostringstream os;
  os << kCsvHeader << "\n";
  for (const auto& r : records) {
    os << r.trial << ',' << r.seed << ',' << r.scheme << ',' << detail::sci(r.sweep_value) << ','
       << detail::sci(r.see_true) << ',' << detail::sci(r.ssr_true) << ','
       << detail::sci(r.see_stat) << ',' << detail::sci(r.p_tot) << ',' << r.outer_iters << ','
       << detail::sci(r.wall_ms) << ',' << r.flags << "\n";
  }
  return os.str();
}

inline nlohmann::json record_to_json(const RunRecord& r) {
  return {{"trial", r.trial},         {"seed", r.seed},
          {"scheme", r.scheme},       {"sweep_value", r.sweep_value},
          {"see_true", r.see_true},   {"ssr_true", r.ssr_true},
          {"see_stat", r.see_stat},   {"p_tot", r.p_tot},
          {"outer_iters", r.outer_iters}, {"wall_ms", r.wall_ms},
          {"flags", r.flags}};
}

inline RunRecord record_from_json(const nlohmann::json& j) {
  RunRecord r;
  r.trial = j.at("trial");
  r.seed = j.at("seed");
  r.scheme = j.at("scheme");
  r.sweep_value = j.at("sweep_value");
  r.see_true = j.at("see_true");
  r.ssr_true = j.at("ssr_true");
  r.see_stat = j.at("see_stat");
  r.p_tot = j.at("p_tot");
  r.outer_iters = j.at("outer_iters");
  r.wall_ms = j.at("wall_ms");
  r.flags = j.at("flags");
  return r;
}

inline std::string to_json_string(const std::vector<RunRecord>& records,
                                  const ExperimentConfig& cfg) {
  nlohmann::json out;
  out["config"] = cfg.echo.is_null() ? nlohmann::json::object() : cfg.echo;
  out["records"] = nlohmann::json::array();
  for (const auto& r : records) out["records"].push_back(record_to_json(r));
  return out.dump(2) + "\n";
}

inline void emit(const std::vector<RunRecord>& records, const ExperimentConfig& cfg,
                 const std::string& path, const std::string& format) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open output file: " + path);
  if (format == "csv")
    os << to_csv(records);
  else if (format == "json")
    os << to_json_string(records, cfg);
  else
    throw std::invalid_argument("format must be csv or json");
  if (!os) throw std::runtime_error("write failed: " + path);
}

}  // namespace risee
