#pragma once

// LMMSE receive filters and the overall alternating orchestrator
// (gamma step, power step, filter step) for both CSI and objective modes.

#include "risee/power_opt.hpp"
#include "risee/ris_opt.hpp"

namespace risee {

/// c_k = sqrt(p_k) (sum_{m!=k} p_m A_m gamma gamma^H A_m^H + W)^{-1} A_k gamma.
inline cmat lmmse_filters(const Allocation& alloc, const ChannelSet& channels,
                          const SystemParams& params) {
  const int K = params.K;
  cmat C = cmat::Zero(params.N_B, K);
  std::vector<cvec> eff(K);
  for (int m = 0; m < K; ++m)
    eff[m] = channels.G_B * channels.h[m].cwiseProduct(alloc.gamma);
  cmat W = params.sigma2_B * cmat::Identity(params.N_B, params.N_B);
  W += params.sigma2_RIS * channels.G_B * alloc.gamma.cwiseAbs2().asDiagonal() *
       channels.G_B.adjoint();
  if (params.sigma2_B <= 0.0)
    W += 1e-12 * cmat::Identity(params.N_B, params.N_B);
  for (int k = 0; k < K; ++k) {
    if (alloc.p(k) <= 0.0) continue;
    cmat M = W;
    for (int m = 0; m < K; ++m)
      if (m != k) M += alloc.p(m) * eff[m] * eff[m].adjoint();
    C.col(k) = std::sqrt(alloc.p(k)) * M.ldlt().solve(eff[k]);
  }
  return C;
}

struct TraceRow {
  int iteration = 0;
  double objective = 0;  // per-Hz objective driving the loop
  double see_per_hz = 0;
  double ssr_per_hz = 0;
  double p_tot = 0;
  double reflect_lower_slack = 0;
  double reflect_upper_slack = 0;
  int gamma_iterations = 0;
  int power_iterations = 0;
  bool flagged = false;
};

struct IterateTrace {
  std::vector<TraceRow> rows;
  bool converged = false;
};

///// Overall alternating resource allocation. Initialization: gamma all-ones
/// (feasible in both RIS modes), p = min(P_max, 1 W) so the starting point does
/// not wander off with the power budget when the budget is generous, LMMSE filters.
inline std::pair<Allocation, IterateTrace> alternate(const ChannelSet& channels,
                                                     const SystemParams& params, CsiMode mode,
                                                     Objective obj, const SolverConfig& cfg) {
  params.validate();
  channels.validate(params);
  Allocation alloc;
  alloc.gamma = cvec::Ones(params.N);
  alloc.p = params.P_max.cwiseMin(1.0);
  alloc.C = lmmse_filters(alloc, channels, params);

  IterateTrace trace;
  Allocation prev = alloc;
  for (int it = 0; it < cfg.max_alt; ++it) {
    const double obj_in = objective_per_hz(alloc, channels, params, mode, obj);

    GammaStepResult gs;
    PowerStepResult ps;
    for (int pass = 0; pass < 2; ++pass) {
      gs = optimize_gamma(alloc, channels, params, mode, obj, cfg);
      alloc.gamma = gs.gamma;
      ps = optimize_power(alloc, channels, params, mode, obj, cfg);
      alloc.p = ps.p;
      // The p update moved R, which shifts the reflection bounds.
      restore_reflection_feasibility(alloc.gamma, r_diag(params, channels, alloc.p), params);
      alloc.C = lmmse_filters(alloc, channels, params);
    }

    double obj_out = objective_per_hz(alloc, channels, params, mode, obj);

    // The block updates zigzag along a flat ridge with geometrically shrinking
    // gains. Extrapolating along the last joint move and projecting back to
    // the constraint set collapses that tail; only improving points are kept.
    // Two extrapolation families: linear in (gamma, p), and polar in gamma
    // (per-element phase advance and log-modulus scaling), which follows the
    // curved phase ridge a linear chord would leave. When a jump lands, the
    // secant is refreshed and the ladders are retried from the new point.
    {
      Allocation anchor = prev;
      for (int round = 0; round < 3; ++round) {
        const cvec dg = alloc.gamma - anchor.gamma;
        const rvec dp = alloc.p - anchor.p;
        bool improved = false;
        const auto try_candidate = [&](Allocation cand) {
          if (!cand.gamma.allFinite() || !cand.p.allFinite()) return;
          restore_reflection_feasibility(cand.gamma, r_diag(params, channels, cand.p), params);
          if (!cand.gamma.allFinite()) return;
          cand.C = lmmse_filters(cand, channels, params);
          double v;
          try {
            v = objective_per_hz(cand, channels, params, mode, obj);
          } catch (const std::exception&) {
            return;  // degenerate extrapolation, discard
          }
          if (v > obj_out) {
            obj_out = v;
            alloc = std::move(cand);
            improved = true;
          }
        };
        const Allocation base = alloc;
        for (double theta : {1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0}) {
          Allocation cand;
          cand.p = (base.p + theta * dp).cwiseMax(0.0).cwiseMin(params.P_max);
          cand.gamma = base.gamma + theta * dg;
          try_candidate(std::move(cand));
        }
        for (double theta : {1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0}) {
          Allocation cand;
          cand.p = (base.p + theta * dp).cwiseMax(0.0).cwiseMin(params.P_max);
          cand.gamma = cvec(params.N);
          for (int n = 0; n < params.N; ++n) {
            const double r1 = std::abs(base.gamma(n));
            const double r0 = std::abs(anchor.gamma(n));
            const double ratio = r0 > 0.0 && r1 > 0.0 ? r1 / r0 : 1.0;
            const double dphi =
                r0 > 0.0 && r1 > 0.0 ? std::arg(base.gamma(n) * std::conj(anchor.gamma(n))) : 0.0;
            // cap the modulus extrapolation so large theta cannot overflow
            const double scale = std::clamp(std::pow(ratio, theta), 1e-6, 1e6);
            cand.gamma(n) = std::polar(r1 * scale, std::arg(base.gamma(n)) + theta * dphi);
          }
          try_candidate(std::move(cand));
        }
        if (!improved) break;
        anchor = base;
      }
    }
    prev = alloc;
    TraceRow row;
    row.iteration = it + 1;
    row.objective = obj_out;
    row.ssr_per_hz = ssr_per_hz(alloc, channels, params, mode);
    row.p_tot = power_total(alloc, channels, params);
    row.see_per_hz = row.ssr_per_hz / row.p_tot;
    const FeasibilityReport rep = check_feasibility(alloc, channels, params);
    row.reflect_lower_slack = rep.reflect_lower_slack;
    row.reflect_upper_slack = rep.reflect_upper_slack;
    row.gamma_iterations = gs.sca_iterations;
    row.power_iterations = ps.sca_iterations;
    row.flagged = gs.flagged || ps.flagged;
    trace.rows.push_back(row);
    if (std::abs(obj_out - obj_in) < cfg.eps_alt * std::max(1.0, std::abs(obj_in))) {
      trace.converged = true;
      break;
    }
  }
  return {alloc, trace};
}

struct AllocationReport {
  double see_true = 0;   // bits/J, realized eavesdropper channel
  double see_stat = 0;   // bits/J, statistical eavesdropper model
  double ssr_true = 0;   // bits/s
  double ssr_stat = 0;   // bits/s
  double p_tot = 0;      // W
};

/// Scores one allocation under both CSI views; enables designing under
/// statistical CSI but evaluating on the realized channel.
inline AllocationReport evaluate_allocation(const Allocation& alloc, const ChannelSet& channels,
                                            const SystemParams& params) {
  AllocationReport rep;
  rep.p_tot = power_total(alloc, channels, params);
  rep.ssr_true = ssr(alloc, channels, params, CsiMode::Perfect);
  rep.ssr_stat = ssr(alloc, channels, params, CsiMode::Statistical);
  rep.see_true = rep.ssr_true / rep.p_tot;
  rep.see_stat = rep.ssr_stat / rep.p_tot;
  return rep;
}

}  // namespace risee
