#pragma once

// Closed-form quantities of the system model: SINRs, secrecy sum-rate,
// power consumption, SEE, feasibility checks.

#include <limits>

#include "risee/types.hpp"

namespace risee {

/// Diagonal of R = sum_k p_k H_k^H H_k + sigma2_RIS I. Every H_k is diagonal,
/// so R is diagonal and the O(N) path is exact.
inline rvec r_diag(const SystemParams& params, const ChannelSet& channels, const rvec& p) {
  rvec R = rvec::Constant(params.N, params.sigma2_RIS);
  for (int k = 0; k < params.K; ++k) R += p(k) * channels.h[k].cwiseAbs2();
  return R;
}

/// A_k = G_B diag(h_k).
inline cmat composite_channel(int k, const SystemParams& params, const ChannelSet& channels) {
  channels.validate(params);
  if (k < 0 || k >= params.K) throw std::out_of_range("user index");
  return channels.G_B * channels.h[k].asDiagonal();
}

/// c^H W c via the diagonal form sigma_B^2 ||c||^2 + sigma_RIS^2 gamma^H U~ gamma.
inline double filter_noise_power(const cvec& c, const cvec& gamma, const ChannelSet& channels,
                                 const SystemParams& params) {
  const cvec u = channels.G_B.adjoint() * c;
  return params.sigma2_B * c.squaredNorm() +
         params.sigma2_RIS * u.cwiseAbs2().dot(gamma.cwiseAbs2());
}

inline double sinr_legit(int k, const Allocation& alloc, const ChannelSet& channels,
                         const SystemParams& params) {
  const cvec c = alloc.C.col(k);
  double interference = 0.0;
  double signal = 0.0;
  for (int m = 0; m < params.K; ++m) {
    const complexd s = c.dot(channels.G_B * channels.h[m].cwiseProduct(alloc.gamma));
    const double term = alloc.p(m) * std::norm(s);
    if (m == k)
      signal = term;
    else
      interference += term;
  }
  const double den = filter_noise_power(c, alloc.gamma, channels, params) + interference;
  if (signal == 0.0) return 0.0;
  if (den <= 0.0) throw std::domain_error("degenerate legitimate SINR denominator");
  return signal / den;
}

inline double sinr_eve(int k, const Allocation& alloc, const ChannelSet& channels,
                       const SystemParams& params) {
  const cvec& g = channels.g_true;
  double interference = 0.0;
  double signal = 0.0;
  for (int m = 0; m < params.K; ++m) {
    const complexd s = g.dot(channels.h[m].cwiseProduct(alloc.gamma));
    const double term = alloc.p(m) * std::norm(s);
    if (m == k)
      signal = term;
    else
      interference += term;
  }
  const double den = params.sigma2_E +
                     params.sigma2_RIS * g.cwiseAbs2().dot(alloc.gamma.cwiseAbs2()) +
                     interference;
  return signal == 0.0 ? 0.0 : signal / den;
}

/// ||R_E^{1/2} x||^2 with R_E = g_hat g_hat^H + sigma2_g I, never forming R_E^{1/2}.
inline double eve_stat_quad(const cvec& x, const ChannelSet& channels) {
  return std::norm(channels.g_hat.dot(x)) + channels.sigma2_g * x.squaredNorm();
}

/// Expected RIS-noise gain at the eavesdropper, E[sum_n |g_n|^2 |gamma_n|^2];
/// only the diagonal of R_E enters.
inline double eve_stat_ris_noise(const cvec& gamma, const ChannelSet& channels) {
  return gamma.cwiseAbs2().dot(
      (channels.g_hat.cwiseAbs2().array() + channels.sigma2_g).matrix());
}

inline double sinr_eve_stat(int k, const Allocation& alloc, const ChannelSet& channels,
                            const SystemParams& params) {
  double interference = 0.0;
  double signal = 0.0;
  for (int m = 0; m < params.K; ++m) {
    const double term = alloc.p(m) * eve_stat_quad(channels.h[m].cwiseProduct(alloc.gamma), channels);
    if (m == k)
      signal = term;
    else
      interference += term;
  }
  const double den = params.sigma2_E +
                     params.sigma2_RIS * eve_stat_ris_noise(alloc.gamma, channels) +
                     interference;
  return signal == 0.0 ? 0.0 : signal / den;
}

/// Secrecy sum-rate per Hz; no clipping of negative per-user terms.
inline double ssr_per_hz(const Allocation& alloc, const ChannelSet& channels,
                         const SystemParams& params, CsiMode csi) {
  double sum = 0.0;
  for (int k = 0; k < params.K; ++k) {
    const double se = csi == CsiMode::Perfect ? sinr_eve(k, alloc, channels, params)
                                              : sinr_eve_stat(k, alloc, channels, params);
    sum += std::log2(1.0 + sinr_legit(k, alloc, channels, params)) - std::log2(1.0 + se);
  }
  return sum;
}

/// SSR in bits/s (bandwidth applied).
inline double ssr(const Allocation& alloc, const ChannelSet& channels,
                  const SystemParams& params, CsiMode csi) {
  return params.B * ssr_per_hz(alloc, channels, params, csi);
}

inline double power_total(const Allocation& alloc, const ChannelSet& channels,
                          const SystemParams& params) {
  double total = alloc.p.sum() + params.static_power();
  if (params.ris_mode == RisMode::Active) {
    const rvec R = r_diag(params, channels, alloc.p);
    total += R.dot((alloc.gamma.cwiseAbs2().array() - 1.0).matrix());
  }
  if (!(total > 0.0)) throw std::domain_error("non-positive total power");
  return total;
}

inline double see(const Allocation& alloc, const ChannelSet& channels,
                  const SystemParams& params, CsiMode csi) {
  return ssr(alloc, channels, params, csi) / power_total(alloc, channels, params);
}

/// Objective used inside the optimizers: per-Hz rates, so the bandwidth
/// constant does not inflate convergence tolerances.
inline double objective_per_hz(const Allocation& alloc, const ChannelSet& channels,
                               const SystemParams& params, CsiMode csi, Objective obj) {
  const double num = ssr_per_hz(alloc, channels, params, csi);
  return obj == Objective::SSR ? num : num / power_total(alloc, channels, params);
}

struct FeasibilityReport {
  bool feasible = false;
  // Slack >= 0 means satisfied. The reflection lower bound only binds in
  // Active mode; NearlyPassive reports +inf there.
  double reflect_lower_slack = 0;
  double reflect_upper_slack = 0;
  rvec p_lower_slack;
  rvec p_upper_slack;
};

inline FeasibilityReport check_feasibility(const Allocation& alloc, const ChannelSet& channels,
                                           const SystemParams& params, double tol = 1e-8) {
  FeasibilityReport rep;
  const rvec R = r_diag(params, channels, alloc.p);
  const double reflected = R.dot(alloc.gamma.cwiseAbs2());
  const double trR = R.sum();
  if (params.ris_mode == RisMode::Active) {
    rep.reflect_lower_slack = reflected - trR;
    rep.reflect_upper_slack = params.P_R_max + trR - reflected;
  } else {
    rep.reflect_lower_slack = std::numeric_limits<double>::infinity();
    rep.reflect_upper_slack = trR - reflected;
  }
  rep.p_lower_slack = alloc.p;
  rep.p_upper_slack = params.P_max - alloc.p;
  rep.feasible = rep.reflect_lower_slack >= -tol && rep.reflect_upper_slack >= -tol &&
                 (rep.p_lower_slack.array() >= -tol).all() &&
                 (rep.p_upper_slack.array() >= -tol).all();
  return rep;
}

/// Minimal scalar rescaling of gamma restoring the reflection constraint after
/// a power update changed R. Phases are preserved.
inline void restore_reflection_feasibility(cvec& gamma, const rvec& R, const SystemParams& params) {
  const double reflected = R.dot(gamma.cwiseAbs2());
  if (reflected <= 0.0) return;
  const double trR = R.sum();
  const double upper = trR + params.ris_rf_budget();
  if (params.ris_mode == RisMode::Active && reflected < trR)
    gamma *= std::sqrt(trR / reflected);
  else if (reflected > upper)
    gamma *= std::sqrt(upper / reflected);
}

}  // namespace risee
