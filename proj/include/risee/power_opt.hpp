#pragma once

// Power-step surrogates over the box 0 <= p_k <= P_max,k. Both CSI modes
// share one structure: the secrecy sum-rate is a difference of concave
// functions of p, and the subtracted part is linearized at p_bar.

#include "risee/frac.hpp"
#include "risee/model.hpp"

namespace risee {

/// Coefficients of the power subproblem for fixed gamma and C.
/// eve coefficients: Perfect mode uses (a_E, d_E); Statistical uses (b, q).
/// Either way the per-user eavesdropper SINR is p_k e(k) / (e0 + sum_{m!=k} p_m e(m)).
struct PowerCoefficients {
  rmat aB;     // K x K, aB(k, m) = |c_k^H A_m gamma|^2
  rvec dB;     // K, c_k^H W c_k
  rvec eve;    // K
  double eve0 = 0;
  rvec mu;     // K
  double P_c_eq = 0;
};

inline PowerCoefficients power_coefficients(const Allocation& alloc, const ChannelSet& channels,
                                            const SystemParams& params, CsiMode mode) {
  const int K = params.K;
  PowerCoefficients co;
  co.aB.resize(K, K);
  co.dB.resize(K);
  co.eve.resize(K);
  co.mu.resize(K);
  const rvec gamma_abs2 = alloc.gamma.cwiseAbs2();
  for (int k = 0; k < K; ++k) {
    const cvec c = alloc.C.col(k);
    for (int m = 0; m < K; ++m)
      co.aB(k, m) = std::norm(c.dot(channels.G_B * channels.h[m].cwiseProduct(alloc.gamma)));
    co.dB(k) = filter_noise_power(c, alloc.gamma, channels, params);
  }
  // One code path for both CSI modes: perfect CSI is the statistical model
  // with the realized channel and zero error, so the expressions coincide
  // bit for bit in that limit.
  const cvec& ge = mode == CsiMode::Perfect ? channels.g_true : channels.g_hat;
  const double s2g = mode == CsiMode::Perfect ? 0.0 : channels.sigma2_g;
  for (int m = 0; m < K; ++m) {
    const cvec x = channels.h[m].cwiseProduct(alloc.gamma);
    co.eve(m) = std::norm(ge.dot(x)) + s2g * x.squaredNorm();
  }
  co.eve0 = params.sigma2_E +
            params.sigma2_RIS * gamma_abs2.dot((ge.cwiseAbs2().array() + s2g).matrix());
  if (params.ris_mode == RisMode::Active) {
    for (int k = 0; k < K; ++k)
      co.mu(k) = 1.0 + (gamma_abs2.array() - 1.0).matrix().dot(channels.h[k].cwiseAbs2());
    co.P_c_eq = params.sigma2_RIS * (gamma_abs2.sum() - params.N) + params.static_power();
  } else {
    co.mu = rvec::Ones(K);
    co.P_c_eq = params.static_power();
  }
  return co;
}

/// Secrecy sum-rate (bits/s/Hz) re-assembled from the coefficients.
inline double ssr_from_coefficients(const rvec& p, const PowerCoefficients& co) {
  const int K = (int)p.size();
  double sum = 0.0;
  const double eve_tot = co.eve.dot(p);
  for (int k = 0; k < K; ++k) {
    const double interfB = co.aB.row(k).dot(p) - p(k) * co.aB(k, k);
    const double denB = co.dB(k) + interfB;
    // A powered-down user has a zero receive filter and no legitimate rate.
    if (p(k) * co.aB(k, k) > 0.0 && denB > 0.0)
      sum += std::log2(1.0 + p(k) * co.aB(k, k) / denB);
    sum -= std::log2(1.0 + p(k) * co.eve(k) / (co.eve0 + eve_tot - p(k) * co.eve(k)));
  }
  return sum;
}

inline double see_from_coefficients(const rvec& p, const PowerCoefficients& co) {
  return ssr_from_coefficients(p, co) / (co.mu.dot(p) + co.P_c_eq);
}

namespace detail {

// g1(p) = sum_k log2(dB_k + sum_m p_m aB(k,m)) + log2(eve0 + sum_{m!=k} p_m eve_m)
inline double power_g1(const rvec& p, const PowerCoefficients& co, rvec* grad) {
  const int K = (int)p.size();
  double v = 0.0;
  if (grad) grad->setZero(K);
  const double eve_tot = co.eve0 + co.eve.dot(p);
  for (int k = 0; k < K; ++k) {
    const double argB = co.dB(k) + co.aB.row(k).dot(p);
    const double argE = eve_tot - p(k) * co.eve(k);
    // argB degenerates to 0 for a user whose receive filter is zero; the
    // matching term in g2 degenerates identically, so both are dropped.
    if (argB > 0.0) v += std::log2(argB);
    v += std::log2(argE);
    if (grad) {
      for (int j = 0; j < K; ++j) {
        if (argB > 0.0) (*grad)(j) += kInvLn2 * co.aB(k, j) / argB;
        if (j != k) (*grad)(j) += kInvLn2 * co.eve(j) / argE;
      }
    }
  }
  return v;
}

// g2(p) = sum_k log2(dB_k + sum_{m!=k} p_m aB(k,m)) + log2(eve0 + sum_m p_m eve_m)
inline double power_g2(const rvec& p, const PowerCoefficients& co, rvec* grad) {
  const int K = (int)p.size();
  double v = 0.0;
  if (grad) grad->setZero(K);
  const double eve_tot = co.eve0 + co.eve.dot(p);
  v += K * std::log2(eve_tot);
  for (int k = 0; k < K; ++k) {
    const double argB = co.dB(k) + co.aB.row(k).dot(p) - p(k) * co.aB(k, k);
    if (argB <= 0.0) continue;  // dead user, see power_g1
    v += std::log2(argB);
    if (grad) {
      for (int j = 0; j < K; ++j)
        if (j != k) (*grad)(j) += kInvLn2 * co.aB(k, j) / argB;
    }
  }
  if (grad) *grad += (kInvLn2 * K / eve_tot) * co.eve;
  return v;
}

inline rvec project_slab(const rvec& x, const rvec& a, double lo, double hi) {
  const double n2 = a.squaredNorm();
  if (n2 <= 0.0) return x;
  const double t = a.dot(x);
  if (t < lo) return x + ((lo - t) / n2) * a;
  if (t > hi) return x + ((hi - t) / n2) * a;
  return x;
}

/// Dykstra alternating projection onto box intersect slab.
inline rvec project_box_slab(const rvec& x0, const rvec& lo, const rvec& hi, const rvec& a,
                             double slo, double shi) {
  rvec x = x0;
  rvec p = rvec::Zero(x.size()), q = rvec::Zero(x.size());
  for (int it = 0; it < 500; ++it) {
    const rvec y = project_box(x + p, lo, hi);
    p = x + p - y;
    const rvec z = project_slab(y + q, a, slo, shi);
    q = y + q - z;
    const double delta = (z - x).norm();
    x = z;
    if (delta <= 1e-12 * std::max(1.0, x.norm())) break;
  }
  return x;
}

}  // namespace detail

/// Pseudo-concave surrogate of the power objective at p_bar. Returns the
/// surrogate value; grad (if non-null) receives its gradient in p.
/// Objective::SSR replaces the power denominator by 1.
inline double surrogate_see_power(const rvec& p, const rvec& p_bar, const PowerCoefficients& co,
                                  Objective obj, rvec* grad = nullptr) {
  rvec g2_grad(p.size());
  const double g2_bar = detail::power_g2(p_bar, co, &g2_grad);
  rvec g1_grad(p.size());
  const double num =
      detail::power_g1(p, co, grad ? &g1_grad : nullptr) - g2_bar - g2_grad.dot(p - p_bar);
  if (obj == Objective::SSR) {
    if (grad) *grad = g1_grad - g2_grad;
    return num;
  }
  const double den = co.mu.dot(p) + co.P_c_eq;
  if (grad) *grad = (g1_grad - g2_grad) / den - num / (den * den) * co.mu;
  return num / den;
}

struct PowerStepResult {
  rvec p;
  int sca_iterations = 0;
  bool converged = false;
  bool flagged = false;
};

inline PowerStepResult optimize_power(const Allocation& alloc, const ChannelSet& channels,
                                      const SystemParams& params, CsiMode mode, Objective obj,
                                      const SolverConfig& cfg) {
  const PowerCoefficients co = power_coefficients(alloc, channels, params, mode);
  const rvec lo = rvec::Zero(params.K);
  const rvec& hi = params.P_max;

  // The reflection bounds (7b) are linear in p for fixed gamma: with
  // w_k = sum_n |h_k(n)|^2 (|gamma_n|^2 - 1) and s = sum_n (|gamma_n|^2 - 1),
  // they read -sigma2_RIS s <= w.p <= P_R,max - sigma2_RIS s. Keeping them in
  // the power projection keeps every iterate feasible.
  rvec w = rvec::Zero(params.K);
  double s = 0.0;
  for (int n = 0; n < params.N; ++n) {
    const double d = std::norm(alloc.gamma(n)) - 1.0;
    s += d;
    for (int k = 0; k < params.K; ++k) w(k) += d * std::norm(channels.h[k](n));
  }
  const double slab_hi = params.ris_rf_budget() - params.sigma2_RIS * s;
  const double slab_lo = params.ris_mode == RisMode::Active
                             ? -params.sigma2_RIS * s
                             : -std::numeric_limits<double>::infinity();
  const bool use_slab = w.cwiseAbs().maxCoeff() > 0.0;

  const auto objective = [&](const rvec& p) {
    const double num = ssr_from_coefficients(p, co);
    return obj == Objective::SSR ? num : num / (co.mu.dot(p) + co.P_c_eq);
  };

  PowerStepResult res;
  if (hi.maxCoeff() <= 0.0) {  // no transmit budget at all
    res.p = rvec::Zero(params.K);
    res.converged = true;
    return res;
  }

  const auto project = [&](const rvec& p) {
    if (!use_slab) return project_box(p, lo, hi);
    return detail::project_box_slab(p, lo, hi, w, slab_lo, slab_hi);
  };

  // One SCA run from a feasible starting point. Per-round moves shrink p by at
  // most a modest factor, so the run only explores the neighborhood of its
  // start on a log scale.
  const auto run_sca = [&](rvec p_bar) {
    double obj_bar = objective(p_bar);
    bool converged = false;
    for (int t = 0; t < cfg.max_sca_power; ++t) {
      ++res.sca_iterations;
      rvec g2_grad(params.K);
      const double g2_bar = detail::power_g2(p_bar, co, &g2_grad);

      RatioProblem prob;
      prob.dimension = params.K;
      prob.numerator = [&, g2_bar, g2_grad, p_bar](const rvec& p, rvec* g) {
        rvec g1_grad(p.size());
        const double v =
            detail::power_g1(p, co, g ? &g1_grad : nullptr) - g2_bar - g2_grad.dot(p - p_bar);
        if (g) *g = g1_grad - g2_grad;
        return v;
      };
      if (obj == Objective::SSR) {
        prob.denominator = [](const rvec& p, rvec* g) {
          if (g) g->setZero(p.size());
          return 1.0;
        };
      } else {
        prob.denominator = [&](const rvec& p, rvec* g) {
          if (g) *g = co.mu;
          return co.mu.dot(p) + co.P_c_eq;
        };
      }
      prob.project = project;

      DinkelbachResult din = dinkelbach_maximize(prob, p_bar, cfg);
      if (!din.converged) res.flagged = true;
      const double obj_star = objective(din.x);
      if (obj_star < obj_bar - 1e-12 * std::max(1.0, std::abs(obj_bar))) {
        res.flagged = true;
        break;
      }
      const bool done = std::abs(obj_star - obj_bar) < cfg.eps_sca_power;
      p_bar = din.x;
      obj_bar = obj_star;
      if (done) {
        converged = true;
        break;
      }
    }
    return std::make_tuple(p_bar, obj_bar, converged);
  };

  // The useful transmit power can sit several orders of magnitude below the
  // budget; start the SCA from a few decades and keep the best outcome.
  // Cheap log-grid scan along the budget ray; the objective is closed-form in
  // the coefficients, so this costs next to nothing and picks the best basin.
  rvec scan_best = hi;
  double scan_val = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 48; ++i) {
    const rvec cand = project(std::pow(10.0, -6.0 + 6.0 * i / 48.0) * hi);
    const double v = objective(cand);
    if (v > scan_val) {
      scan_val = v;
      scan_best = cand;
    }
  }

  const std::vector<rvec> starts{alloc.p, scan_best};
  std::vector<rvec> used;
  double best_obj = -std::numeric_limits<double>::infinity();
  for (const rvec& s0 : starts) {
    const rvec p0 = project(s0);
    bool seen = false;
    for (const rvec& u : used) seen = seen || (p0 - u).norm() <= 1e-12 * (1.0 + u.norm());
    if (seen) continue;
    used.push_back(p0);
    auto [p_end, obj_end, conv] = run_sca(p0);
    if (obj_end > best_obj) {
      best_obj = obj_end;
      res.p = p_end;
      res.converged = conv;
    }
  }
  return res;
}

}  // namespace risee
