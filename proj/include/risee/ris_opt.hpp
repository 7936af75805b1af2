#pragma once

// Sequential surrogate for the RIS reflection subproblem: concave per-user
// secrecy-rate lower bounds, rebuilt at each expansion point and handed to
// the fractional solver over the linearized reflection constraint set.

#include "risee/frac.hpp"
#include "risee/model.hpp"

namespace risee {

namespace detail {

inline void add_diag(cmat& M, const rvec& d) {
  for (Eigen::Index n = 0; n < d.size(); ++n) M(n, n) += d(n);
}
}  // namespace detail

/// Scalar bound log2(1+x/y) >= log2(1+xb/yb)
///   + (1/ln2)(xb/yb)(2 sqrt(x/xb) - (x+y)/(xb+yb) - 1).
/// Tight (value and gradient) at (x, y) = (xb, yb).
inline double log_bound_lower(double x, double y, double x_bar, double y_bar) {
  if (x_bar <= 0.0) return 0.0;  // degenerate limit: bound collapses to 0
  const double t = x_bar / y_bar;
  return std::log2(1.0 + t) + detail::kInvLn2 * t *
                                  (2.0 * std::sqrt(x / x_bar) -
                                   (x + y) / (x_bar + y_bar) - 1.0);
}

/// log2(sigma2 + x + y) <= log2(sigma2 + xb + yb)
///   + (1/ln2)(x + y - xb - yb)/(sigma2 + xb + yb). Tight at (xb, yb).
inline double log_bound_upper(double x, double y, double x_bar, double y_bar, double sigma2_E) {
  const double base = sigma2_E + x_bar + y_bar;
  return std::log2(base) + detail::kInvLn2 * (x + y - x_bar - y_bar) / base;
}

/// First-order lower bound of sqrt(gamma^H M gamma) around gamma_bar,
/// affine in gamma. Returns 0 when the expansion value is degenerate.
inline double linearized_sqrt(const cmat& M, const cvec& gamma, const cvec& gamma_bar) {
  const cvec mg = M * gamma_bar;
  const double bar = std::real(gamma_bar.dot(mg));
  if (bar <= 0.0) return 0.0;
  const double root = std::sqrt(bar);
  return root + std::real(mg.dot(gamma - gamma_bar)) / root;
}

/// Per-user quadratic forms of the gamma subproblem, cached at gamma_bar.
/// x_B = gamma^H QxB gamma, y_B = cB + gamma^H QyB gamma, and so on; the
/// noise constant cB lives outside the quadratic so QyB stays homogeneous.
struct UserSurrogate {
  cmat QxB, QyB, QxE, QyE;
  double cB = 0;
  double x_bar_B = 0, y_bar_B = 0, x_bar_E = 0, y_bar_E = 0;
};

struct GammaSurrogate {
  std::vector<UserSurrogate> users;
  cvec gamma_bar;
};

inline UserSurrogate surrogate_terms(int k, const Allocation& alloc, const ChannelSet& channels,
                                     const SystemParams& params, CsiMode mode,
                                     const cvec& gamma_bar) {
  const int N = params.N;
  UserSurrogate s;
  const cvec c = alloc.C.col(k);
  const cvec u = channels.G_B.adjoint() * c;

  s.QxB = cmat::Zero(N, N);
  s.QyB = cmat::Zero(N, N);
  detail::add_diag(s.QyB, params.sigma2_RIS * u.cwiseAbs2());
  s.cB = params.sigma2_B * c.squaredNorm();
  for (int m = 0; m < params.K; ++m) {
    const cvec a = channels.h[m].conjugate().cwiseProduct(u);  // A_m^H c_k
    if (m == k)
      s.QxB = alloc.p(k) * a * a.adjoint();
    else
      s.QyB += alloc.p(m) * a * a.adjoint();
  }

  s.QxE = cmat::Zero(N, N);
  s.QyE = cmat::Zero(N, N);
  // Shared code path for both CSI modes: perfect CSI is the statistical model
  // with the realized channel and zero estimation error, computed through the
  // same expressions so the two modes agree to the last bit in that limit.
  const cvec& ge = mode == CsiMode::Perfect ? channels.g_true : channels.g_hat;
  const double s2g = mode == CsiMode::Perfect ? 0.0 : channels.sigma2_g;
  for (int m = 0; m < params.K; ++m) {
    const cvec t = channels.h[m].conjugate().cwiseProduct(ge);  // H_m^H g
    cmat M = t * t.adjoint();
    detail::add_diag(M, s2g * channels.h[m].cwiseAbs2());
    if (m == k)
      s.QxE = alloc.p(k) * M;
    else
      s.QyE += alloc.p(m) * M;
  }
  // E[sum_n |g_n|^2 |gamma_n|^2] only involves the diagonal of R_E.
  detail::add_diag(s.QyE, params.sigma2_RIS * (ge.cwiseAbs2().array() + s2g).matrix());

  const auto quad = [&](const cmat& Q) { return std::real(gamma_bar.dot(Q * gamma_bar)); };
  s.x_bar_B = quad(s.QxB);
  s.y_bar_B = s.cB + quad(s.QyB);
  s.x_bar_E = quad(s.QxE);
  s.y_bar_E = quad(s.QyE);
  return s;
}

inline GammaSurrogate build_gamma_surrogate(const Allocation& alloc, const ChannelSet& channels,
                                            const SystemParams& params, CsiMode mode,
                                            const cvec& gamma_bar) {
  GammaSurrogate s;
  s.gamma_bar = gamma_bar;
  s.users.reserve(params.K);
  for (int k = 0; k < params.K; ++k)
    s.users.push_back(surrogate_terms(k, alloc, channels, params, mode, gamma_bar));
  return s;
}

/// Concave-in-gamma lower bound R~_{s,k}(gamma) in bits/s/Hz. If grad is
/// non-null it receives the gradient in the interleaved real embedding.
inline double surrogate_secrecy_rate(const UserSurrogate& s, const cvec& gamma,
                                     const cvec& gamma_bar, double sigma2_E,
                                     rvec* grad = nullptr) {
  const double L = detail::kInvLn2;
  double value = 0.0;
  cvec cgrad = cvec::Zero(gamma.size());  // d/dconj(gamma); real grad = embed(2*cgrad)

  const cvec qxb_g = s.QxB * gamma;
  const cvec qyb_g = s.QyB * gamma;
  const cvec qxe_g = s.QxE * gamma;
  const cvec qye_g = s.QyE * gamma;
  const double xB = std::real(gamma.dot(qxb_g));
  const double yB = s.cB + std::real(gamma.dot(qyb_g));
  const double xE = std::real(gamma.dot(qxe_g));
  const double yE = std::real(gamma.dot(qye_g));

  // Legitimate-rate bound; dropped entirely for a degenerate expansion point.
  if (s.x_bar_B > 0.0) {
    const double tB = s.x_bar_B / s.y_bar_B;
    const double rootB = std::sqrt(s.x_bar_B);
    const cvec qxb_gbar = s.QxB * gamma_bar;
    const double xtB = rootB + std::real(qxb_gbar.dot(gamma - gamma_bar)) / rootB;
    const double denB = s.x_bar_B + s.y_bar_B;
    value += std::log2(1.0 + tB) + L * tB * (2.0 * xtB / rootB - (xB + yB) / denB - 1.0);
    if (grad)
      cgrad += L * tB * ((1.0 / s.x_bar_B) * qxb_gbar - (qxb_g + qyb_g) / denB);
  }

  // Eavesdropper-interference bound; exact limit when y_bar_E degenerates.
  if (s.y_bar_E > 0.0) {
    const double tE = s.y_bar_E / sigma2_E;
    const double rootE = std::sqrt(s.y_bar_E);
    const cvec qye_gbar = s.QyE * gamma_bar;
    const double ytE = rootE + std::real(qye_gbar.dot(gamma - gamma_bar)) / rootE;
    const double denE = s.y_bar_E + sigma2_E;
    value += std::log2(1.0 + tE) + L * tE * (2.0 * ytE / rootE - (yE + sigma2_E) / denE - 1.0);
    if (grad)
      cgrad += L * tE * ((1.0 / s.y_bar_E) * qye_gbar - qye_g / denE);
  }

  const double denE3 = sigma2_E + s.x_bar_E + s.y_bar_E;
  value += std::log2(sigma2_E / denE3) -
           L * (xE + yE - s.x_bar_E - s.y_bar_E) / denE3;
  if (grad) {
    cgrad -= (L / denE3) * (qxe_g + qye_g);
    *grad = 2.0 * embed(cgrad);
  }
  return value;
}

struct GammaStepResult {
  cvec gamma;
  int sca_iterations = 0;
  bool converged = false;
  bool flagged = false;
};

/// One full RIS step (the SCA loop around the fractional subproblem), with p
/// and C held fixed. Works for both CSI modes and both objective modes.
inline GammaStepResult optimize_gamma(const Allocation& alloc, const ChannelSet& channels,
                                      const SystemParams& params, CsiMode mode, Objective obj,
                                      const SolverConfig& cfg) {
  const rvec R = r_diag(params, channels, alloc.p);
  const double trR = R.sum();
  rvec w(2 * params.N);  // R_nn repeated for the (Re, Im) embedding pair
  for (int n = 0; n < params.N; ++n) w(2 * n) = w(2 * n + 1) = R(n);
  const double upper = trR + params.ris_rf_budget();
  // Denominator constant such that quad + const equals P_tot(gamma).
  const double pc_eq = alloc.p.sum() + params.static_power() - trR;

  Allocation work = alloc;
  const auto objective = [&](const cvec& gamma) {
    work.gamma = gamma;
    return objective_per_hz(work, channels, params, mode, obj);
  };

  GammaStepResult res;
  cvec gamma_bar = alloc.gamma;
  double obj_bar = objective(gamma_bar);

  // The SCA rounds only need coarse progress; the polish below does the fine
  // work, so the fractional subproblems get trimmed budgets.
  SolverConfig sca_cfg = cfg;
  sca_cfg.max_inner = std::min(cfg.max_inner, 120);
  sca_cfg.max_outer = std::min(cfg.max_outer, 8);

  for (int t = 0; t < cfg.max_sca; ++t) {
    res.sca_iterations = t + 1;
    const GammaSurrogate sur = build_gamma_surrogate(alloc, channels, params, mode, gamma_bar);

    RatioProblem prob;
    prob.dimension = 2 * params.N;
    prob.numerator = [&](const rvec& x, rvec* g) {
      const cvec gamma = unembed(x);
      double v = 0.0;
      if (g) {
        g->setZero(x.size());
        rvec gk(x.size());
        for (const auto& us : sur.users) {
          v += surrogate_secrecy_rate(us, gamma, sur.gamma_bar, params.sigma2_E, &gk);
          *g += gk;
        }
      } else {
        for (const auto& us : sur.users)
          v += surrogate_secrecy_rate(us, gamma, sur.gamma_bar, params.sigma2_E, nullptr);
      }
      return v;
    };
    if (obj == Objective::SSR) {
      prob.denominator = [](const rvec& x, rvec* g) {
        if (g) g->setZero(x.size());
        return 1.0;
      };
    } else if (params.ris_mode == RisMode::NearlyPassive) {
      const double den = alloc.p.sum() + params.static_power();
      prob.denominator = [den](const rvec& x, rvec* g) {
        if (g) g->setZero(x.size());
        return den;
      };
    } else {
      prob.denominator = [&, pc_eq](const rvec& x, rvec* g) {
        if (g) *g = 2.0 * w.cwiseProduct(x);
        return w.dot(x.cwiseProduct(x)) + pc_eq;
      };
    }

    if (params.ris_mode == RisMode::Active) {
      // Lower reflection bound linearized at gamma_bar: 2 Re{gb^H R gamma}
      // >= tr(R) + gb^H R gb. Restriction of the true constraint, so every
      // projected point is feasible for the original problem.
      const cvec rgb = R.cast<complexd>().cwiseProduct(gamma_bar);
      const rvec a = 2.0 * embed(rgb);
      const double b = trR + std::real(gamma_bar.dot(rgb));
      prob.project = [&, a, b](const rvec& x) {
        bool fl = false;
        rvec y = project_ball_halfspace(x, w, upper, a, b, &fl);
        if (fl) res.flagged = true;
        return y;
      };
    } else {
      prob.project = [&](const rvec& x) { return project_weighted_ball(x, w, upper); };
    }

    DinkelbachResult din = dinkelbach_maximize(prob, embed(gamma_bar), sca_cfg);
    if (!din.converged) res.flagged = true;
    const cvec gamma_star = unembed(din.x);
    const double obj_star = objective(gamma_star);
    if (obj_star < obj_bar - 1e-12 * std::max(1.0, std::abs(obj_bar))) {
      res.flagged = true;  // surrogate step failed to improve, keep gamma_bar
      break;
    }
    const bool done = std::abs(obj_star - obj_bar) < cfg.eps_sca;
    gamma_bar = gamma_star;
    obj_bar = obj_star;
    if (done) {
      res.converged = true;
      break;
    }
  }
  // The surrogate only supports short moves, so the SCA rounds above crawl.
  // Finish with gradient ascent on the true ratio: the surrogate rebuilt at the
  // current point is exact there in value and gradient, which gives the true
  // gradient for free. The lower reflection bound is re-linearized at every
  // iterate, so each projected point satisfies the original constraints.
  const auto eval = [&](const rvec& x, rvec* g) -> double {
    const cvec gamma = unembed(x);
    double num = 0.0;
    rvec gnum;
    if (g) {
      gnum.setZero(x.size());
      rvec gk(x.size());
      for (int k = 0; k < params.K; ++k) {
        const UserSurrogate us = surrogate_terms(k, alloc, channels, params, mode, gamma);
        num += surrogate_secrecy_rate(us, gamma, gamma, params.sigma2_E, &gk);
        gnum += gk;
      }
    } else {
      return objective(gamma);
    }
    double den = 1.0;
    rvec gden = rvec::Zero(x.size());
    if (obj == Objective::SEE) {
      if (params.ris_mode == RisMode::NearlyPassive) {
        den = alloc.p.sum() + params.static_power();
      } else {
        den = w.dot(x.cwiseProduct(x)) + pc_eq;
        gden = 2.0 * w.cwiseProduct(x);
      }
    }
    *g = gnum / den - (num / (den * den)) * gden;
    return num / den;
  };
  const auto project_at = [&](const rvec& x_ref, const rvec& y) {
    if (params.ris_mode != RisMode::Active) return project_weighted_ball(y, w, upper);
    const cvec gb = unembed(x_ref);
    const cvec rgb = R.cast<complexd>().cwiseProduct(gb);
    const rvec a = 2.0 * embed(rgb);
    const double b = trR + std::real(gb.dot(rgb));
    bool fl = false;
    const rvec z = project_ball_halfspace(y, w, upper, a, b, &fl);
    if (fl) res.flagged = true;
    return z;
  };

  // Uniform-scale scan: c * gamma stays feasible for a whole interval of c and
  // the objective is very flat in that direction, so a log-spaced line search
  // covers in microseconds what gradient steps would crawl through for ages.
  const auto scale_scan = [&](cvec& g_io, double& obj_io) {
    const double refl = [&] {
      double v = 0.0;
      for (int n = 0; n < params.N; ++n) v += R(n) * std::norm(g_io(n));
      return v;
    }();
    if (refl <= 0.0) return;
    const double c_max = std::sqrt(upper / refl);
    const double c_min =
        params.ris_mode == RisMode::Active ? std::sqrt(trR / refl) : 1e-3 * c_max;
    if (!(c_max > c_min)) return;
    const double lr = std::log(c_max / c_min);
    const cvec base = g_io;
    for (int i = 0; i <= 64; ++i) {
      const double c = c_min * std::exp(lr * i / 64.0);
      const double v = objective(c * base);
      if (v > obj_io) {
        obj_io = v;
        g_io = c * base;
      }
    }
  };

  scale_scan(gamma_bar, obj_bar);

  {
    rvec x = embed(gamma_bar);
    rvec grad(x.size());
    double fx = eval(x, &grad);
    rvec x_prev = x, grad_prev = grad;
    double bb = cfg.init_step;
    for (int it = 0; it < cfg.max_inner; ++it) {
      const rvec full = project_at(x, x + cfg.init_step * grad);
      if ((x - full).norm() / cfg.init_step <= cfg.eps_inner) {
        res.converged = true;
        break;
      }
      if (it > 0) {
        const rvec s = x - x_prev;
        const rvec y = grad_prev - grad;
        const double sy = s.dot(y);
        bb = sy > 0.0 ? std::clamp(s.squaredNorm() / sy, 1e-10, 1e12) : cfg.init_step;
      }
      double step = bb;
      bool accepted = false;
      for (int ls = 0; ls < 60; ++ls) {
        const rvec y = project_at(x, x + step * grad);
        const rvec d = y - x;
        const double fy = eval(y, nullptr);
        if (fy >= fx + cfg.armijo_c * grad.dot(d)) {
          x_prev = x;
          grad_prev = grad;
          x = y;
          fx = eval(x, &grad);
          accepted = true;
          break;
        }
        step *= cfg.armijo_shrink;
      }
      if (!accepted) break;
    }
    const cvec cand = unembed(x);
    const double obj_cand = objective(cand);
    if (obj_cand >= obj_bar) {
      gamma_bar = cand;
      obj_bar = obj_cand;
    }
  }

  scale_scan(gamma_bar, obj_bar);

  res.gamma = gamma_bar;
  return res;
}

}  // namespace risee
