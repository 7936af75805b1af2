#pragma once

// Generic engine for maximizing a pseudo-concave ratio (concave numerator,
// convex positive denominator) over a convex set with a cheap projection:
// Dinkelbach outer loop, Armijo-backtracked projected gradient ascent inside.

#include <functional>

#include "risee/types.hpp"

namespace risee {

struct SolverConfig {
  double eps_outer = 1e-6;  // Dinkelbach tolerance
  double eps_inner = 1e-7;  // projected-gradient stationarity tolerance
  int max_outer = 20;
  int max_inner = 400;
  double armijo_c = 1e-4;
  double armijo_shrink = 0.5;
  double init_step = 1.0;

  double eps_sca = 1e-5;  // surrogate (SCA) loops in the gamma/power steps
  int max_sca = 10;
  int max_sca_power = 200;  // the power step is cheap, let its SCA run longer
  double eps_sca_power = 1e-8;
  double eps_alt = 1e-4;  // alternating orchestrator, per-Hz objective gap
  int max_alt = 30;
};

// Callback: value at x, optionally filling the gradient.
using ObjFn = std::function<double(const rvec&, rvec*)>;
using ProjFn = std::function<rvec(const rvec&)>;

struct RatioProblem {
  ObjFn numerator;    // concave
  ObjFn denominator;  // convex, positive on the feasible set
  ProjFn project;
  int dimension = 0;
};

struct SolveResult {
  rvec x;
  double value = 0;
  int iterations = 0;
  bool converged = false;
};

inline SolveResult projected_gradient_max(const ObjFn& f, const ProjFn& project, const rvec& x0,
                                          const SolverConfig& cfg) {
  SolveResult res;
  rvec x = project(x0);
  rvec grad(x.size());
  double fx = f(x, &grad);
  if (!std::isfinite(fx)) throw std::runtime_error("non-finite objective value");
  rvec x_prev = x, grad_prev = grad;
  double bb = cfg.init_step;  // Barzilai-Borwein trial step, refreshed per iteration
  for (int it = 0; it < cfg.max_inner; ++it) {
    res.iterations = it;
    const rvec full = project(x + cfg.init_step * grad);
    if ((x - full).norm() / cfg.init_step <= cfg.eps_inner) {
      res.converged = true;
      break;
    }
    if (it > 0) {
      const rvec s = x - x_prev;
      const rvec y = grad_prev - grad;  // ascent: curvature pair sign-flipped
      const double sy = s.dot(y);
      bb = sy > 0.0 ? std::clamp(s.squaredNorm() / sy, 1e-10, 1e12) : cfg.init_step;
    }
    double step = bb;
    bool accepted = false;
    for (int h = 0; h < 60; ++h) {
      const rvec y = project(x + step * grad);
      const rvec d = y - x;
      const double fy = f(y, nullptr);
      if (std::isfinite(fy) && fy >= fx + cfg.armijo_c * grad.dot(d)) {
        x_prev = x;
        grad_prev = grad;
        x = y;
        fx = f(x, &grad);
        accepted = true;
        break;
      }
      step *= cfg.armijo_shrink;
    }
    if (!accepted) break;  // line-search failure, return current iterate flagged
  }
  res.x = x;
  res.value = fx;
  return res;
}

struct DinkelbachResult {
  rvec x;
  double ratio = 0;
  std::vector<double> lambda_trace;
  int outer_iterations = 0;
  int inner_iterations = 0;
  bool converged = false;
};

inline DinkelbachResult dinkelbach_maximize(const RatioProblem& prob, const rvec& x0,
                                            const SolverConfig& cfg) {
  DinkelbachResult res;
  rvec x = prob.project(x0);
  double num = prob.numerator(x, nullptr);
  double den = prob.denominator(x, nullptr);
  if (!std::isfinite(num) || !std::isfinite(den)) throw std::runtime_error("non-finite callbacks");
  if (den <= 0) throw std::runtime_error("non-positive denominator at start");
  double lambda = num / den;

  for (int t = 0; t < cfg.max_outer; ++t) {
    res.outer_iterations = t + 1;
    const ObjFn parametric = [&](const rvec& z, rvec* g) {
      if (g) {
        rvec gn(z.size()), gd(z.size());
        const double n = prob.numerator(z, &gn);
        const double d = prob.denominator(z, &gd);
        *g = gn - lambda * gd;
        return n - lambda * d;
      }
      return prob.numerator(z, nullptr) - lambda * prob.denominator(z, nullptr);
    };
    const SolveResult inner = projected_gradient_max(parametric, prob.project, x, cfg);
    res.inner_iterations += inner.iterations;
    x = inner.x;
    num = prob.numerator(x, nullptr);
    den = prob.denominator(x, nullptr);
    if (den <= 0) throw std::runtime_error("non-positive denominator at iterate");
    const double excess = num - lambda * den;
    lambda = num / den;
    res.lambda_trace.push_back(lambda);
    if (excess < cfg.eps_outer * den) {
      res.converged = true;
      break;
    }
  }
  res.x = x;
  res.ratio = lambda;
  return res;
}

inline rvec project_box(const rvec& x, const rvec& lo, const rvec& hi) {
  return x.cwiseMax(lo).cwiseMin(hi);
}

/// Projection onto { y : sum_i w_i y_i^2 <= bound }, w_i > 0. Solved exactly
/// via the Lagrange multiplier equation (Newton with a monotone safeguard).
inline rvec project_weighted_ball(const rvec& x, const rvec& w, double bound) {
  const double val = w.dot(x.cwiseProduct(x));
  if (val <= bound) return x;
  if (bound <= 0) return rvec::Zero(x.size());
  double lam = 0.0;
  for (int it = 0; it < 200; ++it) {
    double phi = -bound, dphi = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double s = 1.0 + lam * w(i);
      phi += w(i) * x(i) * x(i) / (s * s);
      dphi -= 2.0 * w(i) * w(i) * x(i) * x(i) / (s * s * s);
    }
    if (std::abs(phi) <= 1e-14 * bound) break;
    double next = lam - phi / dphi;
    if (!(next > 0.0) || !std::isfinite(next)) next = 2.0 * lam + 1e-16;
    lam = next;
  }
  rvec y(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) y(i) = x(i) / (1.0 + lam * w(i));
  return y;
}

/// Projection onto { y : a^T y >= b }.
inline rvec project_halfspace(const rvec& x, const rvec& a, double b) {
  const double gap = a.dot(x) - b;
  if (gap >= 0) return x;
  return x - gap / a.squaredNorm() * a;
}

/// Dykstra projection onto the intersection of the weighted-norm ball and the
/// halfspace a^T y >= b. The intersection must be non-empty.
inline rvec project_ball_halfspace(const rvec& x, const rvec& w, double bound, const rvec& a,
                                   double b, bool* flagged = nullptr) {
  rvec y = x;
  rvec p = rvec::Zero(x.size());
  rvec q = rvec::Zero(x.size());
  if (flagged) *flagged = false;
  for (int s = 0; s < 500; ++s) {
    const rvec y1 = project_weighted_ball(y + p, w, bound);
    p = y + p - y1;
    const rvec y2 = project_halfspace(y1 + q, a, b);
    q = y1 + q - y2;
    if ((y2 - y).norm() < 1e-10 * std::max(1.0, y2.norm()) && s > 0) return y2;
    y = y2;
    if (s == 499 && flagged) *flagged = true;
  }
  return y;
}

}  // namespace risee
