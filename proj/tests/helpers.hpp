#pragma once

#include <random>

#include "risee/experiment.hpp"

namespace testutil {

using namespace risee;

struct Instance {
  SystemParams params;
  ChannelSet channels;
  Allocation alloc;
};

inline SystemParams small_params(int K = 2, int N = 8, int N_B = 2,
                                 RisMode mode = RisMode::Active) {
  SystemParams p;
  p.K = K;
  p.N_B = N_B;
  p.N = N;
  p.B = 20e6;
  const double noise = noise_power(p.B, -174.0, 5.0);
  p.sigma2_B = p.sigma2_RIS = p.sigma2_E = noise;
  p.P_max = rvec::Constant(K, dbm_to_watt(30.0));
  p.P_R_max = dbm_to_watt(30.0);
  p.ris_mode = mode;
  p.P_c_n = dbm_to_watt(0.0);
  p.P_0_RIS = dbm_to_watt(30.0);
  p.P_0 = dbm_to_watt(20.0);
  return p;
}

/// Draws a uniformly random allocation satisfying the box and reflection
/// constraints with strictly interior reflected power.
inline Allocation random_feasible(const SystemParams& params, const ChannelSet& channels,
                                  std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Allocation alloc;
  alloc.p = rvec(params.K);
  for (int k = 0; k < params.K; ++k) alloc.p(k) = (0.05 + 0.9 * unif(rng)) * params.P_max(k);
  alloc.gamma = cvec(params.N);
  for (int n = 0; n < params.N; ++n)
    alloc.gamma(n) = std::polar(0.5 + unif(rng), 2.0 * M_PI * unif(rng));
  const rvec R = r_diag(params, channels, alloc.p);
  const double trR = R.sum();
  const double reflected = R.dot(alloc.gamma.cwiseAbs2());
  double target;
  if (params.ris_mode == RisMode::Active)
    target = trR + unif(rng) * 0.9 * params.P_R_max;
  else
    target = (0.2 + 0.75 * unif(rng)) * trR;
  alloc.gamma *= std::sqrt(target / reflected);
  alloc.C = lmmse_filters(alloc, channels, params);
  return alloc;
}

inline Instance random_instance(std::uint64_t seed, int K = 2, int N = 8, int N_B = 2,
                                RisMode mode = RisMode::Active, double nev_target = 0.5) {
  Instance inst;
  inst.params = small_params(K, N, N_B, mode);
  inst.channels = generate_scenario(inst.params, GeometryConfig{}, FadingConfig{}, seed,
                                    nev_target);
  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ull + 1);
  inst.alloc = random_feasible(inst.params, inst.channels, rng);
  return inst;
}

/// Central finite-difference gradient.
template <typename F>
rvec fd_gradient(F&& f, const rvec& x, double h = 1e-6) {
  rvec g(x.size());
  for (int i = 0; i < x.size(); ++i) {
    rvec xp = x, xm = x;
    const double step = h * std::max(1.0, std::abs(x(i)));
    xp(i) += step;
    xm(i) -= step;
    g(i) = (f(xp) - f(xm)) / (2.0 * step);
  }
  return g;
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

}  // namespace testutil
