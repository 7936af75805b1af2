#pragma once

// Finite-resolution RIS reflection: per-element phase and modulus codebooks.

#include "risee/allocator.hpp"

namespace risee {

struct QuantizationConfig {
  int bits_phase = 3;
  int bits_modulus = 3;
};

/// Feasible per-element modulus interval shared by all elements. Derived from
/// the reflection constraints with the reflected power spread evenly over N
/// elements weighted by the worst-case diagonal entries.
inline std::pair<double, double> modulus_interval(const rvec& R, double P_R_max, int N) {
  const double trR = R.sum();
  const double r_max = R.maxCoeff();
  const double r_min = R.minCoeff();
  const double lo = std::sqrt(trR / (r_max * N));
  const double hi = std::sqrt((trR + P_R_max) / (r_min * N));
  return {lo, hi};
}

/// Nearest-point quantization. Phases use 2^b uniform points on [0, 2pi) with
/// circular distance; moduli use 2^b log-uniform points on [lo, hi] — active
/// reflection gains span several orders of magnitude, so a linear codebook
/// wastes nearly all of its levels on the top decade.
inline cvec quantize_gamma(const cvec& gamma, const QuantizationConfig& q, double lo, double hi) {
  const int Lp = 1 << q.bits_phase;
  const int Lm = 1 << q.bits_modulus;
  cvec out(gamma.size());
  for (int n = 0; n < gamma.size(); ++n) {
    double phase = std::arg(gamma(n));
    if (phase < 0) phase += 2.0 * M_PI;
    const double step = 2.0 * M_PI / Lp;
    int ip = static_cast<int>(std::lround(phase / step)) % Lp;
    double mod = std::abs(gamma(n));
    double qmod;
    if (Lm == 1) {
      qmod = lo;
    } else {
      const double mstep = std::log(hi / lo) / (Lm - 1);
      int im = static_cast<int>(std::lround(std::log(std::max(mod, lo) / lo) / mstep));
      im = std::clamp(im, 0, Lm - 1);
      qmod = lo * std::exp(im * mstep);
    }
    out(n) = std::polar(qmod, ip * step);
  }
  return out;
}

/// Quantizes the reflection vector of a solved allocation, restores constraint
/// feasibility with a scalar rescale, refreshes the LMMSE filters, and scores
/// the result.
inline std::pair<Allocation, AllocationReport> quantized_evaluate(const Allocation& alloc,
                                                                  const ChannelSet& channels,
                                                                  const SystemParams& params,
                                                                  const QuantizationConfig& q) {
  const rvec R = r_diag(params, channels, alloc.p);
  const auto [lo, hi] = modulus_interval(R, params.ris_rf_budget(), params.N);
  Allocation out = alloc;
  out.gamma = quantize_gamma(alloc.gamma, q, lo, hi);
  restore_reflection_feasibility(out.gamma, R, params);
  out.C = lmmse_filters(out, channels, params);
  return {out, evaluate_allocation(out, channels, params)};
}

}  // namespace risee
