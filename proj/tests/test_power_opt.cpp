#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"

using namespace risee;
using testutil::rel_err;

TEST_CASE("coefficients reproduce the secrecy rate and power for any p") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto mode : {CsiMode::Perfect, CsiMode::Statistical}) {
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
      auto inst = testutil::random_instance(seed);
      const auto co = power_coefficients(inst.alloc, inst.channels, inst.params, mode);
      // Same gamma and filters, arbitrary other p.
      Allocation probe = inst.alloc;
      for (int k = 0; k < inst.params.K; ++k) probe.p(k) = u(rng) * inst.params.P_max(k);
      CHECK(rel_err(ssr_from_coefficients(probe.p, co),
                    ssr_per_hz(probe, inst.channels, inst.params, mode)) < 1e-10);
      // mu_k and P_c_eq reconstruct the exact consumed power.
      CHECK(rel_err(co.mu.dot(probe.p) + co.P_c_eq,
                    power_total(probe, inst.channels, inst.params)) < 1e-10);
      CHECK(rel_err(see_from_coefficients(probe.p, co),
                    ssr_per_hz(probe, inst.channels, inst.params, mode) /
                        power_total(probe, inst.channels, inst.params)) < 1e-10);
    }
  }
}

TEST_CASE("power surrogate is exact with matching gradient at the expansion point") {
  for (auto mode : {CsiMode::Perfect, CsiMode::Statistical}) {
    for (auto obj : {Objective::SEE, Objective::SSR}) {
      for (std::uint64_t seed = 11; seed <= 16; ++seed) {
        auto inst = testutil::random_instance(seed);
        const auto co = power_coefficients(inst.alloc, inst.channels, inst.params, mode);
        const rvec p_bar = inst.alloc.p;
        rvec grad;
        const double at_bar = surrogate_see_power(p_bar, p_bar, co, obj, &grad);
        const double truth = obj == Objective::SSR ? ssr_from_coefficients(p_bar, co)
                                                   : see_from_coefficients(p_bar, co);
        CHECK(rel_err(at_bar, truth) < 1e-8);
        const auto f = [&](const rvec& p) {
          return surrogate_see_power(p, p_bar, co, obj, nullptr);
        };
        const rvec fd = testutil::fd_gradient(f, p_bar, 1e-7);
        CHECK((grad - fd).norm() < 1e-4 * std::max(1.0, fd.norm()));
      }
    }
  }
}

TEST_CASE("power surrogate minorizes the truth over the box") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto mode : {CsiMode::Perfect, CsiMode::Statistical}) {
    for (auto obj : {Objective::SEE, Objective::SSR}) {
      for (std::uint64_t seed = 21; seed <= 25; ++seed) {
        auto inst = testutil::random_instance(seed);
        const auto co = power_coefficients(inst.alloc, inst.channels, inst.params, mode);
        const rvec p_bar = inst.alloc.p;
        for (int rep = 0; rep < 200; ++rep) {
          rvec p(inst.params.K);
          for (int k = 0; k < inst.params.K; ++k) p(k) = u(rng) * inst.params.P_max(k);
          const double truth = obj == Objective::SSR ? ssr_from_coefficients(p, co)
                                                     : see_from_coefficients(p, co);
          CHECK(surrogate_see_power(p, p_bar, co, obj, nullptr) <= truth + 1e-8);
        }
      }
    }
  }
}

TEST_CASE("power step improves the objective and keeps every constraint") {
  SolverConfig cfg;
  for (auto mode : {CsiMode::Perfect, CsiMode::Statistical}) {
    for (auto obj : {Objective::SEE, Objective::SSR}) {
      for (std::uint64_t seed = 31; seed <= 36; ++seed) {
        auto inst = testutil::random_instance(seed);
        const double before = objective_per_hz(inst.alloc, inst.channels, inst.params, mode, obj);
        const auto res = optimize_power(inst.alloc, inst.channels, inst.params, mode, obj, cfg);
        Allocation after = inst.alloc;
        after.p = res.p;
        CHECK(objective_per_hz(after, inst.channels, inst.params, mode, obj) >= before - 1e-9);
        const auto rep = check_feasibility(after, inst.channels, inst.params, 1e-8);
        CHECK(rep.feasible);
      }
    }
  }
}

TEST_CASE("power step in nearly-passive mode") {
  SolverConfig cfg;
  auto inst = testutil::random_instance(41, 2, 8, 2, RisMode::NearlyPassive);
  const double before =
      objective_per_hz(inst.alloc, inst.channels, inst.params, CsiMode::Perfect, Objective::SEE);
  const auto res = optimize_power(inst.alloc, inst.channels, inst.params, CsiMode::Perfect,
                                  Objective::SEE, cfg);
  Allocation after = inst.alloc;
  after.p = res.p;
  CHECK(objective_per_hz(after, inst.channels, inst.params, CsiMode::Perfect, Objective::SEE) >=
        before - 1e-9);
  CHECK(check_feasibility(after, inst.channels, inst.params).feasible);
}

TEST_CASE("interference-free single-user power step matches golden-section search") {
  // K = 1 removes multi-user coupling; the SEE in p is unimodal, so a 1-D
  // golden-section search provides an independent optimum.
  SolverConfig cfg;
  for (std::uint64_t seed = 51; seed <= 56; ++seed) {
    auto inst = testutil::random_instance(seed, 1, 8, 2);
    const auto co = power_coefficients(inst.alloc, inst.channels, inst.params, CsiMode::Perfect);
    const auto f = [&](double p) {
      return see_from_coefficients(rvec::Constant(1, p), co);
    };
    // the feasible interval is the power box intersected with the reflected-power slab
    double w = 0.0, s = 0.0;
    for (int n = 0; n < inst.params.N; ++n) {
      const double d = std::norm(inst.alloc.gamma(n)) - 1.0;
      s += d;
      w += d * std::norm(inst.channels.h[0](n));
    }
    double a = 0.0, b = inst.params.P_max(0);
    const double slab_hi = inst.params.ris_rf_budget() - inst.params.sigma2_RIS * s;
    const double slab_lo = -inst.params.sigma2_RIS * s;
    if (w > 0.0) {
      b = std::min(b, slab_hi / w);
      a = std::max(a, slab_lo / w);
    } else if (w < 0.0) {
      b = std::min(b, slab_lo / w);
      a = std::max(a, slab_hi / w);
    }
    REQUIRE(b >= a);
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - gr * (b - a), d = a + gr * (b - a);
    for (int i = 0; i < 200; ++i) {
      if (f(c) > f(d))
        b = d;
      else
        a = c;
      c = b - gr * (b - a);
      d = a + gr * (b - a);
    }
    const double golden = f(0.5 * (a + b));
    const auto res =
        optimize_power(inst.alloc, inst.channels, inst.params, CsiMode::Perfect, Objective::SEE, cfg);
    const double solved = see_from_coefficients(res.p, co);
    CHECK(solved >= golden - 1e-3 * std::abs(golden) - 1e-12);
  }
}
