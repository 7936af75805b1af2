#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"

using namespace risee;

namespace {

std::mt19937_64 rng(12345);

rvec random_vec(int n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  rvec x(n);
  for (int i = 0; i < n; ++i) x(i) = u(rng);
  return x;
}

// Projection optimality: z = P(x) iff <x - z, y - z> <= 0 for all feasible y.
template <typename Sampler>
bool projection_optimal(const rvec& x, const rvec& z, Sampler&& feasible_point, int samples) {
  for (int i = 0; i < samples; ++i) {
    const rvec y = feasible_point();
    if ((x - z).dot(y - z) > 1e-9 * std::max(1.0, (x - z).norm() * (y - z).norm()))
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("box projection clamps coordinatewise") {
  const rvec lo = rvec::Constant(4, -1.0), hi = rvec::Constant(4, 2.0);
  rvec x(4);
  x << -3.0, 0.5, 7.0, 2.0;
  const rvec z = project_box(x, lo, hi);
  CHECK(z(0) == -1.0);
  CHECK(z(1) == 0.5);
  CHECK(z(2) == 2.0);
  CHECK(z(3) == 2.0);
}

TEST_CASE("weighted ball projection is exact") {
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 6;
    const rvec w = random_vec(n, 0.1, 5.0);
    const double bound = 2.0;
    const rvec x = random_vec(n, -3.0, 3.0);
    const rvec z = project_weighted_ball(x, w, bound);
    CHECK(w.dot(z.cwiseProduct(z)) <= bound * (1.0 + 1e-9));
    if (w.dot(x.cwiseProduct(x)) <= bound) {
      CHECK((z - x).norm() == doctest::Approx(0.0));
      continue;
    }
    auto sample = [&] {
      rvec y = random_vec(n, -3.0, 3.0);
      const double q = w.dot(y.cwiseProduct(y));
      if (q > bound) y *= std::sqrt(bound / q) * 0.999;
      return y;
    };
    CHECK(projection_optimal(x, z, sample, 200));
  }
}

TEST_CASE("halfspace projection satisfies the constraint with minimal movement") {
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 5;
    const rvec a = random_vec(n, -2.0, 2.0);
    const double b = 0.7;
    const rvec x = random_vec(n, -3.0, 3.0);
    const rvec z = project_halfspace(x, a, b);
    CHECK(a.dot(z) >= b - 1e-9);
    if (a.dot(x) >= b) CHECK((z - x).norm() == doctest::Approx(0.0));
    // Exact formula: x + max(0, b - a.x)/||a||^2 a.
    const rvec ref = x + std::max(0.0, b - a.dot(x)) / a.squaredNorm() * a;
    CHECK((z - ref).norm() < 1e-12);
  }
}

TEST_CASE("Dykstra projection lands on the ball-halfspace intersection") {
  for (int rep = 0; rep < 10; ++rep) {
    const int n = 6;
    const rvec w = random_vec(n, 0.2, 3.0);
    const double bound = 4.0;
    // Pick a halfspace that intersects the ball: pass through an interior point.
    rvec inner = random_vec(n, -0.5, 0.5);
    const double q = w.dot(inner.cwiseProduct(inner));
    if (q > 0.5 * bound) inner *= std::sqrt(0.5 * bound / q);
    const rvec a = random_vec(n, -2.0, 2.0);
    const double b = a.dot(inner);

    const rvec x = random_vec(n, -4.0, 4.0);
    bool flagged = false;
    const rvec z = project_ball_halfspace(x, w, bound, a, b, &flagged);
    CHECK_FALSE(flagged);
    CHECK(w.dot(z.cwiseProduct(z)) <= bound * (1.0 + 1e-8));
    CHECK(a.dot(z) >= b - 1e-8 * std::max(1.0, std::abs(b)));
    auto sample = [&] {
      rvec y = inner + random_vec(n, -1.0, 1.0);
      const double qy = w.dot(y.cwiseProduct(y));
      if (qy > bound) y = inner + (y - inner) * 0.3;
      if (a.dot(y) < b || w.dot(y.cwiseProduct(y)) > bound) y = inner;
      return y;
    };
    CHECK(projection_optimal(x, z, sample, 100));
  }
}

TEST_CASE("projected gradient recovers the clamped maximizer of a concave quadratic") {
  const int n = 5;
  const rvec target = random_vec(n, -2.0, 2.0);
  const rvec lo = rvec::Constant(n, -1.0), hi = rvec::Constant(n, 1.0);
  const ObjFn f = [&](const rvec& x, rvec* g) {
    if (g) *g = -2.0 * (x - target);
    return -(x - target).squaredNorm();
  };
  const ProjFn proj = [&](const rvec& x) { return project_box(x, lo, hi); };
  SolverConfig cfg;
  const rvec x = projected_gradient_max(f, proj, rvec::Zero(n), cfg).x;
  const rvec expect = project_box(target, lo, hi);
  CHECK((x - expect).norm() < 1e-5);
}

TEST_CASE("Dinkelbach solves a known linear-fractional program") {
  // max (2 x0 + x1 + 1) / (x0 + x1 + 2) over [0,1]^2; the optimal set is
  // x0 = 1 (any x1), with value 1.
  RatioProblem prob;
  prob.dimension = 2;
  prob.numerator = [](const rvec& x, rvec* g) {
    if (g) (*g) << 2.0, 1.0;
    return 2.0 * x(0) + x(1) + 1.0;
  };
  prob.denominator = [](const rvec& x, rvec* g) {
    if (g) (*g) << 1.0, 1.0;
    return x(0) + x(1) + 2.0;
  };
  const rvec lo = rvec::Zero(2), hi = rvec::Ones(2);
  prob.project = [&](const rvec& x) { return project_box(x, lo, hi); };
  SolverConfig cfg;
  const auto res = dinkelbach_maximize(prob, rvec::Constant(2, 0.5), cfg);
  CHECK(res.converged);
  CHECK(res.x(0) == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(res.ratio == doctest::Approx(1.0).epsilon(1e-5));

  // Dinkelbach iterates are monotone in the ratio.
  for (std::size_t i = 1; i < res.lambda_trace.size(); ++i)
    CHECK(res.lambda_trace[i] >= res.lambda_trace[i - 1] - 1e-9);
}

TEST_CASE("Dinkelbach matches a dense grid on a nonconvex-looking ratio") {
  // max (log(1 + 4x) ) / (x + 0.5) over [0, 3]: pseudo-concave, unique optimum.
  RatioProblem prob;
  prob.dimension = 1;
  prob.numerator = [](const rvec& x, rvec* g) {
    if (g) (*g)(0) = 4.0 / (1.0 + 4.0 * x(0));
    return std::log(1.0 + 4.0 * x(0));
  };
  prob.denominator = [](const rvec& x, rvec* g) {
    if (g) (*g)(0) = 1.0;
    return x(0) + 0.5;
  };
  const rvec lo = rvec::Zero(1), hi = rvec::Constant(1, 3.0);
  prob.project = [&](const rvec& x) { return project_box(x, lo, hi); };
  SolverConfig cfg;
  const auto res = dinkelbach_maximize(prob, rvec::Constant(1, 1.0), cfg);

  double best = -1.0;
  for (int i = 0; i <= 30000; ++i) {
    const double x = 3.0 * i / 30000.0;
    best = std::max(best, std::log(1.0 + 4.0 * x) / (x + 0.5));
  }
  CHECK(res.ratio == doctest::Approx(best).epsilon(1e-6));
}
