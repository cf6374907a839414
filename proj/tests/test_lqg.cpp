#include <doctest.h>

#include <cmath>
#include <random>

#include "pift/checks.hpp"
#include "pift/constants.hpp"
#include "pift/errors.hpp"
#include "pift/lqg.hpp"

using namespace pift;

namespace {
Vec v1(double x) { return Vec::Constant(1, x); }
Mat eye(int d) { return Mat::Identity(d, d); }
}  // namespace

TEST_CASE("terminal coefficients match the reward") {
  const Schedule s = make_ddpm_schedule(4, 0.9, 0.99);
  Mat A(2, 2);
  A << 1.0, 0.2, 0.2, 0.5;
  const Vec b = (Vec(2) << 1.0, -1.0).finished();
  const ProblemSpec p(s, PretrainedScore::gaussian(s, Vec::Zero(2), eye(2)), RewardModel::quadratic(A, b, 0.7), {1.0});
  const LqgSolution o = solve_lqg(p);
  CHECK((o.P[4] - 2 * A).norm() < 1e-14);
  CHECK((o.q[4] - 2 * A * b).norm() < 1e-14);
  CHECK(o.c[4] == doctest::Approx(0.7 - b.dot(A * b)));
  const Vec y = (Vec(2) << 0.3, 2.0).finished();
  CHECK(oracle_value(o, 4, y) == doctest::Approx(p.reward().eval(y)).epsilon(1e-14));
  for (int t = 0; t < 4; ++t) {
    CHECK(oracle_fixed_point_residual(o, p, t) <= 1e-10);
    CHECK(o.concavity_margin[t] > 0.0);
  }
  // affine control and stationary point of V
  for (int t = 0; t <= 4; ++t) {
    const Vec ys = o.P[t].ldlt().solve(o.q[t]);
    CHECK(oracle_value_grad(o, t, ys).norm() < 1e-10);
  }
  const Vec y1 = (Vec(2) << 0.4, -0.1).finished(), y2 = (Vec(2) << -2.0, 1.3).finished();
  const Vec u0 = oracle_control(o, 1, Vec::Zero(2));
  CHECK(((oracle_control(o, 1, y1 + y2) - u0) - (oracle_control(o, 1, y1) - u0) - (oracle_control(o, 1, y2) - u0))
            .norm() < 1e-12);
}

TEST_CASE("zero reward and large beta pin the control to the score") {
  const Schedule s = make_ddpm_schedule(5, 0.9, 0.99);
  const auto score = PretrainedScore::gaussian(s, v1(0.5), 2.0 * eye(1));
  const ProblemSpec z(s, score, RewardModel::quadratic(Mat::Zero(1, 1), Vec::Zero(1), 0.0), {0.1});
  const LqgSolution o = solve_lqg(z);
  for (int t = 0; t < 5; ++t) {
    CHECK((o.K[t] - score.affine_matrix(t)).norm() < 1e-12);
    CHECK((o.k[t] - score.affine_offset(t)).norm() < 1e-12);
  }
  const ProblemSpec big(s, score, RewardModel::quadratic(eye(1), v1(2.0), 0.0), {1e9});
  const LqgSolution ob = solve_lqg(big);
  for (int t = 0; t < 5; ++t) {
    CHECK((ob.K[t] - score.affine_matrix(t)).norm() < 1e-6);
    CHECK((ob.k[t] - score.affine_offset(t)).norm() < 1e-6);
  }
}

TEST_CASE("single step matches a brute-force Bellman maximization") {
  const double a = 0.99, s2 = 1.0 / 0.99 - 1.0;
  const Schedule s({a}, {std::sqrt(s2)});
  ProblemSpec p(s, PretrainedScore::gaussian(s, Vec::Zero(1), eye(1)),
                RewardModel::quadratic(0.5 * eye(1), Vec::Zero(1), 0.0));
  p = p.with_l0r_domain(10.0);
  const std::vector<double> lam{0.5};
  LipschitzLedger L = bar_ledger(p, lam);
  p = p.with_beta(select_beta(L, p, lam));
  const LqgSolution o = solve_lqg(p);
  const double kc = kl_coefficient(s, 0) * p.beta(0);
  auto rhs = [&](double y, double u) {
    const double m = (y + (1 - a) * u) / std::sqrt(a);
    return -0.5 * (m * m + s2) - kc * (u + y) * (u + y);
  };
  const int N = 100000;
  const double lo = -500.0, hi = 500.0, h = (hi - lo) / (N - 1);
  for (int j = 0; j <= 100; ++j) {
    const double y = -5.0 + 0.1 * j;
    int best = 0;
    double bv = -1e300;
    for (int i = 0; i < N; ++i) {
      const double v = rhs(y, lo + i * h);
      if (v > bv) bv = v, best = i;
    }
    REQUIRE(best > 0);
    REQUIRE(best < N - 1);
    // parabola through the three best scan points
    const double f0 = rhs(y, lo + (best - 1) * h), f1 = bv, f2 = rhs(y, lo + (best + 1) * h);
    const double off = 0.5 * h * (f0 - f2) / (f0 - 2 * f1 + f2);
    const double ub = lo + best * h + off;
    CHECK(std::abs(ub - oracle_control(o, 0, v1(y))(0)) <= 1e-6);
    CHECK(std::abs(rhs(y, ub) - oracle_value(o, 0, v1(y))) <= 1e-6);
  }
}

TEST_CASE("convex reward with small beta is rejected") {
  const Schedule s = make_ddpm_schedule(2, 0.9, 0.99);
  const ProblemSpec p(s, PretrainedScore::gaussian(s, Vec::Zero(1), eye(1)),
                      RewardModel::quadratic(-1.0 * eye(1), Vec::Zero(1), 0.0), {1e-6});
  CHECK_THROWS_AS(solve_lqg(p), ConcavityError);
}

TEST_CASE("oracle fields satisfy the grid fixed point and the product formula") {
  const Schedule s = make_ddpm_schedule(10, 0.95, 0.999);
  ProblemSpec p(s, PretrainedScore::gaussian(s, Vec::Zero(1), eye(1)),
                RewardModel::quadratic(0.5 * eye(1), Vec::Ones(1), 0.0));
  p = p.with_l0r_domain(7.0);
  const std::vector<double> lam{0.5};
  LipschitzLedger L = bar_ledger(p, lam);
  p = p.with_beta(select_beta(L, p, lam));
  const LqgSolution o = solve_lqg(p);
  for (const auto& c : check_oracle_consistency(p, o, default_step_grids(p, 256), 32)) CHECK_MESSAGE(c.passed, c.name);
  for (const auto& c : check_product_formula(p, o, 100, 32, 1)) CHECK_MESSAGE(c.passed, c.name);
}
