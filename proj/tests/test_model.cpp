#include <doctest.h>

#include <cmath>
#include <random>

#include "pift/errors.hpp"
#include "pift/model.hpp"

using namespace pift;

namespace {
Vec v1(double x) { return Vec::Constant(1, x); }
Vec v2(double x, double y) { return (Vec(2) << x, y).finished(); }
Mat eye(int d) { return Mat::Identity(d, d); }
}  // namespace

TEST_CASE("ddpm schedule values") {
  const Schedule s = make_ddpm_schedule(1, 0.99, 0.99);
  CHECK(s.steps() == 1);
  CHECK(s.alpha(0) == 0.99);
  CHECK(s.sigma(0) == doctest::Approx(0.100504).epsilon(1e-6));

  const Schedule s3 = make_ddpm_schedule(3, 0.9, 0.9);
  for (int t = 0; t < 3; ++t) {
    CHECK(s3.alpha(t) == 0.9);
    CHECK(s3.sigma(t) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }

  const Schedule d = make_ddpm_schedule(10, 0.95, 0.999);
  CHECK(d.alpha(0) == doctest::Approx(0.95));
  CHECK(d.alpha(9) == doctest::Approx(0.999));
  CHECK(d.alpha(4) == doctest::Approx(0.95 + 4 * 0.049 / 9));
  CHECK(d.alpha_bar(10) == 1.0);
  CHECK(d.alpha_bar(9) == doctest::Approx(0.999));
}

TEST_CASE("schedule validation") {
  CHECK_THROWS_AS(make_ddpm_schedule(3, 1.0, 1.0), ValidationError);
  CHECK_THROWS_AS(make_ddpm_schedule(3, 0.0, 0.5), ValidationError);
  CHECK_THROWS_AS(make_ddpm_schedule(3, 0.9, 0.8), ValidationError);
  CHECK_THROWS_AS(make_ddpm_schedule(0, 0.9, 0.9), ValidationError);
  CHECK_THROWS_AS(Schedule({0.9, 0.9}, {0.1}), ValidationError);
  CHECK_THROWS_AS(Schedule({0.9}, {0.0}), ValidationError);
}

TEST_CASE("gaussian score") {
  const Schedule s = make_ddpm_schedule(10, 0.95, 0.999);
  const auto sc = PretrainedScore::gaussian(s, Vec::Zero(2), eye(2));
  for (int t = 0; t < 10; ++t) {
    CHECK(sc.eval(t, Vec::Zero(2)).norm() == 0.0);
    const Vec y = v2(0.7, -1.3);
    CHECK((sc.eval(t, y) + y).norm() < 1e-14);
    CHECK(sc.L1s(t) == 0.0);
    CHECK(sc.L0s(t) == doctest::Approx(1.0));
  }
  // Non-isotropic: s_t(y) = -Sigma_t^{-1}(y - sqrt(abar) mu)
  Mat C(2, 2);
  C << 2.0, 0.4, 0.4, 0.5;
  const Vec mu = v2(1.0, -2.0);
  const auto g = PretrainedScore::gaussian(s, mu, C);
  const int t = 3;
  const double ab = s.alpha_bar(t);
  const Mat St = ab * C + (1 - ab) * eye(2);
  const Vec y = v2(0.2, 0.9);
  const Vec expect = -St.inverse() * (y - std::sqrt(ab) * mu);
  CHECK((g.eval(t, y) - expect).norm() < 1e-12);
  CHECK((g.jacobian(t, y) + St.inverse()).norm() < 1e-12);
}

TEST_CASE("mixture score") {
  const Schedule s = make_ddpm_schedule(5, 0.9, 0.99);
  const auto mix = PretrainedScore::mixture(s, {0.5, 0.5}, {v1(2.0), v1(-2.0)}, {eye(1), eye(1)});
  for (int t = 0; t < 5; ++t) CHECK(std::abs(mix.eval(t, v1(0.0))(0)) < 1e-14);
  CHECK_THROWS_AS(PretrainedScore::mixture(s, {0.6, 0.6}, {v1(2.0), v1(-2.0)}, {eye(1), eye(1)}),
                  ValidationError);
  CHECK_THROWS_AS(PretrainedScore::mixture(s, {1.2, -0.2}, {v1(2.0), v1(-2.0)}, {eye(1), eye(1)}),
                  ValidationError);

  // Jacobian against central differences, and L0s as an empirical upper bound.
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(-5.0, 5.0);
  for (int t = 0; t < 5; ++t) {
    for (int k = 0; k < 200; ++k) {
      const Vec a = v1(U(rng)), b = v1(U(rng));
      CHECK((mix.eval(t, a) - mix.eval(t, b)).norm() <= mix.L0s(t) * (a - b).norm() + 1e-12);
      const double h = 1e-5;
      const double fd = (mix.eval(t, a + v1(h))(0) - mix.eval(t, a - v1(h))(0)) / (2 * h);
      CHECK(mix.jacobian(t, a)(0, 0) == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("reward models") {
  const auto h = RewardModel::pseudo_huber(Vec::Zero(1), 1.0, 1.0);
  CHECK(h.eval(Vec::Zero(1)) == 0.0);
  CHECK(h.grad(Vec::Zero(1)).norm() == 0.0);
  const auto h2 = RewardModel::pseudo_huber(v2(1.0, 0.0), 2.0, 3.0);
  CHECK(h2.L0r() == 3.0);
  CHECK(h2.L1r() == 1.5);
  CHECK(h2.l0_bounded());

  const auto q = RewardModel::quadratic(eye(2), Vec::Zero(2), 0.0);
  CHECK(q.eval(v2(1.0, 1.0)) == -2.0);
  CHECK(std::isinf(q.L0r()));
  CHECK_FALSE(q.l0_bounded());
  Mat A(2, 2);
  A << 2.0, 1.0, 1.0, 2.0;
  CHECK(RewardModel::quadratic(A, Vec::Zero(2), 0.0).L1r() == doctest::Approx(6.0));
  const auto zero = RewardModel::quadratic(Mat::Zero(1, 1), Vec::Zero(1), 0.0);
  CHECK(zero.L0r() == 0.0);
  CHECK(zero.L1r() == 0.0);

  // sup |grad r| on a box for -(y-b)^2/2 with b = 1 on [-3, 2]: |-(y-1)| maximal at y=-3
  const auto q1 = RewardModel::quadratic(0.5 * eye(1), v1(1.0), 0.0);
  CHECK(q1.sup_grad_norm_on_box(v1(-3.0), v1(2.0)) == doctest::Approx(4.0));
}

TEST_CASE("pseudo-huber gradient matches finite differences") {
  const auto h = RewardModel::pseudo_huber(v2(0.5, -1.0), 0.7, 1.3);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(-4.0, 4.0);
  const double e = 1e-3;
  for (int k = 0; k < 100; ++k) {
    const Vec y = v2(U(rng), U(rng));
    const Vec g = h.grad(y);
    for (int i = 0; i < 2; ++i) {
      Vec d = Vec::Zero(2);
      d(i) = e;
      const double fd = (-h.eval(y + 2 * d) + 8 * h.eval(y + d) - 8 * h.eval(y - d) + h.eval(y - 2 * d)) / (12 * e);
      CHECK(std::abs(fd - g(i)) <= 1e-8 * std::max(1.0, std::abs(g(i))));
    }
  }
}

TEST_CASE("step dynamics and one-step KL") {
  const Schedule s({0.25}, {1.0});
  CHECK(step_dynamics(s, 0, v1(1.0), v1(1.0), v1(0.0))(0) == doctest::Approx(3.5));
  const double a = 1.0 - 1e-9;
  const Schedule near({a}, {0.1});
  CHECK(step_dynamics(near, 0, v1(2.0), v1(0.0), v1(0.0))(0) == doctest::Approx(2.0 / std::sqrt(a)));
  CHECK(step_dynamics(s, 0, v1(1.0), v1(1.0), v1(0.5))(0) == doctest::Approx(4.0));

  const Schedule k({0.99}, {std::sqrt(1.0 / 0.99 - 1.0)});
  CHECK(kl_onestep(k, 0, v1(1.0), v1(0.0)) == doctest::Approx(0.005).epsilon(1e-12));
  CHECK(kl_onestep(k, 0, v1(0.3), v1(0.3)) == 0.0);
  CHECK(kl_coefficient(k, 0) == doctest::Approx(0.005));
}

TEST_CASE("problem spec validation") {
  const Schedule s = make_ddpm_schedule(3, 0.9, 0.99);
  const auto sc = PretrainedScore::gaussian(s, Vec::Zero(1), eye(1));
  const auto r2 = RewardModel::pseudo_huber(Vec::Zero(2), 1.0, 1.0);
  CHECK_THROWS_AS(ProblemSpec(s, sc, r2), ValidationError);
  const auto r1 = RewardModel::pseudo_huber(Vec::Zero(1), 1.0, 1.0);
  CHECK_THROWS_AS(ProblemSpec(s, sc, r1, {1.0, -1.0, 1.0}), ValidationError);
  const ProblemSpec p = ProblemSpec(s, sc, r1).with_beta({0.5});
  CHECK(p.beta(2) == 0.5);
  const auto other = make_ddpm_schedule(4, 0.9, 0.99);
  CHECK_THROWS_AS(ProblemSpec(other, sc, r1), ValidationError);
}

TEST_CASE("affine reference marginals for unit gaussian data") {
  const Schedule s = make_ddpm_schedule(10, 0.95, 0.999);
  const ProblemSpec p(s, PretrainedScore::gaussian(s, Vec::Zero(1), eye(1)),
                      RewardModel::pseudo_huber(Vec::Zero(1), 1.0, 1.0));
  const auto m = affine_reference_marginals(p);
  REQUIRE(m.size() == 11);
  // s = -y makes each step Y' = sqrt(a) Y + sigma W
  double var = 1.0;
  for (int t = 0; t <= 10; ++t) {
    CHECK(std::abs(m[t].mean(0)) < 1e-14);
    CHECK(m[t].cov(0, 0) == doctest::Approx(var).epsilon(1e-12));
    if (t < 10) var = s.alpha(t) * var + s.sigma(t) * s.sigma(t);
  }
}

TEST_CASE("safe_mul") {
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(safe_mul(0.0, inf) == 0.0);
  CHECK(safe_mul(inf, 0.0) == 0.0);
  CHECK(safe_mul(2.0, inf) == inf);
  CHECK(safe_mul(2.0, 3.0) == 6.0);
}
