#include <doctest.h>

#include <cmath>
#include <random>

#include "pift/errors.hpp"
#include "pift/lqg.hpp"
#include "pift/parametric.hpp"
#include "pift/sampler.hpp"

using namespace pift;

namespace {
Vec v1(double x) { return Vec::Constant(1, x); }
Mat eye(int d) { return Mat::Identity(d, d); }

ProblemSpec pg_problem(double A = 0.5) {
  const Schedule s(std::vector<double>(5, 0.9), std::vector<double>(5, std::sqrt(1 / 0.9 - 1)));
  return ProblemSpec(s, PretrainedScore::gaussian(s, Vec::Zero(1), eye(1)),
                     RewardModel::quadratic(A * eye(1), v1(1.0), 0.0), {1.0});
}

std::vector<Mat> random_direction(const ProblemSpec& p, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N;
  std::vector<Mat> d(p.steps(), Mat(p.dim(), cols));
  double n2 = 0;
  for (auto& m : d)
    for (int i = 0; i < m.size(); ++i) m.data()[i] = N(rng), n2 += m.data()[i] * m.data()[i];
  for (auto& m : d) m /= std::sqrt(n2);
  return d;
}

double inner(const std::vector<Mat>& a, const std::vector<Mat>& b) {
  double s = 0;
  for (std::size_t t = 0; t < a.size(); ++t) s += (a[t].array() * b[t].array()).sum();
  return s;
}
}  // namespace

TEST_CASE("pretrained parameters give zero KL") {
  const ProblemSpec p = pg_problem();
  const FeatureMap f = FeatureMap::affine(1);
  const Estimate j = policy_objective(pretrained_params(p), p, f, NoisePlan::monte_carlo(20000, 3));
  const Simulation sim = simulate(p, pretrained_policy(p), 20000, 3);
  CHECK(j.mean == doctest::Approx(estimate_objective(sim, p).reward.mean).epsilon(1e-12));
}

TEST_CASE("oracle parameters are optimal and stationary") {
  const ProblemSpec p = pg_problem();
  const FeatureMap f = FeatureMap::affine(1);
  const PolicyParams star = oracle_params(solve_lqg(p));
  const double j0 = policy_objective(star, p, f, NoisePlan::exact()).mean;
  for (std::uint64_t k = 0; k < 10; ++k) {
    PolicyParams q = star;
    q.axpy(0.1, random_direction(p, 2, k));
    CHECK(policy_objective(q, p, f, NoisePlan::exact()).mean < j0);
  }
  CHECK(policy_gradient(star, p, f, NoisePlan::exact()).norm() <= 1e-8);
  const PolicyGradient mc = policy_gradient(star, p, f, NoisePlan::monte_carlo(20000, 8));
  CHECK(mc.norm() <= 3 * mc.std_error_norm());
}

TEST_CASE("zero reward at the pretrained score has zero gradient") {
  const ProblemSpec p = pg_problem(0.0);
  const ProblemSpec z(p.schedule(), p.score(), RewardModel::quadratic(Mat::Zero(1, 1), Vec::Zero(1), 0.0), {1.0});
  const FeatureMap f = FeatureMap::affine(1);
  CHECK(policy_gradient(pretrained_params(z), z, f, NoisePlan::exact()).norm() <= 1e-12);
}

TEST_CASE("gradient matches directional finite differences") {
  const ProblemSpec p = pg_problem();
  const FeatureMap f = FeatureMap::affine(1);
  PolicyParams K = pretrained_params(p);
  K.axpy(0.3, random_direction(p, 2, 99));
  const auto dir = random_direction(p, 2, 100);
  for (const NoisePlan plan : {NoisePlan::exact(), NoisePlan::monte_carlo(4000, 12)}) {
    const double h = 1e-4;
    PolicyParams a = K, b = K;
    a.axpy(h, dir);
    b.axpy(-h, dir);
    const double fd = (policy_objective(a, p, f, plan).mean - policy_objective(b, p, f, plan).mean) / (2 * h);
    const double an = inner(policy_gradient(K, p, f, plan).grad, dir);
    CHECK(std::abs(fd - an) <= 1e-4 * std::abs(an));
  }
  // MC gradient is unbiased for the exact one
  const PolicyGradient ex = policy_gradient(K, p, f, NoisePlan::exact());
  const PolicyGradient mc = policy_gradient(K, p, f, NoisePlan::monte_carlo(50000, 13));
  for (int t = 0; t < 5; ++t)
    for (int c = 0; c < 2; ++c) CHECK(std::abs(mc.grad[t](0, c) - ex.grad[t](0, c)) <= 4 * mc.std_error[t](0, c));
}

TEST_CASE("monte carlo error scales with the path count") {
  const ProblemSpec p = pg_problem();
  const FeatureMap f = FeatureMap::affine(1);
  const double s1 = policy_objective(zero_params(p, f), p, f, NoisePlan::monte_carlo(20000, 1)).std_error;
  const double s2 = policy_objective(zero_params(p, f), p, f, NoisePlan::monte_carlo(40000, 1)).std_error;
  CHECK(s1 * s1 / (s2 * s2) == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("gradient ascent") {
  const ProblemSpec p = pg_problem();
  const FeatureMap f = FeatureMap::affine(1);
  const PolicyParams star = oracle_params(solve_lqg(p));
  const PolicyParams K0 = pretrained_params(p);
  const PgResult still = pg_ascent(K0, p, f, 0.0, 5, NoisePlan::exact(), star);
  CHECK(distance(still.K_final, K0) == 0.0);
  CHECK(still.trace.size() == 6);
  const PgResult r = pg_ascent(K0, p, f, 1.0, 200, NoisePlan::exact(), star);
  CHECK(distance(r.K_final, star) <= 1e-3);
  for (std::size_t m = 1; m < r.trace.size(); ++m) CHECK(r.trace[m].objective >= r.trace[m - 1].objective - 1e-12);
  CHECK_THROWS_AS(pg_ascent(K0, p, f, 1e7, 50, NoisePlan::exact(), star), NumericAbort);
  CHECK_THROWS_AS(pg_ascent(K0, p, f, -1.0, 5, NoisePlan::exact()), ValidationError);
}

TEST_CASE("affine features on a mixture score still optimize") {
  const Schedule s(std::vector<double>(4, 0.9), std::vector<double>(4, std::sqrt(1 / 0.9 - 1)));
  const ProblemSpec p(s, PretrainedScore::mixture(s, {0.5, 0.5}, {v1(-1.5), v1(1.5)}, {0.5 * eye(1), 0.5 * eye(1)}),
                      RewardModel::pseudo_huber(v1(1.0), 1.0, 1.0), {1.0});
  const FeatureMap f = FeatureMap::affine(1);
  const NoisePlan plan = NoisePlan::monte_carlo(5000, 2);
  const PgResult r = pg_ascent(zero_params(p, f), p, f, 0.5, 30, plan);
  CHECK(r.trace.back().objective > r.trace.front().objective);
  CHECK(std::isnan(r.trace.back().distance));
}
