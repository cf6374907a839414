#include <doctest.h>

#include <cmath>

#include "pift/checks.hpp"
#include "pift/errors.hpp"
#include "pift/lqg.hpp"
#include "pift/parallel.hpp"
#include "pift/rng.hpp"
#include "pift/sampler.hpp"

using namespace pift;

namespace {
Vec v1(double x) { return Vec::Constant(1, x); }
Mat eye(int d) { return Mat::Identity(d, d); }
}  // namespace

TEST_CASE("philox known-answer vectors") {
  using C = Philox4x32Counter;
  CHECK(philox4x32(C{0, 0, 0, 0}, {0, 0}) == C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32(C{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32(C{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("noise stream") {
  const NoiseStream ns(42);
  CHECK(ns.normal(7, 3, 1) == ns.normal(7, 3, 1));
  CHECK(ns.normal(7, 3, 1) != ns.normal(7, 3, 0));
  CHECK(ns.normal(7, 3, 1) != NoiseStream(43).normal(7, 3, 1));
  std::vector<double> x(200000);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = ns.normal(i, 1, 0);
  const Estimate m = mean_and_se(x);
  CHECK(std::abs(m.mean) < 4 * m.std_error);
  for (auto& v : x) v = v * v - 1.0;
  const Estimate q = mean_and_se(x);
  CHECK(std::abs(q.mean) < 4 * q.std_error);
  for (std::uint32_t k = 0; k < 1000; ++k) {
    const double u = ns.uniform(k, 0, k);
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("pretrained sampler reproduces the closed-form terminal marginal") {
  const Schedule s = make_ddpm_schedule(10, 0.95, 0.999);
  Mat C(2, 2);
  C << 1.0, 0.3, 0.3, 0.5;
  const Vec mu = (Vec(2) << 1.0, -0.5).finished();
  const ProblemSpec p(s, PretrainedScore::gaussian(s, mu, C), RewardModel::pseudo_huber(Vec::Zero(2), 1.0, 1.0),
                      {1.0});
  const auto marg = affine_reference_marginals(p);
  const long n = 100000;
  const Simulation sim = simulate(p, pretrained_policy(p), n, 17);
  for (int i = 0; i < 2; ++i) {
    std::vector<double> x(n), x2(n);
    for (long k = 0; k < n; ++k) {
      x[k] = sim.paths[k].states[10](i);
      x2[k] = std::pow(x[k] - marg[10].mean(i), 2);
    }
    const Estimate m = mean_and_se(x), v = mean_and_se(x2);
    CHECK(std::abs(m.mean - marg[10].mean(i)) <= 4 * m.std_error);
    CHECK(std::abs(v.mean - marg[10].cov(i, i)) <= 4 * v.std_error);
  }
  const ObjectiveEstimate e = estimate_objective(sim, p);
  CHECK(e.kl_sum.mean == 0.0);
  CHECK(path_kl(sim, p).mean == 0.0);
}

TEST_CASE("simulation is independent of the thread count") {
  const Schedule s = make_ddpm_schedule(6, 0.9, 0.99);
  const ProblemSpec p(s, PretrainedScore::mixture(s, {0.5, 0.5}, {v1(-1), v1(1)}, {eye(1), eye(1)}),
                      RewardModel::pseudo_huber(v1(0.0), 1.0, 1.0), {1.0});
  set_thread_count(1);
  const Simulation a = simulate(p, pretrained_policy(p), 5000, 9);
  set_thread_count(5);
  const Simulation b = simulate(p, pretrained_policy(p), 5000, 9);
  set_thread_count(0);
  bool same = true;
  for (long i = 0; i < 5000; ++i)
    for (int t = 0; t <= 6; ++t) same = same && (a.paths[i].states[t].array() == b.paths[i].states[t].array()).all();
  CHECK(same);
  CHECK(estimate_objective(a, p).reward.mean == estimate_objective(b, p).reward.mean);
}

TEST_CASE("constant offset control has a closed-form path KL") {
  const Schedule s = make_ddpm_schedule(10, 0.95, 0.999);
  const ProblemSpec p(s, PretrainedScore::gaussian(s, Vec::Zero(1), eye(1)),
                      RewardModel::pseudo_huber(v1(1.0), 1.0, 1.0), {1.0});
  double closed = 0;
  for (int t = 0; t < 10; ++t) {
    const double a = s.alpha(t), sg = s.sigma(t);
    closed += (1 - a) * (1 - a) * 0.25 / (2 * a * sg * sg);
  }
  const Estimate full = path_kl(simulate(p, offset_policy(p, v1(0.5)), 20000, 4), p);
  const Estimate half = path_kl(simulate(p, offset_policy(p, v1(0.25)), 20000, 4), p);
  CHECK(full.mean == doctest::Approx(closed).epsilon(1e-12));
  CHECK(half.mean == doctest::Approx(closed / 4).epsilon(1e-12));
  const Estimate lr = path_log_ratio(simulate(p, offset_policy(p, v1(0.5)), 100000, 4), p);
  CHECK(std::abs(lr.mean - closed) <= 3 * lr.std_error);
}

TEST_CASE("path KL chain rule and oracle optimality on the LQG instance") {
  const Schedule s = make_ddpm_schedule(10, 0.95, 0.999);
  ProblemSpec p(s, PretrainedScore::gaussian(s, Vec::Zero(1), eye(1)),
                RewardModel::quadratic(0.5 * eye(1), Vec::Ones(1), 0.0));
  p = p.with_beta({0.5});
  const LqgSolution o = solve_lqg(p);
  for (const auto& c : check_path_kl(p, oracle_policy(o), 100000, 21)) CHECK_MESSAGE(c.passed, c.name);
  for (const auto& c : check_oracle_optimality(p, o, 100000, 22)) CHECK_MESSAGE(c.passed, c.name);
}

TEST_CASE("one-step KL closed form against Monte Carlo") {
  for (const auto& c : check_kl_closed_form(20, 100000, 5)) CHECK_MESSAGE(c.passed, c.name);
}

TEST_CASE("sampler validation") {
  const Schedule s = make_ddpm_schedule(2, 0.9, 0.99);
  const ProblemSpec p(s, PretrainedScore::gaussian(s, Vec::Zero(1), eye(1)),
                      RewardModel::pseudo_huber(v1(1.0), 1.0, 1.0), {1.0});
  CHECK_THROWS_AS(simulate(p, pretrained_policy(p), 0, 1), ValidationError);
  const Policy bad{"bad", [](int, const Vec&, bool&) { return v1(std::nan("")); }};
  CHECK_THROWS_AS(simulate(p, bad, 10, 1), NumericAbort);
}
