#include <doctest.h>

#include <cmath>
#include <vector>

#include "pift/constants.hpp"
#include "pift/errors.hpp"
#include "pift/rng.hpp"
#include "pift/sampler.hpp"

using namespace pift;

namespace {
Mat eye(int d) { return Mat::Identity(d, d); }

ProblemSpec huber_problem(const Schedule& s, double gain = 1.0) {
  return ProblemSpec(s, PretrainedScore::gaussian(s, Vec::Zero(1), eye(1)),
                     RewardModel::pseudo_huber(Vec::Constant(1, 1.0), 1.0, gain));
}
}  // namespace

TEST_CASE("expected noise norm") {
  CHECK(expected_noise_norm(1) == doctest::Approx(0.797885).epsilon(1e-6));
  CHECK(expected_noise_norm(2) == doctest::Approx(1.253314).epsilon(1e-6));
  const NoiseStream ns(99);
  for (int d : {1, 3}) {
    std::vector<double> x(1000000);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = ns.normals(i, 0, d).norm();
    const Estimate e = mean_and_se(x);
    CHECK(std::abs(e.mean - expected_noise_norm(d)) <= 3 * e.std_error);
  }
}

TEST_CASE("optimal ledger single step") {
  const Schedule s({0.99}, {std::sqrt(1.0 / 0.99 - 1.0)});
  const ProblemSpec p = huber_problem(s, 2.0);
  const std::vector<double> lam{0.5};
  const LipschitzLedger L = optimal_ledger(p, lam);
  CHECK(L.L0Vstar[1] == 2.0);
  CHECK(L.L1Vstar[1] == 2.0);
  CHECK(L.L0Vstar[0] == doctest::Approx(2.030175).epsilon(1e-6));
  CHECK(L.L0Vstar[0] == doctest::Approx(1.01 * 2.0 / std::sqrt(0.99)).epsilon(1e-14));

  // Second, independent spelling of the control-curvature formula.
  const double sig = s.sigma(0);
  const double want = 2.0 * expected_noise_norm(1) * 0.5 * std::pow(1.0 + 0.01 * L.L0ustar[0], 2) /
                      (0.01 * std::sqrt(0.99) * sig);
  CHECK(L.L1ustar[0] == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("lambda near one leaves the pretrained Lipschitz constant") {
  const Schedule s = make_ddpm_schedule(4, 0.9, 0.99);
  const ProblemSpec p = huber_problem(s);
  const std::vector<double> lam{1.0 - 1e-12};
  const LipschitzLedger L = optimal_ledger(p, lam);
  for (int t = 0; t < 4; ++t) CHECK(L.L0ustar[t] == doctest::Approx(p.score().L0s(t)).epsilon(1e-6));
}

TEST_CASE("bar ledger invariants") {
  const Schedule s = make_ddpm_schedule(10, 0.95, 0.999);
  const ProblemSpec p = huber_problem(s);
  for (double lam : {0.5, 0.9}) {
    const std::vector<double> l{lam};
    const LipschitzLedger L = bar_ledger(p, l);
    CHECK(L.L0Vbar[10] == L.L0r);
    CHECK(L.L1Vbar[10] == L.L1r);
    CHECK(L.L0Vstar[10] == L.L0r);
    for (int t = 0; t <= 10; ++t) {
      CHECK(L.L0Vbar[t] >= L.L0Vstar[t]);
      CHECK(L.L1Vbar[t] >= L.L1Vstar[t]);
      CHECK(L.L0Vstar[t] >= 0.0);
    }
    if (lam == 0.9)
      for (int t = 0; t < 10; ++t) CHECK(L.L1Vbar_argmax[t] <= 5);
  }
  const std::vector<double> bad{1.0};
  CHECK_THROWS_AS(bar_ledger(p, bad), ValidationError);
}

TEST_CASE("select_beta") {
  // sigma^2 = 0.01 and a reward with L1r = 2 at the last step.
  const Schedule s({0.9}, {0.1});
  const ProblemSpec p(s, PretrainedScore::gaussian(s, Vec::Zero(1), eye(1)),
                      RewardModel::pseudo_huber(Vec::Zero(1), 0.5, 1.0));
  const std::vector<double> lam{0.5};
  LipschitzLedger L = bar_ledger(p, lam);
  REQUIRE(L.L1Vbar[1] == 2.0);
  const auto beta = select_beta(L, p, lam);
  CHECK(beta[0] == doctest::Approx(0.04).epsilon(1e-14));
  CHECK(L.beta == beta);
  CHECK(select_beta(L, p, lam, 2.0)[0] == doctest::Approx(0.08));
  const std::vector<double> tiny{1e-9};
  CHECK(select_beta(L, p, tiny)[0] == doctest::Approx(0.02).epsilon(1e-8));
  CHECK_THROWS_AS(select_beta(L, p, lam, 0.5), ValidationError);
}

TEST_CASE("select_beta refuses unbounded constants") {
  const Schedule s = make_ddpm_schedule(3, 0.9, 0.99);
  const ProblemSpec p(s, PretrainedScore::gaussian(s, Vec::Zero(1), eye(1)),
                      RewardModel::quadratic(0.5 * eye(1), Vec::Ones(1), 0.0));
  const std::vector<double> lam{0.5};
  LipschitzLedger L = bar_ledger(p, lam);
  CHECK(L.l0r_source == "unbounded");
  CHECK_THROWS_AS(select_beta(L, p, lam), UnboundedConstantError);
  const ProblemSpec q = p.with_l0r_domain(7.0);
  LipschitzLedger M = bar_ledger(q, lam);
  CHECK(M.l0r_source == "domain");
  CHECK(M.L0r == 7.0);
  CHECK_NOTHROW(select_beta(M, q, lam));
}

TEST_CASE("error bounds") {
  const std::vector<double> lam{0.5};
  SUBCASE("single step") {
    const Schedule s({0.95}, {std::sqrt(1 / 0.95 - 1)});
    const ProblemSpec p0 = huber_problem(s);
    LipschitzLedger L = bar_ledger(p0, lam);
    const ProblemSpec p = p0.with_beta(select_beta(L, p0, lam));
    const std::vector<int> m{3};
    const ErrorBounds b = error_bounds(L, p, m);
    CHECK(b.E[0] == doctest::Approx(L.C2[0] * std::pow(0.5, 4)).epsilon(1e-14));
    CHECK(b.E[1] == 0.0);
  }
  SUBCASE("geometric scaling") {
    const Schedule s = make_ddpm_schedule(6, 0.95, 0.999);
    const ProblemSpec p0 = huber_problem(s);
    LipschitzLedger L = bar_ledger(p0, lam);
    const ProblemSpec p = p0.with_beta(select_beta(L, p0, lam));
    const std::vector<int> m{2, 3, 4, 5, 6, 7}, m2{4, 6, 8, 10, 12, 14};
    const auto e1 = error_bounds(L, p, m).E, e2 = error_bounds(L, p, m2).E;
    // Last step: E[5] is a single summand, so doubling m divides it by 2^m.
    CHECK(e2[5] == doctest::Approx(e1[5] / std::pow(2.0, 7)).epsilon(1e-12));
    const auto r1 = error_recursion(L, m);
    for (int t = 0; t <= 6; ++t) CHECK(r1[t] == doctest::Approx(e1[t]).epsilon(1e-12));
    const std::vector<int> big(6, 2000);
    const ErrorBounds z = error_bounds(L, p, big);
    for (double x : z.E) CHECK(x == 0.0);
    for (double x : z.control_bound) CHECK(x == 0.0);
  }
}
