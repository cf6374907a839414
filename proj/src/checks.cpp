#include "pift/checks.hpp"

#include <array>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "pift/quadrature.hpp"
#include "pift/rng.hpp"
#include "pift/sampler.hpp"

namespace pift {

namespace {

std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(4) << x;
  return os.str();
}

std::string tagged(const std::string& base, int t) { return base + "[t=" + std::to_string(t) + "]"; }

CheckResult at_least(std::string name, double measured, double threshold, std::string detail = {}) {
  CheckResult r{std::move(name), measured >= threshold, measured, threshold, std::move(detail)};
  return r;
}

double sup_central_diff(const ControlField& a, const ControlField& b) {
  const GridSpec& g = a.grid();
  double m = 0.0;
  for (long i = 0; i < g.size(); ++i)
    if (g.central(i)) m = std::max(m, (a.at_node(i) - b.at_node(i)).norm());
  return m;
}

double sup_central_norm(const ControlField& a) {
  const GridSpec& g = a.grid();
  double m = 0.0;
  for (long i = 0; i < g.size(); ++i)
    if (g.central(i)) m = std::max(m, a.at_node(i).norm());
  return m;
}

}  // namespace

CheckResult at_most(std::string name, double measured, double threshold, std::string detail) {
  CheckResult r{std::move(name), measured <= threshold, measured, threshold, std::move(detail)};
  return r;
}

bool all_passed(const std::vector<CheckResult>& checks) {
  for (const auto& c : checks)
    if (!c.passed) return false;
  return !checks.empty();
}

void write_checks_csv(std::ostream& os, const std::vector<CheckResult>& checks) {
  os << "name,passed,measured,threshold,detail\n" << std::setprecision(17);
  for (const auto& c : checks) {
    std::string d = c.detail;
    for (auto& ch : d)
      if (ch == ',' || ch == '\n') ch = ';';
    os << c.name << ',' << (c.passed ? "pass" : "fail") << ',' << c.measured << ',' << c.threshold << ',' << d
       << '\n';
  }
}

OracleErrors oracle_errors(const PiftSolution& sol, const LqgSolution& oracle) {
  const int T = static_cast<int>(sol.controls.size());
  OracleErrors e;
  e.control.assign(T, 0.0);
  e.value.assign(T + 1, 0.0);
  for (int t = 0; t <= T; ++t) {
    const GridSpec& g = sol.values[t].grid();
    for (long i = 0; i < g.size(); ++i) {
      if (!g.central(i)) continue;
      const Vec y = g.node(i);
      const double vs = oracle_value(oracle, t, y);
      e.value[t] = std::max(e.value[t], std::abs(sol.values[t].values()[i] - vs) / (1.0 + std::abs(vs)));
      if (t < T) e.control[t] = std::max(e.control[t], (sol.controls[t].at_node(i) - oracle_control(oracle, t, y)).norm());
    }
  }
  return e;
}

std::vector<CheckResult> check_oracle_equivalence(const PiftSolution& sol, const LqgSolution& oracle, double tol) {
  const OracleErrors e = oracle_errors(sol, oracle);
  double cu = 0.0, cv = 0.0;
  int tu = 0, tv = 0;
  for (std::size_t t = 0; t < e.control.size(); ++t)
    if (e.control[t] >= cu) cu = e.control[t], tu = static_cast<int>(t);
  for (std::size_t t = 0; t < e.value.size(); ++t)
    if (e.value[t] >= cv) cv = e.value[t], tv = static_cast<int>(t);
  return {at_most("oracle_control_sup_error", cu, tol, "worst at t=" + std::to_string(tu)),
          at_most("oracle_value_rel_error", cv, tol, "worst at t=" + std::to_string(tv))};
}

std::vector<CheckResult> check_contraction(const ProblemSpec& spec, const LipschitzLedger& ledger,
                                           const PiftSolution& sol, bool with_optimal_rate) {
  const int T = spec.steps();
  const auto& sc = spec.schedule();
  const std::vector<double> ratio = contraction_estimate(sol.diagnostics, T);
  std::vector<CheckResult> out;
  for (int t = 0; t < T; ++t) {
    const double lam = ledger.lambda[t];
    out.push_back(at_most(tagged("contraction_vs_lambda", t), ratio[t], 1.0 - lam + 0.02));
    if (with_optimal_rate) {
      const double rate = sc.sigma(t) * sc.sigma(t) * ledger.L1Vstar[t + 1] / spec.beta(t);
      out.push_back(at_most(tagged("contraction_vs_curvature", t), ratio[t], rate + 0.02,
                            "sigma^2 L1V*/beta = " + fmt(rate)));
    }
  }
  if (sol.control_iterates.empty()) return out;
  for (int t = 0; t < T; ++t) {
    const auto& it = sol.control_iterates[t];
    const int M = static_cast<int>(it.size()) - 1;
    const double floor = ratio_floor(sup_central_norm(it[M]));
    std::vector<double> err(M);
    for (int m = 0; m < M; ++m) err[m] = sup_central_diff(it[m], it[M]);
    const int hi = std::min(40, M - 1);
    std::vector<double> xs, ys;
    for (int m = 5; m <= hi; ++m)
      if (err[m] > floor) {
        xs.push_back(m);
        ys.push_back(std::log(err[m]));
      }
    double slope;
    std::string how;
    if (xs.size() >= 2) {
      double mx = 0, my = 0;
      for (std::size_t i = 0; i < xs.size(); ++i) mx += xs[i], my += ys[i];
      mx /= xs.size();
      my /= ys.size();
      double sxy = 0, sxx = 0;
      for (std::size_t i = 0; i < xs.size(); ++i) sxy += (xs[i] - mx) * (ys[i] - my), sxx += (xs[i] - mx) * (xs[i] - mx);
      slope = sxy / sxx;
      how = "least squares over " + std::to_string(xs.size()) + " points in [5," + std::to_string(hi) + "]";
    } else if (err[0] <= floor) {
      slope = -std::numeric_limits<double>::infinity();
      how = "initial error already at roundoff";
    } else {
      // Error reaches roundoff before m = 5; the secant to the first sub-floor iterate bounds the slope.
      int m1 = 1;
      while (m1 < M && err[m1] > floor) ++m1;
      const double e1 = std::max(err[m1 < M ? m1 : M - 1], floor);
      slope = (std::log(e1) - std::log(err[0])) / m1;
      how = "roundoff reached at m=" + std::to_string(m1) + "; secant bound";
    }
    out.push_back(at_most(tagged("log_error_slope", t), slope, std::log(1.0 - ledger.lambda[t]) + 0.1, how));
  }
  return out;
}

std::vector<CheckResult> check_bound_dominance(const ProblemSpec& spec, const LipschitzLedger& ledger,
                                               const PiftSolution& sol, const LqgSolution& oracle, int m) {
  const int T = spec.steps();
  const std::vector<int> ms(T, m);
  const ErrorBounds b = error_bounds(ledger, spec, ms);
  const OracleErrors e = oracle_errors(sol, oracle);
  std::vector<CheckResult> out;
  for (int t = 0; t < T; ++t)
    out.push_back(at_most("bound_dominance[m=" + std::to_string(m) + ",t=" + std::to_string(t) + "]",
                          e.control[t], b.control_bound[t]));
  return out;
}

std::vector<CheckResult> check_regularity(const ProblemSpec& spec, const LipschitzLedger& ledger,
                                          const PiftSolution& sol, double slack) {
  if (sol.control_iterates.empty()) throw ValidationError("regularity check needs diagnostic mode");
  const int T = spec.steps();
  double w[4] = {0, 0, 0, 0};
  std::string where[4];
  auto track = [&](int k, double hat, double bound, int t, int m) {
    const double r = bound == 0.0 ? (hat == 0.0 ? 0.0 : std::numeric_limits<double>::infinity()) : hat / bound;
    if (r >= w[k]) {
      w[k] = r;
      where[k] = "worst at t=" + std::to_string(t) + " m=" + std::to_string(m) + ": " + fmt(hat) + " vs " + fmt(bound);
    }
  };
  for (int t = 0; t < T; ++t) {
    for (std::size_t m = 0; m < sol.control_iterates[t].size(); ++m) {
      const LipschitzEstimate pu = lipschitz_probe(sol.control_iterates[t][m]);
      track(0, pu.L0_hat, ledger.L0ustar[t], t, static_cast<int>(m));
      track(1, pu.L1_hat, ledger.L1ustar[t], t, static_cast<int>(m));
      const LipschitzEstimate pv = lipschitz_probe(sol.value_iterates[t][m]);
      const ValueEnvelope env = iterate_value_envelope(ledger, spec, t, static_cast<int>(m));
      track(2, pv.L0_hat, env.L0, t, static_cast<int>(m));
      track(3, pv.L1_hat, env.L1, t, static_cast<int>(m));
    }
  }
  return {at_most("regularity_u_L0 (hat/L0u*)", w[0], slack, where[0]),
          at_most("regularity_u_L1 (hat/L1u*)", w[1], slack, where[1]),
          at_most("regularity_V_L0 (hat/envelope)", w[2], slack, where[2]),
          at_most("regularity_V_L1 (hat/envelope)", w[3], slack, where[3])};
}

std::vector<CheckResult> check_stein(int pairs, int order, std::uint64_t seed) {
  const NoiseStream ns(seed);
  double worst = 0.0;
  std::string where;
  for (int i = 0; i < pairs; ++i) {
    const int d = 1 + i % 2;
    auto u = [&](std::uint32_t k) { return ns.uniform(static_cast<std::uint64_t>(i), 0, k); };
    const int degree = 2 + static_cast<int>(u(0) * 5.0);  // 2..6
    const double sigma = 0.2 + 1.3 * u(1);
    Vec z(d);
    for (int k = 0; k < d; ++k) z(k) = -1.5 + 3.0 * u(2 + k);
    std::function<Vec(const Vec&)> grad;
    if (d == 1) {
      std::vector<double> c(degree + 1);
      for (int k = 0; k <= degree; ++k) c[k] = -1.0 + 2.0 * u(10 + k);
      grad = [c, degree](const Vec& y) {
        Vec g(1);
        g(0) = 0.0;
        for (int k = 1; k <= degree; ++k) g(0) += k * c[k] * std::pow(y(0), k - 1);
        return g;
      };
    } else {
      std::vector<std::array<double, 3>> terms;  // coefficient, power x, power y
      std::uint32_t idx = 10;
      for (int a = 0; a <= degree; ++a)
        for (int b = 0; a + b <= degree; ++b) terms.push_back({-1.0 + 2.0 * u(idx++), double(a), double(b)});
      grad = [terms](const Vec& y) {
        Vec g = Vec::Zero(2);
        for (const auto& [c, a, b] : terms) {
          if (a > 0) g(0) += c * a * std::pow(y(0), a - 1) * std::pow(y(1), b);
          if (b > 0) g(1) += c * b * std::pow(y(0), a) * std::pow(y(1), b - 1);
        }
        return g;
      };
    }
    const SteinResult r = stein_check(grad, z, sigma, order);
    if (r.abs_diff >= worst) {
      worst = r.abs_diff;
      where = "worst pair " + std::to_string(i) + " (d=" + std::to_string(d) + ", degree " + std::to_string(degree) + ")";
    }
  }
  return {at_most("stein_identity_abs_diff", worst, 1e-6, where)};
}

std::vector<CheckResult> check_kl_closed_form(int triples, long samples, std::uint64_t seed) {
  const NoiseStream ns(seed);
  double worst = 0.0;
  std::string where;
  for (int i = 0; i < triples; ++i) {
    auto u = [&](std::uint32_t k) { return ns.uniform(1000000ULL + static_cast<std::uint64_t>(i), 0, k); };
    const int d = 1 + i % 3;
    const double alpha = 0.5 + 0.499 * u(0);
    const double sigma = std::sqrt(1.0 / alpha - 1.0) * (0.5 + 1.5 * u(1));
    Vec delta(d);
    for (int k = 0; k < d; ++k) delta(k) = -2.0 + 4.0 * u(2 + k);
    const Schedule sc({alpha}, {sigma});
    const double kl = kl_onestep(sc, 0, delta, Vec::Zero(d));
    const Vec dmu = (1.0 - alpha) / std::sqrt(alpha) * delta;
    std::vector<double> lr(samples);
    for (long j = 0; j < samples; ++j) {
      // x ~ N(mu1, sigma^2 I); log p1(x) - log p2(x) with mu1 - mu2 = dmu.
      const Vec w = ns.normals(static_cast<std::uint64_t>(j), static_cast<std::uint32_t>(i + 1), d);
      const Vec x1 = sigma * w;
      lr[j] = ((x1 + dmu).squaredNorm() - x1.squaredNorm()) / (2.0 * sigma * sigma);
    }
    const Estimate e = mean_and_se(lr);
    const double z = std::abs(e.mean - kl) / e.std_error;
    if (z >= worst) {
      worst = z;
      where = "worst triple " + std::to_string(i) + ": MC " + fmt(e.mean) + " vs " + fmt(kl);
    }
  }
  return {at_most("kl_onestep_mc_zscore", worst, 3.0, where)};
}

std::vector<CheckResult> check_path_kl(const ProblemSpec& spec, const Policy& policy, long n_paths,
                                       std::uint64_t seed) {
  const Simulation sim = simulate(spec, policy, n_paths, seed);
  const Estimate a = path_kl(sim, spec);
  const Estimate b = path_log_ratio(sim, spec);
  const double se = std::sqrt(a.std_error * a.std_error + b.std_error * b.std_error);
  std::vector<CheckResult> out;
  out.push_back(at_most("path_kl_chain_rule_zscore", std::abs(a.mean - b.mean) / se, 3.0,
                        "sum-of-KL " + fmt(a.mean) + " vs log-ratio " + fmt(b.mean)));

  Vec delta = Vec::Constant(spec.dim(), 0.3);
  const Simulation off = simulate(spec, offset_policy(spec, delta), std::min<long>(n_paths, 10000), seed + 1);
  const Estimate o = path_kl(off, spec);
  double closed = 0.0;
  for (int t = 0; t < spec.steps(); ++t) closed += kl_onestep(spec.schedule(), t, delta, Vec::Zero(spec.dim()));
  out.push_back(at_most("path_kl_offset_closed_form_rel", std::abs(o.mean - closed) / closed, 1e-12));
  return out;
}

std::vector<CheckResult> check_product_formula(const ProblemSpec& spec, const LqgSolution& oracle, int points,
                                               int order, std::uint64_t seed) {
  const auto& sc = spec.schedule();
  const int T = spec.steps();
  const int d = spec.dim();
  const TensorRule rule = tensor_rule(GaussHermite(order), d);
  const auto marg = affine_reference_marginals(spec);
  const NoiseStream ns(seed);
  double worst = 0.0;
  std::string where;
  for (int t = 0; t < T; ++t) {
    const Mat F = (Mat::Identity(d, d) + (1.0 - sc.alpha(t)) * spec.score().affine_matrix(t)) / std::sqrt(sc.alpha(t));
    const Vec sd = marg[t].cov.diagonal().cwiseSqrt();
    for (int i = 0; i < points; ++i) {
      Vec y(d);
      for (int k = 0; k < d; ++k)
        y(k) = marg[t].mean(k) + sd(k) * (-3.0 + 6.0 * ns.uniform(static_cast<std::uint64_t>(i), t, k));
      const Vec mean = step_mean(sc, t, y, oracle_control(oracle, t, y));
      const Vec eg = gauss_expectation(rule, [&](const Vec& x) { return oracle_value_grad(oracle, t + 1, x); }, mean,
                                       sc.sigma(t));
      const Vec rhs = F.transpose() * eg;
      const double diff = (oracle_value_grad(oracle, t, y) - rhs).cwiseAbs().maxCoeff();
      if (diff >= worst) {
        worst = diff;
        where = "worst at t=" + std::to_string(t) + " point " + std::to_string(i);
      }
    }
  }
  return {at_most("gradient_product_formula_abs_diff", worst, 1e-8, where)};
}

std::vector<CheckResult> check_ledger_invariants(const ProblemSpec& spec, const LipschitzLedger& L) {
  std::vector<CheckResult> out;
  const int T = L.T;
  const auto& sc = spec.schedule();
  auto same = [](double a, double b) { return (std::isinf(a) && std::isinf(b)) || a == b; };
  const bool anchors = same(L.L0Vstar[T], L.L0r) && same(L.L1Vstar[T], L.L1r) && same(L.L0Vbar[T], L.L0r) &&
                       same(L.L1Vbar[T], L.L1r);
  out.push_back({"ledger_terminal_anchors", anchors, anchors ? 0.0 : 1.0, 0.0, "L0r source: " + L.l0r_source});
  double worst_order = 0.0;
  bool nonneg = true;
  for (int t = 0; t <= T; ++t) {
    for (double v : {L.L0Vstar[t], L.L1Vstar[t], L.L0Vbar[t], L.L1Vbar[t]}) nonneg = nonneg && v >= 0.0;
    if (std::isfinite(L.L0Vbar[t])) worst_order = std::max(worst_order, L.L0Vstar[t] - L.L0Vbar[t]);
    if (std::isfinite(L.L1Vbar[t])) worst_order = std::max(worst_order, L.L1Vstar[t] - L.L1Vbar[t]);
  }
  out.push_back({"ledger_nonnegative", nonneg, nonneg ? 0.0 : 1.0, 0.0, ""});
  out.push_back(at_most("ledger_bar_dominates_star", worst_order, 0.0));
  double worst_cond = -std::numeric_limits<double>::infinity();
  double min_gamma = std::numeric_limits<double>::infinity();
  for (int t = 0; t < T; ++t) {
    const double s2 = sc.sigma(t) * sc.sigma(t);
    worst_cond = std::max(worst_cond, s2 * L.L1Vbar[t + 1] / spec.beta(t) - (1.0 - L.lambda[t]));
    min_gamma = std::min(min_gamma, concavity_gamma(L, spec, t));
  }
  out.push_back(at_most("beta_contraction_condition", worst_cond, 1e-12 * 1.0,
                        "max_t sigma^2 L1Vbar/beta - (1 - lambda)"));
  out.push_back(at_least("beta_strong_concavity_gamma", min_gamma, std::numeric_limits<double>::min()));
  bool finite = true;
  for (int t = 0; t < T; ++t) finite = finite && std::isfinite(L.C2[t]) && std::isfinite(L.L0Vstar[t + 1]);
  if (finite) {
    std::vector<int> ms(T, 5);
    const auto closed = error_bounds(L, spec, ms).E;
    const auto rec = error_recursion(L, ms);
    double rel = 0.0;
    for (int t = 0; t <= T; ++t)
      if (closed[t] != 0.0) rel = std::max(rel, std::abs(closed[t] - rec[t]) / std::abs(closed[t]));
    out.push_back(at_most("error_sum_vs_recursion_rel", rel, 1e-12));
  }
  return out;
}

std::vector<CheckResult> check_oracle_consistency(const ProblemSpec& spec, const LqgSolution& oracle,
                                                  const std::vector<GridSpec>& grids, int order) {
  const int T = spec.steps();
  const TensorRule rule = tensor_rule(GaussHermite(order), spec.dim());
  double coef = 0.0, field = 0.0;
  for (int t = 0; t < T; ++t) {
    coef = std::max(coef, oracle_fixed_point_residual(oracle, spec, t));
    const ControlField u = sample_control_field(grids[t], [&](const Vec& y) { return oracle_control(oracle, t, y); });
    const ValueField v = sample_value_field(grids[t + 1], [&](const Vec& y) { return oracle_value(oracle, t + 1, y); });
    field = std::max(field, fixed_point_residual(u, v, spec, t, rule));
  }
  return {at_most("oracle_fixed_point_coefficients", coef, 1e-10),
          at_most("oracle_fixed_point_on_grid", field, 1e-6)};
}

std::vector<CheckResult> check_oracle_optimality(const ProblemSpec& spec, const LqgSolution& oracle, long n_paths,
                                                 std::uint64_t seed) {
  const PathStatistics a = path_statistics(simulate(spec, oracle_policy(oracle), n_paths, seed), spec);
  const PathStatistics b = path_statistics(simulate(spec, pretrained_policy(spec), n_paths, seed), spec);
  std::vector<double> diff(a.objective.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = a.objective[i] - b.objective[i];
  const Estimate e = mean_and_se(diff);
  const double z = e.std_error > 0.0 ? e.mean / e.std_error : (e.mean > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
  return {at_least("oracle_beats_pretrained_zscore", z, 4.0, "paired objective gain " + fmt(e.mean))};
}

RateStudy pg_rate_study(const ProblemSpec& spec, const LqgSolution& oracle, double eta_lo, double eta_hi, int iters) {
  const FeatureMap f = FeatureMap::affine(spec.dim());
  const PolicyParams star = oracle_params(oracle);
  const PolicyParams K0 = pretrained_params(spec);
  RateStudy best;
  best.final_distance = std::numeric_limits<double>::infinity();
  for (double eta = eta_lo; eta <= eta_hi * (1.0 + 1e-12); eta *= 2.0) {
    PgResult r;
    try {
      r = pg_ascent(K0, spec, f, eta, iters, NoisePlan::exact(), star);
    } catch (const NumericAbort&) {
      continue;
    }
    const double fin = r.trace.back().distance;
    if (!std::isfinite(fin) || fin > r.trace.front().distance) continue;
    if (fin < best.final_distance) {
      best.eta = eta;
      best.trace = r.trace;
      best.final_distance = fin;
    }
  }
  if (best.trace.empty()) return best;
  std::vector<double> ratios;
  for (std::size_t m = 0; m + 1 < best.trace.size(); ++m) {
    const double a = best.trace[m].distance, b = best.trace[m + 1].distance;
    if (a > 1e-10 && b > 1e-10) ratios.push_back(b / a);
  }
  best.tail_ratios.assign(ratios.begin() + static_cast<long>(ratios.size() / 2), ratios.end());
  best.grad_norm_at_oracle = policy_gradient(star, spec, f, NoisePlan::exact()).norm();
  return best;
}

std::vector<CheckResult> check_parametric_rate(const RateStudy& s, double ratio_limit, double grad_tol) {
  double worst = s.tail_ratios.empty() ? std::numeric_limits<double>::quiet_NaN() : 0.0;
  for (double r : s.tail_ratios) worst = std::max(worst, r);
  return {at_most("pg_tail_distance_ratio", worst, ratio_limit,
                  "eta=" + fmt(s.eta) + ", " + std::to_string(s.tail_ratios.size()) + " tail ratios"),
          at_most("pg_gradient_norm_at_oracle", s.grad_norm_at_oracle, grad_tol),
          at_most("pg_limit_distance_to_oracle", s.final_distance, 1e-3)};
}

std::vector<SweepPoint> run_beta_sweep(const ProblemSpec& base, const std::vector<double>& betas,
                                       const PiftConfig& pift, long n_paths, std::uint64_t seed) {
  std::vector<SweepPoint> out;
  for (double beta : betas) {
    const ProblemSpec spec = base.with_beta({beta});
    PiftSolution sol = backward_pass(spec, pift);
    int mmax = 0;
    for (int m : sol.diagnostics.effective_m) mmax = std::max(mmax, m);
    const Simulation sim = simulate(spec, field_policy(std::move(sol.controls)), n_paths, seed);
    SweepPoint p{beta, estimate_objective(sim, spec), path_statistics(sim, spec), mmax};
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<CheckResult> check_beta_sweep(const std::vector<SweepPoint>& sweep, double margin_se) {
  std::vector<CheckResult> out;
  for (std::size_t k = 0; k + 1 < sweep.size(); ++k) {
    const auto& lo = sweep[k].paths;
    const auto& hi = sweep[k + 1].paths;
    std::vector<double> dr(lo.reward.size()), dk(lo.reward.size());
    for (std::size_t i = 0; i < dr.size(); ++i) {
      dr[i] = lo.reward[i] - hi.reward[i];
      dk[i] = lo.kl_sum[i] - hi.kl_sum[i];
    }
    const Estimate er = mean_and_se(dr), ek = mean_and_se(dk);
    const std::string pair = "beta " + fmt(sweep[k].beta) + " -> " + fmt(sweep[k + 1].beta);
    out.push_back(at_least("sweep_reward_drop_zscore[" + pair + "]", er.mean / er.std_error, margin_se,
                           "paired reward drop " + fmt(er.mean)));
    out.push_back(at_least("sweep_kl_drop_zscore[" + pair + "]", ek.mean / ek.std_error, margin_se,
                           "paired KL drop " + fmt(ek.mean)));
  }
  return out;
}

}  // namespace pift
