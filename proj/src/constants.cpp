#include "pift/constants.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

namespace pift {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// sup over m >= 1 of (a + (m+2) b) q^(m+1). Returns {value, argmax}.
std::pair<double, int> scan_max(double a, double b, double q, double lambda) {
  if (q == 0.0) return {0.0, 1};
  const int cap = 10 * static_cast<int>(std::ceil(1.0 / lambda)) + 100;
  double best = -1.0;
  int arg = 1;
  double prev = -1.0;
  double term = 0.0;
  for (int m = 1; m <= cap; ++m) {
    term = (a + (m + 2) * b) * std::pow(q, m + 1);
    if (term > best) {
      best = term;
      arg = m;
    }
    if (prev >= 0.0 && term < prev && term < 1e-3 * best) break;
    prev = term;
  }
  if (best > 0.0 && !(term < 1e-3 * best)) {
    std::ostringstream os;
    os << "bar-constant scan did not decay within cap " << cap << " (lambda = " << lambda << ")";
    throw std::logic_error(os.str());
  }
  return {std::max(best, 0.0), arg};
}

void fill_optimal(LipschitzLedger& L, const ProblemSpec& spec) {
  const auto& sc = spec.schedule();
  const auto& score = spec.score();
  const int T = L.T;
  L.L0Vstar.assign(T + 1, 0.0);
  L.L1Vstar.assign(T + 1, 0.0);
  L.L0ustar.assign(T, 0.0);
  L.L1ustar.assign(T, 0.0);
  L.L0Vstar[T] = L.L0r;
  L.L1Vstar[T] = L.L1r;
  const double EW = L.expected_noise_norm;
  for (int t = T - 1; t >= 0; --t) {
    const double a = sc.alpha(t), s = sc.sigma(t), lam = L.lambda[t];
    const double l0s = score.L0s(t), l1s = score.L1s(t);
    L.L0ustar[t] = (l0s + (1.0 - lam) / (1.0 - a)) / lam;
    const double gu = 1.0 + (1.0 - a) * L.L0ustar[t];
    L.L1ustar[t] = (l1s + EW * (1.0 - lam) * gu * gu / ((1.0 - a) * std::sqrt(a) * s)) / lam;
    const double gs = 1.0 + (1.0 - a) * l0s;
    L.L0Vstar[t] = safe_mul(gs / std::sqrt(a), L.L0Vstar[t + 1]);
    L.L1Vstar[t] = safe_mul(gs * gu / a, L.L1Vstar[t + 1]) +
                   safe_mul((1.0 - a) / std::sqrt(a) * l1s, L.L0Vstar[t + 1]);
  }
}

LipschitzLedger base_ledger(const ProblemSpec& spec, std::span<const double> lambda) {
  LipschitzLedger L;
  L.T = spec.steps();
  L.lambda = validate_lambda(lambda, L.T);
  L.expected_noise_norm = expected_noise_norm(spec.dim());
  L.L0r = spec.effective_L0r();
  L.L1r = spec.reward().L1r();
  if (spec.reward().l0_bounded())
    L.l0r_source = "analytic";
  else if (spec.l0r_domain())
    L.l0r_source = "domain";
  else
    L.l0r_source = "unbounded";
  return L;
}

}  // namespace

double expected_noise_norm(int d) {
  if (d < 1) throw ValidationError("dimension must be >= 1");
  return std::sqrt(2.0) * std::exp(std::lgamma((d + 1) / 2.0) - std::lgamma(d / 2.0));
}

std::vector<double> validate_lambda(std::span<const double> lambda, int T) {
  std::vector<double> out(lambda.begin(), lambda.end());
  if (out.size() == 1 && T > 1) out.assign(T, out.front());
  if (static_cast<int>(out.size()) != T) throw ValidationError("lambda length must equal T");
  for (double l : out)
    if (!(l > 0.0 && l < 1.0)) throw ValidationError("lambda entries must lie in (0,1)");
  return out;
}

LipschitzLedger optimal_ledger(const ProblemSpec& spec, std::span<const double> lambda) {
  LipschitzLedger L = base_ledger(spec, lambda);
  fill_optimal(L, spec);
  return L;
}

LipschitzLedger bar_ledger(const ProblemSpec& spec, std::span<const double> lambda) {
  LipschitzLedger L = base_ledger(spec, lambda);
  fill_optimal(L, spec);
  const auto& sc = spec.schedule();
  const auto& score = spec.score();
  const int T = L.T;
  const double EW = L.expected_noise_norm;
  L.L0Vbar.assign(T + 1, 0.0);
  L.L1Vbar.assign(T + 1, 0.0);
  L.L1Vbar_argmax.assign(T, 0);
  L.C1.assign(T, 0.0);
  L.C2.assign(T, 0.0);
  L.L0Vbar[T] = L.L0r;
  L.L1Vbar[T] = L.L1r;
  for (int t = T - 1; t >= 0; --t) {
    const double a = sc.alpha(t), s = sc.sigma(t), lam = L.lambda[t];
    const double ra = std::sqrt(a);
    const double gs = 1.0 + (1.0 - a) * score.L0s(t);
    const double gu = 1.0 + (1.0 - a) * L.L0ustar[t];
    const double v0 = L.L0Vbar[t + 1];
    L.L0Vbar[t] = safe_mul(gs / ra, v0) + safe_mul(gu * (1.0 - lam) / ra, v0);
    const double coef_a = (1.0 - a) / ra * L.L1ustar[t];
    const double coef_b = gu * gu * EW / (a * s);
    const auto [mx, arg] = scan_max(coef_a, coef_b, 1.0 - lam, lam);
    L.L1Vbar_argmax[t] = arg;
    L.L1Vbar[t] = safe_mul(gs * gu / a, L.L1Vbar[t + 1]) +
                  safe_mul((1.0 - a) / ra * score.L1s(t), v0) + safe_mul(mx, v0);
    L.C1[t] = gs / (lam * ra);
    L.C2[t] = safe_mul(gu / ra, v0) + safe_mul(gs / ra, L.L0Vstar[t + 1]);
  }
  return L;
}

std::vector<double> select_beta(LipschitzLedger& ledger, const ProblemSpec& spec,
                                std::span<const double> lambda, double margin) {
  if (!ledger.has_bar()) throw ValidationError("select_beta needs the bar ledger");
  if (!(margin >= 1.0)) throw ValidationError("beta margin must be >= 1");
  const auto lam = validate_lambda(lambda, ledger.T);
  const auto& sc = spec.schedule();
  std::vector<double> beta(ledger.T);
  for (int t = 0; t < ledger.T; ++t) {
    const double l1 = ledger.L1Vbar[t + 1];
    if (!std::isfinite(l1)) {
      std::ostringstream os;
      os << "L1Vbar[" << t + 1 << "] is unbounded (reward L0 source: " << ledger.l0r_source
         << "); supply a domain-restricted L0 for the reward or an explicit beta";
      throw UnboundedConstantError(os.str());
    }
    if (l1 == 0.0) {
      std::ostringstream os;
      os << "L1Vbar[" << t + 1 << "] is zero; every positive beta qualifies, supply beta explicitly";
      throw ValidationError(os.str());
    }
    const double s2 = sc.sigma(t) * sc.sigma(t);
    beta[t] = margin * s2 * l1 / (1.0 - lam[t]);
    if (!(s2 * l1 / beta[t] <= (1.0 - lam[t]) * (1.0 + 1e-12)))
      throw std::logic_error("selected beta violates the contraction condition");
  }
  ledger.beta = beta;
  return beta;
}

double concavity_gamma(const LipschitzLedger& ledger, const ProblemSpec& spec, int t) {
  const double a = spec.schedule().alpha(t), s = spec.schedule().sigma(t);
  return (1.0 - a) * (1.0 - a) / a * (spec.beta(t) / (s * s) - ledger.L1Vbar.at(t + 1));
}

namespace {

void require_finite_bounds(const LipschitzLedger& L) {
  if (!L.has_bar()) throw ValidationError("error_bounds needs the bar ledger");
  for (int t = 0; t < L.T; ++t) {
    if (!std::isfinite(L.C2[t]) || !std::isfinite(L.L0Vstar[t + 1])) {
      std::ostringstream os;
      os << "error bound at t = " << t << " needs a finite reward L0 (source: " << L.l0r_source << ")";
      throw UnboundedConstantError(os.str());
    }
  }
}

}  // namespace

ErrorBounds error_bounds(const LipschitzLedger& L, const ProblemSpec& spec, std::span<const int> m) {
  require_finite_bounds(L);
  const int T = L.T;
  if (static_cast<int>(m.size()) != T) throw ValidationError("m length must equal T");
  ErrorBounds out;
  out.E.assign(T + 1, 0.0);
  out.control_bound.assign(T, 0.0);
  for (int t = 0; t < T; ++t) {
    double sum = 0.0;
    double prod = 1.0;
    for (int k = t; k < T; ++k) {
      sum += prod * L.C2[k] * std::pow(1.0 - L.lambda[k], m[k] + 1);
      prod *= L.C1[k];
    }
    out.E[t] = sum;
  }
  const auto& sc = spec.schedule();
  for (int t = 0; t < T; ++t) {
    const double a = sc.alpha(t), lam = L.lambda[t];
    const double num = std::pow(1.0 - lam, m[t]) * L.L0Vstar[t + 1] + out.E[t + 1] / lam;
    const double den = (1.0 - a) * L.L1Vstar[t + 1];
    out.control_bound[t] = den == 0.0 ? (num == 0.0 ? 0.0 : kInf)
                                      : num * std::sqrt(a) * (1.0 - lam) / den;
  }
  return out;
}

std::vector<double> error_recursion(const LipschitzLedger& L, std::span<const int> m) {
  require_finite_bounds(L);
  std::vector<double> E(L.T + 1, 0.0);
  for (int t = L.T - 1; t >= 0; --t)
    E[t] = L.C1[t] * E[t + 1] + L.C2[t] * std::pow(1.0 - L.lambda[t], m[t] + 1);
  return E;
}

ValueEnvelope iterate_value_envelope(const LipschitzLedger& L, const ProblemSpec& spec, int t, int m) {
  if (!L.has_bar()) throw ValidationError("envelope needs the bar ledger");
  const auto& sc = spec.schedule();
  const double a = sc.alpha(t), s = sc.sigma(t), lam = L.lambda.at(t);
  const double ra = std::sqrt(a);
  const double gs = 1.0 + (1.0 - a) * spec.score().L0s(t);
  const double gu = 1.0 + (1.0 - a) * L.L0ustar[t];
  const double v0 = L.L0Vbar[t + 1], v1 = L.L1Vbar[t + 1];
  const double q = std::pow(1.0 - lam, m + 1);
  ValueEnvelope env;
  env.L0 = safe_mul(gs / ra, v0) + safe_mul(gu * q / ra, v0);
  env.L1 = safe_mul(gs * gu / a, v1) + safe_mul((1.0 - a) / ra * spec.score().L1s(t), v0) +
           safe_mul(((1.0 - a) / ra * L.L1ustar[t] + (m + 2) * gu * gu * L.expected_noise_norm / (a * s)) * q,
                    v0);
  return env;
}

void write_ledger_csv(std::ostream& os, const LipschitzLedger& L) {
  os << "t,lambda,beta,L0Vstar,L1Vstar,L0ustar,L1ustar,L0Vbar,L1Vbar,L1Vbar_argmax,C1,C2\n";
  os << std::setprecision(17);
  auto cell = [&](const std::vector<double>& v, int t) {
    os << ',';
    if (t < static_cast<int>(v.size())) os << v[t];
  };
  for (int t = 0; t <= L.T; ++t) {
    os << t;
    cell(L.lambda, t);
    cell(L.beta, t);
    cell(L.L0Vstar, t);
    cell(L.L1Vstar, t);
    cell(L.L0ustar, t);
    cell(L.L1ustar, t);
    cell(L.L0Vbar, t);
    cell(L.L1Vbar, t);
    os << ',';
    if (t < static_cast<int>(L.L1Vbar_argmax.size())) os << L.L1Vbar_argmax[t];
    cell(L.C1, t);
    cell(L.C2, t);
    os << '\n';
  }
}

}  // namespace pift
