#include "pift/solver.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "pift/parallel.hpp"
#include "pift/sampler.hpp"

namespace pift {

namespace {

constexpr std::uint64_t kMarginalSeed = 0x5eed0001ULL;
constexpr long kMarginalPaths = 10000;

double inner_coefficient(const ProblemSpec& spec, int t) {
  const double a = spec.schedule().alpha(t), s = spec.schedule().sigma(t);
  return std::sqrt(a) * s * s / ((1.0 - a) * spec.beta(t));
}

// E grad V(mean + sigma W) with the number of extrapolated quadrature points.
Vec expected_gradient(const ValueField& v, const TensorRule& rule, const Vec& mean, double sigma,
                      long& events) {
  Vec acc = Vec::Zero(mean.size());
  for (std::size_t i = 0; i < rule.points.size(); ++i) {
    const ScalarSample s = v.evaluate(mean + sigma * rule.points[i]);
    acc += rule.weights[i] * s.grad;
    events += s.outside;
  }
  return acc;
}

double expected_value(const ValueField& v, const TensorRule& rule, const Vec& mean, double sigma,
                      long& events) {
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.points.size(); ++i) {
    const ScalarSample s = v.evaluate(mean + sigma * rule.points[i]);
    acc += rule.weights[i] * s.value;
    events += s.outside;
  }
  return acc;
}

[[noreturn]] void abort_at(const char* what, int t, long node) {
  std::ostringstream os;
  os << what << " at t = " << t << ", node " << node;
  throw NumericAbort(os.str(), t, node);
}

long sum_events(const std::vector<long>& ev) {
  long s = 0;
  for (long e : ev) s += e;
  return s;
}

double sup_central_norm(const ControlField& a) {
  const GridSpec& g = a.grid();
  double m = 0.0;
  for (long i = 0; i < g.size(); ++i)
    if (g.central(i)) m = std::max(m, a.at_node(i).norm());
  return m;
}

double sup_central_diff(const ControlField& a, const ControlField& b) {
  const GridSpec& g = a.grid();
  double m = 0.0;
  for (long i = 0; i < g.size(); ++i)
    if (g.central(i)) m = std::max(m, (a.at_node(i) - b.at_node(i)).norm());
  return m;
}

}  // namespace

int default_quad_order(int d) noexcept { return d == 1 ? 32 : 16; }

double ratio_floor(double control_scale) noexcept { return std::max(1e-14, 1e-12 * control_scale); }

std::vector<GridSpec> default_step_grids(const ProblemSpec& spec, int n) {
  const int T = spec.steps();
  const int d = spec.dim();
  if (d > 2) throw ValidationError("grid solver supports d in {1, 2}");
  std::vector<Vec> mean(T + 1), sd(T + 1);
  if (spec.score().is_affine()) {
    const auto marg = affine_reference_marginals(spec);
    for (int t = 0; t <= T; ++t) {
      mean[t] = marg[t].mean;
      sd[t] = marg[t].cov.diagonal().cwiseSqrt();
    }
  } else {
    const auto marg = mc_reference_marginals(spec, kMarginalPaths, kMarginalSeed);
    for (int t = 0; t <= T; ++t) {
      mean[t] = marg[t].mean;
      sd[t] = marg[t].sd;
    }
  }
  std::vector<GridSpec> grids;
  grids.reserve(T + 1);
  for (int t = 0; t <= T; ++t) grids.emplace_back(mean[t] - 6.0 * sd[t], mean[t] + 6.0 * sd[t], n);
  return grids;
}

StepResult inner_update(const ControlField& u, const ValueField& v_next, const ProblemSpec& spec, int t,
                        const TensorRule& rule) {
  const GridSpec& g = u.grid();
  const double coef = inner_coefficient(spec, t);
  const double sigma = spec.schedule().sigma(t);
  std::vector<Vec> out(g.size());
  std::vector<long> events(g.size(), 0);
  parallel_for(static_cast<std::size_t>(g.size()), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const Vec y = g.node(static_cast<long>(i));
      const Vec mean = step_mean(spec.schedule(), t, y, u.at_node(static_cast<long>(i)));
      const Vec eg = expected_gradient(v_next, rule, mean, sigma, events[i]);
      out[i] = spec.score().eval(t, y) + coef * eg;
      if (!out[i].allFinite()) abort_at("non-finite control", t, static_cast<long>(i));
    }
  });
  return {ControlField(g, std::move(out)), sum_events(events)};
}

ValueResult bellman_value(const ValueField& v_next, const ControlField& u, const ProblemSpec& spec, int t,
                          const TensorRule& rule) {
  const GridSpec& g = u.grid();
  const double sigma = spec.schedule().sigma(t);
  const double beta = spec.beta(t);
  std::vector<double> out(g.size());
  std::vector<long> events(g.size(), 0);
  parallel_for(static_cast<std::size_t>(g.size()), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const Vec y = g.node(static_cast<long>(i));
      const Vec& ui = u.at_node(static_cast<long>(i));
      const Vec mean = step_mean(spec.schedule(), t, y, ui);
      out[i] = expected_value(v_next, rule, mean, sigma, events[i]) -
               beta * kl_onestep(spec.schedule(), t, ui, spec.score().eval(t, y));
      if (!std::isfinite(out[i])) abort_at("non-finite value", t, static_cast<long>(i));
    }
  });
  return {ValueField(g, std::move(out)), sum_events(events)};
}

double fixed_point_residual(const ControlField& u, const ValueField& v_next, const ProblemSpec& spec, int t,
                            const TensorRule& rule) {
  const GridSpec& g = u.grid();
  const double coef = inner_coefficient(spec, t);
  const double sigma = spec.schedule().sigma(t);
  std::vector<double> r(g.size(), 0.0);
  parallel_for(static_cast<std::size_t>(g.size()), [&](std::size_t b, std::size_t e) {
    long ev = 0;
    for (std::size_t i = b; i < e; ++i) {
      if (!g.central(static_cast<long>(i))) continue;
      const Vec y = g.node(static_cast<long>(i));
      const Vec& ui = u.at_node(static_cast<long>(i));
      const Vec mean = step_mean(spec.schedule(), t, y, ui);
      const Vec target = spec.score().eval(t, y) + coef * expected_gradient(v_next, rule, mean, sigma, ev);
      r[i] = (ui - target).norm();
    }
  });
  double m = 0.0;
  for (double x : r) m = std::max(m, x);
  return m;
}

double bellman_rhs(const ValueField& v_next, const ProblemSpec& spec, int t, const TensorRule& rule,
                   const Vec& y, const Vec& u) {
  long ev = 0;
  const Vec mean = step_mean(spec.schedule(), t, y, u);
  return expected_value(v_next, rule, mean, spec.schedule().sigma(t), ev) -
         spec.beta(t) * kl_onestep(spec.schedule(), t, u, spec.score().eval(t, y));
}

PiftSolution backward_pass(const ProblemSpec& spec, const PiftConfig& cfg) {
  const int T = spec.steps();
  const int d = spec.dim();
  if (!spec.has_beta()) throw ValidationError("backward_pass needs beta");
  std::vector<int> m = cfg.inner_iters;
  if (m.size() == 1) m.assign(T, m.front());
  if (static_cast<int>(m.size()) != T) throw ValidationError("inner_iters length must equal T");
  for (int x : m)
    if (x < 1) throw ValidationError("inner_iters entries must be >= 1");
  if (cfg.tolerance && !(*cfg.tolerance > 0.0)) throw ValidationError("tolerance must be positive");

  const std::vector<GridSpec> grids = cfg.grids.empty() ? default_step_grids(spec, cfg.grid_points) : cfg.grids;
  if (static_cast<int>(grids.size()) != T + 1) throw ValidationError("need T+1 grids");
  for (const auto& g : grids)
    if (g.dim() != d) throw ValidationError("grid dimension does not match the problem");
  const int order = cfg.quad_order > 0 ? cfg.quad_order : default_quad_order(d);
  const TensorRule rule = tensor_rule(GaussHermite(order), d);

  PiftSolution sol;
  PiftDiagnostics& diag = sol.diagnostics;
  diag.effective_m.assign(T, 0);
  diag.value_boundary_events.assign(T, 0);
  diag.wall_seconds.assign(T, 0.0);
  std::vector<std::optional<ValueField>> values(T + 1);
  std::vector<std::optional<ControlField>> controls(T);
  if (cfg.diagnostic_mode) {
    sol.control_iterates.resize(T);
    sol.value_iterates.resize(T);
  }

  values[T] = sample_value_field(grids[T], [&](const Vec& y) { return spec.reward().eval(y); });

  for (int t = T - 1; t >= 0; --t) {
    const auto start = std::chrono::steady_clock::now();
    const ValueField& vnext = *values[t + 1];
    ControlField u = sample_control_field(grids[t], [&](const Vec& y) { return spec.score().eval(t, y); });
    if (cfg.diagnostic_mode) {
      sol.control_iterates[t].push_back(u);
      sol.value_iterates[t].push_back(bellman_value(vnext, u, spec, t, rule).field);
    }
    double prev = std::numeric_limits<double>::quiet_NaN();
    int done = 0;
    for (int k = 1; k <= m[t]; ++k) {
      StepResult next = inner_update(u, vnext, spec, t, rule);
      const double res = sup_central_diff(next.field, u);
      const double ratio = (std::isnan(prev) || prev < ratio_floor(sup_central_norm(u)))
                               ? std::numeric_limits<double>::quiet_NaN()
                               : res / prev;
      diag.inner.push_back({t, k, res, ratio, next.boundary_events});
      u = std::move(next.field);
      done = k;
      prev = res;
      if (cfg.diagnostic_mode) {
        sol.control_iterates[t].push_back(u);
        sol.value_iterates[t].push_back(bellman_value(vnext, u, spec, t, rule).field);
      }
      if (cfg.tolerance && res < *cfg.tolerance) break;
    }
    diag.effective_m[t] = done;
    ValueResult vr = bellman_value(vnext, u, spec, t, rule);
    diag.value_boundary_events[t] = vr.boundary_events;
    values[t] = std::move(vr.field);
    controls[t] = std::move(u);
    diag.wall_seconds[t] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  for (auto& v : values) sol.values.push_back(std::move(*v));
  for (auto& c : controls) sol.controls.push_back(std::move(*c));
  return sol;
}

std::vector<double> contraction_estimate(const PiftDiagnostics& diag, int T) {
  std::vector<double> logsum(T, 0.0);
  std::vector<int> count(T, 0);
  std::vector<bool> zero(T, false);
  for (const auto& r : diag.inner) {
    if (std::isnan(r.ratio)) continue;
    if (r.ratio == 0.0) {
      zero[r.t] = true;
      continue;
    }
    logsum[r.t] += std::log(r.ratio);
    ++count[r.t];
  }
  std::vector<double> out(T, 0.0);
  for (int t = 0; t < T; ++t) {
    if (zero[t] || count[t] == 0) continue;
    out[t] = std::exp(logsum[t] / count[t]);
  }
  return out;
}

void write_diagnostics_csv(std::ostream& os, const PiftDiagnostics& diag) {
  os << "t,m,residual,ratio,boundary_events\n" << std::setprecision(17);
  for (const auto& r : diag.inner) {
    os << r.t << ',' << r.m << ',' << r.residual << ',';
    if (std::isnan(r.ratio))
      os << "nan";
    else
      os << r.ratio;
    os << ',' << r.boundary_events << '\n';
  }
}

}  // namespace pift
