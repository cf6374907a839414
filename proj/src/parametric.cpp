#include "pift/parametric.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "pift/parallel.hpp"

namespace pift {

FeatureMap FeatureMap::affine(int d) {
  FeatureMap f;
  f.p = d + 1;
  f.tag = "affine";
  f.phi = [d](const Vec& y) {
    Vec v(d + 1);
    v(0) = 1.0;
    v.tail(d) = y;
    return v;
  };
  f.jacobian = [d](const Vec&) {
    Mat J = Mat::Zero(d + 1, d);
    J.bottomRows(d) = Mat::Identity(d, d);
    return J;
  };
  return f;
}

double PolicyParams::frobenius() const {
  double s = 0.0;
  for (const auto& k : K) s += k.squaredNorm();
  return std::sqrt(s);
}

PolicyParams& PolicyParams::axpy(double a, const std::vector<Mat>& x) {
  for (std::size_t t = 0; t < K.size(); ++t) K[t] += a * x.at(t);
  return *this;
}

double distance(const PolicyParams& a, const PolicyParams& b) {
  double s = 0.0;
  for (std::size_t t = 0; t < a.K.size(); ++t) s += (a.K[t] - b.K.at(t)).squaredNorm();
  return std::sqrt(s);
}

NoisePlan NoisePlan::monte_carlo(long n_paths, std::uint64_t seed) {
  if (n_paths < 2) throw ValidationError("Monte Carlo plan needs at least 2 paths");
  return {GradientMode::monte_carlo, n_paths, seed};
}

NoisePlan NoisePlan::exact() { return {GradientMode::exact, 0, 0}; }

namespace {

struct PathNoise {
  long count;
  double weight;
  std::function<void(long, std::vector<Vec>&)> fill;  // slot 0 = Y_0, slot t+1 = W_t
};

PathNoise make_noise(const NoisePlan& plan, int d, int T) {
  if (plan.mode == GradientMode::monte_carlo) {
    const NoiseStream ns(plan.seed);
    return {plan.n_paths, 1.0 / static_cast<double>(plan.n_paths), [ns, d, T](long i, std::vector<Vec>& xi) {
              xi.resize(T + 1);
              for (int s = 0; s <= T; ++s) xi[s] = ns.normals(static_cast<std::uint64_t>(i), s, d);
            }};
  }
  const long n = static_cast<long>(d) * (T + 1);
  const double r = std::sqrt(static_cast<double>(n));
  return {2 * n, 1.0 / (2.0 * n), [d, T, r](long i, std::vector<Vec>& xi) {
            xi.assign(T + 1, Vec::Zero(d));
            const long axis = i / 2;
            xi[axis / d](axis % d) = (i % 2 == 0) ? r : -r;
          }};
}

struct PathResult {
  double objective;
  std::vector<Mat> grad;
};

PathResult run_path(const PolicyParams& K, const ProblemSpec& spec, const FeatureMap& f,
                    const std::vector<Vec>& xi, bool with_grad, long path) {
  const auto& sc = spec.schedule();
  const int T = sc.steps();
  std::vector<Vec> y(T + 1), u(T), e(T), phi(T);
  y[0] = xi[0];
  double J = 0.0;
  for (int t = 0; t < T; ++t) {
    phi[t] = f.phi(y[t]);
    u[t] = K.K[t] * phi[t];
    e[t] = u[t] - spec.score().eval(t, y[t]);
    J -= spec.beta(t) * kl_coefficient(sc, t) * e[t].squaredNorm();
    y[t + 1] = step_dynamics(sc, t, y[t], u[t], xi[t + 1]);
  }
  J += spec.reward().eval(y[T]);
  if (!std::isfinite(J)) {
    std::ostringstream os;
    os << "non-finite rollout on path " << path;
    throw NumericAbort(os.str(), T, path);
  }
  PathResult out{J, {}};
  if (!with_grad) return out;
  out.grad.resize(T);
  Vec lam = spec.reward().grad(y[T]);
  const int d = spec.dim();
  for (int t = T - 1; t >= 0; --t) {
    const double a = sc.alpha(t);
    const double two_bc = 2.0 * spec.beta(t) * kl_coefficient(sc, t);
    const Vec du = (1.0 - a) / std::sqrt(a) * lam - two_bc * e[t];
    out.grad[t] = du * phi[t].transpose();
    const Mat KJ = K.K[t] * f.jacobian(y[t]);
    const Mat dyn = (Mat::Identity(d, d) + (1.0 - a) * KJ) / std::sqrt(a);
    lam = dyn.transpose() * lam - two_bc * (KJ - spec.score().jacobian(t, y[t])).transpose() * e[t];
  }
  return out;
}

void check_params(const PolicyParams& K, const ProblemSpec& spec, const FeatureMap& f) {
  if (static_cast<int>(K.K.size()) != spec.steps()) throw ValidationError("need one K per step");
  for (const auto& k : K.K) {
    if (k.rows() != spec.dim() || k.cols() != f.p) throw ValidationError("K has the wrong shape");
    if (!k.allFinite()) throw ValidationError("K has non-finite entries");
  }
  if (!spec.has_beta()) throw ValidationError("policy objective needs beta");
}

}  // namespace

Estimate policy_objective(const PolicyParams& K, const ProblemSpec& spec, const FeatureMap& features,
                          const NoisePlan& plan) {
  check_params(K, spec, features);
  const PathNoise noise = make_noise(plan, spec.dim(), spec.steps());
  std::vector<double> v(noise.count);
  parallel_for(v.size(), [&](std::size_t b, std::size_t e) {
    std::vector<Vec> xi;
    for (std::size_t i = b; i < e; ++i) {
      noise.fill(static_cast<long>(i), xi);
      v[i] = run_path(K, spec, features, xi, false, static_cast<long>(i)).objective;
    }
  });
  Estimate est = mean_and_se(v);
  if (plan.mode == GradientMode::exact) est.std_error = 0.0;
  return est;
}

double PolicyGradient::norm() const {
  double s = 0.0;
  for (const auto& g : grad) s += g.squaredNorm();
  return std::sqrt(s);
}

double PolicyGradient::std_error_norm() const {
  double s = 0.0;
  for (const auto& g : std_error) s += g.squaredNorm();
  return std::sqrt(s);
}

PolicyGradient policy_gradient(const PolicyParams& K, const ProblemSpec& spec, const FeatureMap& features,
                               const NoisePlan& plan) {
  check_params(K, spec, features);
  const int T = spec.steps();
  const int d = spec.dim();
  const int p = features.p;
  const long P = static_cast<long>(T) * d * p;
  const PathNoise noise = make_noise(plan, d, T);
  const long n = noise.count;
  std::vector<double> obj(n);
  std::vector<double> flat(static_cast<std::size_t>(n) * P);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t b, std::size_t e) {
    std::vector<Vec> xi;
    for (std::size_t i = b; i < e; ++i) {
      noise.fill(static_cast<long>(i), xi);
      const PathResult r = run_path(K, spec, features, xi, true, static_cast<long>(i));
      obj[i] = r.objective;
      double* out = flat.data() + i * P;
      for (int t = 0; t < T; ++t)
        for (int c = 0; c < p; ++c)
          for (int rr = 0; rr < d; ++rr) *out++ = r.grad[t](rr, c);
    }
  });
  PolicyGradient g;
  g.objective = mean_and_se(obj);
  g.grad.assign(T, Mat::Zero(d, p));
  g.std_error.assign(T, Mat::Zero(d, p));
  std::vector<double> col(n);
  long k = 0;
  for (int t = 0; t < T; ++t)
    for (int c = 0; c < p; ++c)
      for (int rr = 0; rr < d; ++rr, ++k) {
        for (long i = 0; i < n; ++i) col[i] = flat[static_cast<std::size_t>(i) * P + k];
        const Estimate e = mean_and_se(col);
        g.grad[t](rr, c) = e.mean;
        g.std_error[t](rr, c) = plan.mode == GradientMode::exact ? 0.0 : e.std_error;
      }
  if (plan.mode == GradientMode::exact) g.objective.std_error = 0.0;
  return g;
}

PgResult pg_ascent(const PolicyParams& K0, const ProblemSpec& spec, const FeatureMap& features, double eta,
                   int iters, const NoisePlan& plan, const std::optional<PolicyParams>& oracle) {
  if (!(eta >= 0.0)) throw ValidationError("eta must be nonnegative");
  if (iters < 0) throw ValidationError("iters must be nonnegative");
  PgResult res;
  res.K_final = K0;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int m = 0; m <= iters; ++m) {
    const PolicyGradient g = policy_gradient(res.K_final, spec, features, plan);
    res.trace.push_back({m, g.objective.mean, g.norm(), oracle ? distance(res.K_final, *oracle) : nan});
    if (m == iters) break;
    res.K_final.axpy(eta, g.grad);
    if (!(res.K_final.frobenius() <= 1e6)) {
      std::ostringstream os;
      os << "policy gradient ascent diverged at iteration " << m + 1 << " (|K|_F > 1e6)";
      throw NumericAbort(os.str(), -1, m + 1);
    }
  }
  return res;
}

PolicyParams oracle_params(const LqgSolution& sol) {
  PolicyParams P;
  for (std::size_t t = 0; t < sol.K.size(); ++t) {
    const auto d = sol.K[t].rows();
    Mat k(d, d + 1);
    k.col(0) = sol.k[t];
    k.rightCols(d) = sol.K[t];
    P.K.push_back(std::move(k));
  }
  return P;
}

PolicyParams pretrained_params(const ProblemSpec& spec) {
  PolicyParams P;
  const int d = spec.dim();
  for (int t = 0; t < spec.steps(); ++t) {
    Mat k(d, d + 1);
    k.col(0) = spec.score().affine_offset(t);
    k.rightCols(d) = spec.score().affine_matrix(t);
    P.K.push_back(std::move(k));
  }
  return P;
}

PolicyParams zero_params(const ProblemSpec& spec, const FeatureMap& features) {
  PolicyParams P;
  P.K.assign(spec.steps(), Mat::Zero(spec.dim(), features.p));
  return P;
}

void write_pg_trace_csv(std::ostream& os, const std::vector<PgTraceRow>& trace) {
  os << "iteration,objective,grad_norm,distance_to_oracle\n" << std::setprecision(17);
  for (const auto& r : trace) {
    os << r.iteration << ',' << r.objective << ',' << r.grad_norm << ',';
    if (std::isnan(r.distance))
      os << "nan";
    else
      os << r.distance;
    os << '\n';
  }
}

}  // namespace pift
