#include "pift/lqg.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace pift {

LqgSolution solve_lqg(const ProblemSpec& spec) {
  if (!spec.score().is_affine()) throw ValidationError("LQG oracle needs a gaussian (affine) score");
  if (!spec.reward().is_quadratic()) throw ValidationError("LQG oracle needs a quadratic reward");
  const auto& sc = spec.schedule();
  const int T = sc.steps();
  const int d = spec.dim();
  const Mat I = Mat::Identity(d, d);
  const RewardModel& r = spec.reward();

  LqgSolution sol;
  sol.P.resize(T + 1);
  sol.q.resize(T + 1);
  sol.c.resize(T + 1);
  sol.K.resize(T);
  sol.k.resize(T);
  sol.concavity_margin.resize(T);
  sol.condition.resize(T);
  sol.P[T] = 2.0 * r.A();
  sol.q[T] = 2.0 * r.A() * r.b();
  sol.c[T] = r.c() - r.b().dot(r.A() * r.b());

  for (int t = T - 1; t >= 0; --t) {
    const double al = sc.alpha(t), sg = sc.sigma(t), beta = spec.beta(t);
    const double a = 1.0 / std::sqrt(al);
    const double b = (1.0 - al) / std::sqrt(al);
    const double kappa = beta * kl_coefficient(sc, t);
    const Mat& P = sol.P[t + 1];
    const Vec& q = sol.q[t + 1];
    const Mat& G = spec.score().affine_matrix(t);
    const Vec& g = spec.score().affine_offset(t);

    Eigen::SelfAdjointEigenSolver<Mat> pe(P);
    const double margin = beta / (sg * sg) + pe.eigenvalues().minCoeff();
    sol.concavity_margin[t] = margin;
    if (!(margin > 0.0)) {
      const double required = -sg * sg * pe.eigenvalues().minCoeff();
      std::ostringstream os;
      os << "one-step problem at t = " << t << " is not strictly concave; beta must exceed " << required;
      throw ConcavityError(os.str(), t, required);
    }

    const Mat M = b * b * P + 2.0 * kappa * I;
    Eigen::SelfAdjointEigenSolver<Mat> me(M);
    const auto ev = me.eigenvalues().cwiseAbs();
    const double cond = ev.maxCoeff() / ev.minCoeff();
    sol.condition[t] = cond;
    if (!(cond <= 1e12)) {
      std::ostringstream os;
      os << "LQG step system at t = " << t << " is ill-conditioned (cond = " << cond << ")";
      throw NumericAbort(os.str(), t, -1);
    }
    const auto ldlt = M.ldlt();
    const Mat K = ldlt.solve(2.0 * kappa * G - a * b * P);
    const Vec k = ldlt.solve(b * q + 2.0 * kappa * g);
    const Mat F = a * I + b * K;
    const Vec f = b * k;
    const Mat E = K - G;
    const Vec e0 = k - g;

    Mat Pt = F.transpose() * P * F + 2.0 * kappa * E.transpose() * E;
    sol.P[t] = 0.5 * (Pt + Pt.transpose());
    sol.q[t] = F.transpose() * (q - P * f) - 2.0 * kappa * E.transpose() * e0;
    sol.c[t] = -0.5 * f.dot(P * f) + q.dot(f) + sol.c[t + 1] - 0.5 * sg * sg * P.trace() -
               kappa * e0.squaredNorm();
    sol.K[t] = K;
    sol.k[t] = k;
  }
  return sol;
}

Vec oracle_control(const LqgSolution& sol, int t, const Vec& y) { return sol.K.at(t) * y + sol.k.at(t); }

double oracle_value(const LqgSolution& sol, int t, const Vec& y) {
  return -0.5 * y.dot(sol.P.at(t) * y) + sol.q.at(t).dot(y) + sol.c.at(t);
}

Vec oracle_value_grad(const LqgSolution& sol, int t, const Vec& y) {
  return -(sol.P.at(t) * y) + sol.q.at(t);
}

double oracle_fixed_point_residual(const LqgSolution& sol, const ProblemSpec& spec, int t) {
  const auto& sc = spec.schedule();
  const double al = sc.alpha(t), sg = sc.sigma(t);
  const double a = 1.0 / std::sqrt(al), b = (1.0 - al) / std::sqrt(al);
  const double coef = std::sqrt(al) * sg * sg / ((1.0 - al) * spec.beta(t));
  const int d = spec.dim();
  const Mat F = a * Mat::Identity(d, d) + b * sol.K[t];
  const Vec f = b * sol.k[t];
  const Mat& P = sol.P[t + 1];
  const Mat RK = sol.K[t] - spec.score().affine_matrix(t) - coef * (-P * F);
  const Vec Rk = sol.k[t] - spec.score().affine_offset(t) - coef * (-P * f + sol.q[t + 1]);
  return std::max(RK.cwiseAbs().maxCoeff(), Rk.cwiseAbs().maxCoeff());
}

void write_lqg_csv(std::ostream& os, const LqgSolution& sol) {
  const int T = static_cast<int>(sol.K.size());
  const int d = static_cast<int>(sol.q.front().size());
  os << "t";
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) os << ",P" << i << j;
  for (int i = 0; i < d; ++i) os << ",q" << i;
  os << ",c";
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) os << ",K" << i << j;
  for (int i = 0; i < d; ++i) os << ",k" << i;
  os << '\n' << std::setprecision(17);
  for (int t = 0; t <= T; ++t) {
    os << t;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) os << ',' << sol.P[t](i, j);
    for (int i = 0; i < d; ++i) os << ',' << sol.q[t](i);
    os << ',' << sol.c[t];
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        os << ',';
        if (t < T) os << sol.K[t](i, j);
      }
    for (int i = 0; i < d; ++i) {
      os << ',';
      if (t < T) os << sol.k[t](i);
    }
    os << '\n';
  }
}

}  // namespace pift
