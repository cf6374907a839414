#pragma once

#include <iosfwd>
#include <vector>

#include "pift/model.hpp"

namespace pift {

// V_t(y) = -1/2 y^T P_t y + q_t^T y + c_t,  u_t*(y) = K_t y + k_t.
struct LqgSolution {
  std::vector<Mat> P;
  std::vector<Vec> q;
  std::vector<double> c;
  std::vector<Mat> K;
  std::vector<Vec> k;
  std::vector<double> concavity_margin;  // beta_t / sigma_t^2 + lambda_min(P_{t+1})
  std::vector<double> condition;         // cond of the per-step linear system
};

// Requires a gaussian score and quadratic reward with beta set.
LqgSolution solve_lqg(const ProblemSpec& spec);

Vec oracle_control(const LqgSolution& sol, int t, const Vec& y);
double oracle_value(const LqgSolution& sol, int t, const Vec& y);
Vec oracle_value_grad(const LqgSolution& sol, int t, const Vec& y);

// Coefficientwise residual of K y + k = s(y) + coef * E grad V_{t+1}(mean(y)).
double oracle_fixed_point_residual(const LqgSolution& sol, const ProblemSpec& spec, int t);

void write_lqg_csv(std::ostream& os, const LqgSolution& sol);

}  // namespace pift
