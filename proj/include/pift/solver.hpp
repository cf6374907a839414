#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include "pift/model.hpp"
#include "pift/quadrature.hpp"
#include "pift/valuefn.hpp"

namespace pift {

int default_quad_order(int d) noexcept;

// Smallest update norm treated as a valid ratio denominator: 1e-14, or 1e-12 of the control
// magnitude when larger, so roundoff-level residuals never enter a rate estimate.
double ratio_floor(double control_scale) noexcept;

// Per-step grids [m - 6 sd, m + 6 sd] from the pretrained marginals (t = 0..T).
std::vector<GridSpec> default_step_grids(const ProblemSpec& spec, int n);

struct PiftConfig {
  std::vector<int> inner_iters;     // m_t; a single entry applies to every t
  std::optional<double> tolerance;  // stop once sup |u^(m+1) - u^(m)| < tolerance
  std::vector<double> lambda;
  int grid_points = 512;
  int quad_order = 0;               // 0 picks default_quad_order(d)
  bool diagnostic_mode = false;
  bool beta_overridden = false;
  std::vector<GridSpec> grids;      // optional explicit grids, T+1 entries
};

struct InnerRecord {
  int t;
  int m;
  double residual;  // sup over central nodes of |u^(m) - u^(m-1)|
  double ratio;     // residual_m / residual_{m-1}; NaN when the denominator is below ratio_floor
  long boundary_events;
};

struct PiftDiagnostics {
  std::vector<InnerRecord> inner;
  std::vector<int> effective_m;               // T
  std::vector<long> value_boundary_events;    // T
  std::vector<double> wall_seconds;           // T, never serialized to CSV
};

struct PiftSolution {
  std::vector<ControlField> controls;  // T
  std::vector<ValueField> values;      // T+1
  std::vector<std::vector<ControlField>> control_iterates;  // diagnostic mode: [t][m], m = 0..m_t
  std::vector<std::vector<ValueField>> value_iterates;      // diagnostic mode: [t][m]
  PiftDiagnostics diagnostics;
};

struct StepResult {
  ControlField field;
  long boundary_events;
};
struct ValueResult {
  ValueField field;
  long boundary_events;
};

StepResult inner_update(const ControlField& u, const ValueField& v_next, const ProblemSpec& spec, int t,
                        const TensorRule& rule);
ValueResult bellman_value(const ValueField& v_next, const ControlField& u, const ProblemSpec& spec, int t,
                          const TensorRule& rule);
double fixed_point_residual(const ControlField& u, const ValueField& v_next, const ProblemSpec& spec,
                            int t, const TensorRule& rule);
// E V_{t+1}(mean(y, u) + sigma W) - beta kl(u, s(y)) at a single point.
double bellman_rhs(const ValueField& v_next, const ProblemSpec& spec, int t, const TensorRule& rule,
                   const Vec& y, const Vec& u);

PiftSolution backward_pass(const ProblemSpec& spec, const PiftConfig& cfg);

// Geometric mean per t of the recorded (non-NaN) contraction ratios.
std::vector<double> contraction_estimate(const PiftDiagnostics& diag, int T);

void write_diagnostics_csv(std::ostream& os, const PiftDiagnostics& diag);

}  // namespace pift
