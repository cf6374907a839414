#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "pift/lqg.hpp"
#include "pift/model.hpp"
#include "pift/rng.hpp"
#include "pift/valuefn.hpp"

namespace pift {

struct Trajectory {
  std::vector<Vec> states;            // T+1
  std::vector<Vec> controls_applied;  // T
  std::uint64_t seed = 0;
  std::uint64_t path = 0;
};

// u_t(y); sets `outside` when an interpolated control is extrapolated.
struct Policy {
  std::string kind;
  std::function<Vec(int t, const Vec& y, bool& outside)> control;
};

Policy pretrained_policy(const ProblemSpec& spec);
Policy field_policy(std::vector<ControlField> controls);
Policy oracle_policy(LqgSolution sol);
// u = s + delta, a state-independent offset.
Policy offset_policy(const ProblemSpec& spec, Vec delta);

struct Simulation {
  std::vector<Trajectory> paths;
  std::uint64_t seed = 0;
  long boundary_events = 0;
  std::string policy_kind;
};

Simulation simulate(const ProblemSpec& spec, const Policy& policy, long n_paths, std::uint64_t seed);

// Noise used by path `path` at step t, reconstructed from the seed.
Vec trajectory_noise(const Trajectory& traj, int t, int d);

struct Estimate {
  double mean = 0.0;
  double std_error = 0.0;
};
Estimate mean_and_se(const std::vector<double>& x);

struct PathStatistics {
  std::vector<double> reward;
  std::vector<double> kl_sum;     // sum_t kl_t
  std::vector<double> objective;  // reward - sum_t beta_t kl_t
  std::vector<std::vector<double>> kl_step;  // [t][path]
};
PathStatistics path_statistics(const Simulation& sim, const ProblemSpec& spec);

struct ObjectiveEstimate {
  Estimate reward;
  Estimate kl_sum;
  Estimate objective;
  std::vector<double> mean_kl_step;
  long n_paths = 0;
  std::uint64_t seed = 0;
};
ObjectiveEstimate estimate_objective(const Simulation& sim, const ProblemSpec& spec);

// Path-average of sum_t kl_onestep.
Estimate path_kl(const Simulation& sim, const ProblemSpec& spec);
// Direct log-likelihood ratio of the controlled and pretrained path densities.
Estimate path_log_ratio(const Simulation& sim, const ProblemSpec& spec);

// Per-step mean and per-axis std of the pretrained process by Monte Carlo.
struct MarginalSummary {
  Vec mean;
  Vec sd;
};
std::vector<MarginalSummary> mc_reference_marginals(const ProblemSpec& spec, long n_paths, std::uint64_t seed);

void write_objective_csv_header(std::ostream& os);
void write_objective_csv_row(std::ostream& os, const std::string& label, double beta,
                             const ObjectiveEstimate& e);

}  // namespace pift
