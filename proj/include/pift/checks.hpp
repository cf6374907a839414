#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "pift/constants.hpp"
#include "pift/lqg.hpp"
#include "pift/model.hpp"
#include "pift/parametric.hpp"
#include "pift/solver.hpp"

namespace pift {

struct CheckResult {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double threshold = 0.0;
  std::string detail;
};

// Pass requires measured <= threshold; NaN never passes.
CheckResult at_most(std::string name, double measured, double threshold, std::string detail = {});
bool all_passed(const std::vector<CheckResult>& checks);
void write_checks_csv(std::ostream& os, const std::vector<CheckResult>& checks);

// Sup over central nodes of |u - u*| (max over t) and |V - V*| / (1 + |V*|).
struct OracleErrors {
  std::vector<double> control;  // T
  std::vector<double> value;    // T+1
};
OracleErrors oracle_errors(const PiftSolution& sol, const LqgSolution& oracle);

std::vector<CheckResult> check_oracle_equivalence(const PiftSolution& sol, const LqgSolution& oracle,
                                                  double tol);

// Requires diagnostic-mode control iterates.
std::vector<CheckResult> check_contraction(const ProblemSpec& spec, const LipschitzLedger& ledger,
                                           const PiftSolution& sol, bool with_optimal_rate);

// Measured |u_t^(m) - u_t*| against the bound for a run with every m_t = m.
std::vector<CheckResult> check_bound_dominance(const ProblemSpec& spec, const LipschitzLedger& ledger,
                                               const PiftSolution& sol, const LqgSolution& oracle, int m);

// Requires diagnostic mode.
std::vector<CheckResult> check_regularity(const ProblemSpec& spec, const LipschitzLedger& ledger,
                                          const PiftSolution& sol, double slack);

std::vector<CheckResult> check_stein(int pairs, int order, std::uint64_t seed);

std::vector<CheckResult> check_kl_closed_form(int triples, long samples, std::uint64_t seed);

// Summed one-step KL vs direct path log-ratio, and the constant-offset closed form.
std::vector<CheckResult> check_path_kl(const ProblemSpec& spec, const Policy& policy, long n_paths,
                                       std::uint64_t seed);

std::vector<CheckResult> check_product_formula(const ProblemSpec& spec, const LqgSolution& oracle,
                                               int points, int order, std::uint64_t seed);

std::vector<CheckResult> check_ledger_invariants(const ProblemSpec& spec, const LipschitzLedger& ledger);

std::vector<CheckResult> check_oracle_consistency(const ProblemSpec& spec, const LqgSolution& oracle,
                                                  const std::vector<GridSpec>& grids, int order);

std::vector<CheckResult> check_oracle_optimality(const ProblemSpec& spec, const LqgSolution& oracle,
                                                 long n_paths, std::uint64_t seed);

struct RateStudy {
  double eta = 0.0;
  std::vector<PgTraceRow> trace;
  std::vector<double> tail_ratios;
  double grad_norm_at_oracle = 0.0;
  double final_distance = 0.0;
};
// Scans eta over {eta_lo * 2^k} within [eta_lo, eta_hi] and keeps the fastest non-diverging run.
RateStudy pg_rate_study(const ProblemSpec& spec, const LqgSolution& oracle, double eta_lo, double eta_hi,
                        int iters);
std::vector<CheckResult> check_parametric_rate(const RateStudy& study, double ratio_limit, double grad_tol);

struct SweepPoint {
  double beta;
  ObjectiveEstimate estimate;
  PathStatistics paths;
  int max_effective_m;
};
std::vector<SweepPoint> run_beta_sweep(const ProblemSpec& base, const std::vector<double>& betas,
                                       const PiftConfig& pift, long n_paths, std::uint64_t seed);
std::vector<CheckResult> check_beta_sweep(const std::vector<SweepPoint>& sweep, double margin_se);

}  // namespace pift
