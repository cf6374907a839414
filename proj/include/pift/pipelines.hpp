#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "pift/checks.hpp"
#include "pift/config.hpp"
#include "pift/constants.hpp"

namespace pift {

std::string tool_version();

// Spec with beta resolved, the bar ledger, and the per-step grids.
struct PreparedProblem {
  ProblemSpec spec;
  LipschitzLedger ledger;
  std::vector<GridSpec> grids;
  bool beta_overridden = false;
};
PreparedProblem prepare_problem(const RunConfig& cfg);

// Normalized config followed by a provenance block; loads back through load_config_file.
std::string manifest_text(const RunConfig& cfg, Pipeline pipeline, const PreparedProblem& prep);

struct PipelineResult {
  int exit_code = 0;
  std::vector<CheckResult> checks;
};

// Writes manifest.yaml first, then the pipeline's CSVs and SVG plots into out_dir.
// Progress and timings go to log only. Errors propagate as exceptions.
PipelineResult run_pipeline(const RunConfig& cfg, Pipeline pipeline, const std::string& out_dir,
                            std::ostream& log);

// Checks run by the verify pipeline on an already solved problem.
std::vector<CheckResult> verify_suite(const RunConfig& cfg, const PreparedProblem& prep, const PiftSolution& sol);

}  // namespace pift
