#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pift/lqg.hpp"
#include "pift/model.hpp"
#include "pift/sampler.hpp"

namespace pift {

struct FeatureMap {
  int p = 0;
  std::function<Vec(const Vec&)> phi;
  std::function<Mat(const Vec&)> jacobian;  // p x d
  std::string tag;

  // phi(y) = (1, y_1, ..., y_d)
  static FeatureMap affine(int d);
};

struct PolicyParams {
  std::vector<Mat> K;  // T matrices, d x p

  double frobenius() const;
  PolicyParams& axpy(double a, const std::vector<Mat>& x);
  friend double distance(const PolicyParams& a, const PolicyParams& b);
};

// Noise over (Y_0, W_0, ..., W_{T-1}): counter-based Monte Carlo, or in exact mode the
// symmetric degree-3 cubature (+/- sqrt(n) e_i, weight 1/2n) on the stacked n = d(T+1) normals.
enum class GradientMode { monte_carlo, exact };

struct NoisePlan {
  GradientMode mode = GradientMode::monte_carlo;
  long n_paths = 0;
  std::uint64_t seed = 0;

  static NoisePlan monte_carlo(long n_paths, std::uint64_t seed);
  static NoisePlan exact();
};

Estimate policy_objective(const PolicyParams& K, const ProblemSpec& spec, const FeatureMap& features,
                          const NoisePlan& plan);

struct PolicyGradient {
  std::vector<Mat> grad;
  std::vector<Mat> std_error;
  Estimate objective;

  double norm() const;
  double std_error_norm() const;
};

// Pathwise (reparameterized) gradient by backward adjoint accumulation along each path.
PolicyGradient policy_gradient(const PolicyParams& K, const ProblemSpec& spec, const FeatureMap& features,
                               const NoisePlan& plan);

struct PgTraceRow {
  int iteration;
  double objective;
  double grad_norm;
  double distance;  // NaN without an oracle
};

struct PgResult {
  PolicyParams K_final;
  std::vector<PgTraceRow> trace;
};

PgResult pg_ascent(const PolicyParams& K0, const ProblemSpec& spec, const FeatureMap& features, double eta,
                   int iters, const NoisePlan& plan, const std::optional<PolicyParams>& oracle = std::nullopt);

// Affine-feature parameters [k_t, K_t] of the oracle control.
PolicyParams oracle_params(const LqgSolution& sol);
// Affine-feature parameters [g_t, G_t] of a gaussian pretrained score.
PolicyParams pretrained_params(const ProblemSpec& spec);
PolicyParams zero_params(const ProblemSpec& spec, const FeatureMap& features);

void write_pg_trace_csv(std::ostream& os, const std::vector<PgTraceRow>& trace);

}  // namespace pift
