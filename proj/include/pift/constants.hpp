#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pift/model.hpp"

namespace pift {

double expected_noise_norm(int d);

struct LipschitzLedger {
  int T = 0;
  std::vector<double> lambda;
  std::vector<double> L0Vstar, L1Vstar;  // T+1
  std::vector<double> L0ustar, L1ustar;  // T
  std::vector<double> L0Vbar, L1Vbar;    // T+1, empty until bar_ledger
  std::vector<int> L1Vbar_argmax;        // maximizing m of the bar scan
  std::vector<double> beta;              // T, empty until select_beta
  std::vector<double> C1, C2;            // T, empty until bar_ledger
  double expected_noise_norm = 0.0;
  double L0r = 0.0;
  double L1r = 0.0;
  std::string l0r_source;  // analytic | domain | unbounded

  bool has_bar() const noexcept { return !L0Vbar.empty(); }
};

std::vector<double> validate_lambda(std::span<const double> lambda, int T);

LipschitzLedger optimal_ledger(const ProblemSpec& spec, std::span<const double> lambda);
// Fills the optimal-path entries too, plus the bar recursions and C1/C2.
LipschitzLedger bar_ledger(const ProblemSpec& spec, std::span<const double> lambda);

std::vector<double> select_beta(LipschitzLedger& ledger, const ProblemSpec& spec,
                                std::span<const double> lambda, double margin = 1.0);

// Strong-concavity modulus of the one-step map at the ledger's beta.
double concavity_gamma(const LipschitzLedger& ledger, const ProblemSpec& spec, int t);

struct ErrorBounds {
  std::vector<double> E;              // T+1, E[T] = 0
  std::vector<double> control_bound;  // T
};

ErrorBounds error_bounds(const LipschitzLedger& ledger, const ProblemSpec& spec,
                         std::span<const int> m);
// Same E by the backward recursion E[t] = C1 E[t+1] + C2 (1-lambda)^(m+1).
std::vector<double> error_recursion(const LipschitzLedger& ledger, std::span<const int> m);

// Envelopes for V_t^(m) given the bar constants at t+1.
struct ValueEnvelope {
  double L0;
  double L1;
};
ValueEnvelope iterate_value_envelope(const LipschitzLedger& ledger, const ProblemSpec& spec,
                                     int t, int m);

void write_ledger_csv(std::ostream& os, const LipschitzLedger& ledger);

}  // namespace pift
