#pragma once

#include <stdexcept>
#include <string>

namespace pift {

class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A ledger entry needed for a bound is infinite (e.g. L0 of a quadratic reward).
class UnboundedConstantError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class NumericAbort : public std::runtime_error {
 public:
  NumericAbort(const std::string& what, int t, long node)
      : std::runtime_error(what), t_(t), node_(node) {}
  int step() const noexcept { return t_; }
  long node() const noexcept { return node_; }

 private:
  int t_;
  long node_;
};

class ConcavityError : public std::runtime_error {
 public:
  ConcavityError(const std::string& what, int t, double required_beta)
      : std::runtime_error(what), t_(t), required_beta_(required_beta) {}
  int step() const noexcept { return t_; }
  double required_beta() const noexcept { return required_beta_; }

 private:
  int t_;
  double required_beta_;
};

}  // namespace pift
