#pragma once

#include <vector>

#include "pift/model.hpp"

namespace pift {

// Gauss-Hermite rule for the standard normal weight: sum_i w_i f(x_i) ~ E f(W), W ~ N(0,1).
class GaussHermite {
 public:
  explicit GaussHermite(int order);

  int order() const noexcept { return static_cast<int>(nodes_.size()); }
  const std::vector<double>& nodes() const noexcept { return nodes_; }
  const std::vector<double>& weights() const noexcept { return weights_; }

 private:
  std::vector<double> nodes_;
  std::vector<double> weights_;
};

// Tensor-product rule over R^d, flattened. Points are standard-normal abscissae.
struct TensorRule {
  std::vector<Vec> points;
  std::vector<double> weights;
};
TensorRule tensor_rule(const GaussHermite& rule, int d);

// E[f(mean + sigma W)], W ~ N(0, I_d). f may return double or an Eigen type.
template <class F>
auto gauss_expectation(const TensorRule& rule, F&& f, const Vec& mean, double sigma) {
  using R = decltype(f(mean));
  if constexpr (std::is_arithmetic_v<R>) {
    double acc = 0.0;
    for (std::size_t i = 0; i < rule.points.size(); ++i)
      acc += rule.weights[i] * f(Vec(mean + sigma * rule.points[i]));
    return acc;
  } else {
    using Plain = typename R::PlainObject;
    Plain acc = rule.weights[0] * f(Vec(mean + sigma * rule.points[0]));
    for (std::size_t i = 1; i < rule.points.size(); ++i)
      acc += rule.weights[i] * f(Vec(mean + sigma * rule.points[i]));
    return acc;
  }
}

template <class F>
auto gauss_expectation(const GaussHermite& rule, F&& f, const Vec& mean, double sigma) {
  return gauss_expectation(tensor_rule(rule, static_cast<int>(mean.size())), std::forward<F>(f), mean,
                           sigma);
}

}  // namespace pift
