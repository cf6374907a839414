#include "pift/quadrature.hpp"

#include <cmath>

namespace pift {

namespace {

// Orthonormal probabilists' Hermite values p_{n-1}(x), p_n(x) and sum_{k<n} p_k(x)^2.
void hermite_eval(int n, double x, double& pnm1, double& pn, double& sumsq) {
  double p0 = 1.0, p1 = x;
  sumsq = 1.0;
  if (n == 1) {
    pnm1 = p0;
    pn = p1;
    return;
  }
  sumsq += p1 * p1;
  for (int k = 1; k < n; ++k) {
    const double p2 = (x * p1 - std::sqrt(static_cast<double>(k)) * p0) / std::sqrt(k + 1.0);
    p0 = p1;
    p1 = p2;
    if (k + 1 < n) sumsq += p1 * p1;
  }
  pnm1 = p0;
  pn = p1;
}

}  // namespace

GaussHermite::GaussHermite(int order) {
  if (order < 1 || order > 200) throw ValidationError("quadrature order must lie in [1, 200]");
  const int n = order;
  Mat J = Mat::Zero(n, n);
  for (int k = 1; k < n; ++k) J(k, k - 1) = J(k - 1, k) = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Mat> es(J);
  nodes_.resize(n);
  weights_.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = es.eigenvalues()(i);
    for (int it = 0; it < 3; ++it) {
      double pnm1, pn, ss;
      hermite_eval(n, x, pnm1, pn, ss);
      if (pnm1 == 0.0) break;
      x -= pn / (std::sqrt(static_cast<double>(n)) * pnm1);
    }
    double pnm1, pn, ss;
    hermite_eval(n, x, pnm1, pn, ss);
    nodes_[i] = x;
    weights_[i] = 1.0 / ss;
  }
  for (int i = 0; i < n / 2; ++i) {
    const int j = n - 1 - i;
    const double x = 0.5 * (nodes_[j] - nodes_[i]);
    const double w = 0.5 * (weights_[i] + weights_[j]);
    nodes_[i] = -x;
    nodes_[j] = x;
    weights_[i] = weights_[j] = w;
  }
  if (n % 2 == 1) nodes_[n / 2] = 0.0;
  double total = 0.0;
  for (double w : weights_) total += w;
  for (double& w : weights_) w /= total;
}

TensorRule tensor_rule(const GaussHermite& rule, int d) {
  if (d < 1) throw ValidationError("dimension must be >= 1");
  const int n = rule.order();
  std::size_t count = 1;
  for (int k = 0; k < d; ++k) {
    count *= static_cast<std::size_t>(n);
    if (count > 50'000'000) throw ValidationError("tensor quadrature too large");
  }
  TensorRule out;
  out.points.reserve(count);
  out.weights.reserve(count);
  std::vector<int> idx(d, 0);
  for (std::size_t c = 0; c < count; ++c) {
    Vec x(d);
    double w = 1.0;
    for (int k = 0; k < d; ++k) {
      x(k) = rule.nodes()[idx[k]];
      w *= rule.weights()[idx[k]];
    }
    out.points.push_back(std::move(x));
    out.weights.push_back(w);
    for (int k = 0; k < d; ++k) {
      if (++idx[k] < n) break;
      idx[k] = 0;
    }
  }
  return out;
}

}  // namespace pift
