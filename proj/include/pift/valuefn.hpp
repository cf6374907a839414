#pragma once

#include <functional>
#include <iosfwd>
#include <vector>

#include "pift/model.hpp"
#include "pift/quadrature.hpp"

namespace pift {

// Uniform tensor grid over [lo, hi] in d in {1, 2}; flat index runs axis 0 fastest.
class GridSpec {
 public:
  GridSpec(Vec lo, Vec hi, int n);

  int dim() const noexcept { return static_cast<int>(lo_.size()); }
  int n() const noexcept { return n_; }
  const Vec& lo() const noexcept { return lo_; }
  const Vec& hi() const noexcept { return hi_; }
  double spacing(int axis) const { return (hi_(axis) - lo_(axis)) / (n_ - 1); }
  long size() const noexcept;
  Vec node(long index) const;
  int axis_index(long index, int axis) const;
  long flat(int i, int j = 0) const noexcept { return i + static_cast<long>(n_) * j; }
  // Inside the central 80% of every axis.
  bool central(long index) const;
  bool central_axis(int i) const noexcept;

 private:
  Vec lo_, hi_;
  int n_;
};

struct ScalarSample {
  double value;
  Vec grad;
  bool outside;
};

// Natural cubic (1-D) or tensor bicubic (2-D) interpolant with linear extension outside the box.
class Spline {
 public:
  Spline(const GridSpec& grid, const std::vector<double>& values);
  ScalarSample evaluate(const Vec& y) const;

 private:
  void eval_inside(const Vec& y, double& v, Vec& g) const;
  GridSpec grid_;
  std::vector<double> f_, mx_, my_, mxy_;
};

class ValueField {
 public:
  ValueField(GridSpec grid, std::vector<double> values);

  const GridSpec& grid() const noexcept { return grid_; }
  const std::vector<double>& values() const noexcept { return values_; }
  ScalarSample evaluate(const Vec& y) const { return spline_.evaluate(y); }

 private:
  GridSpec grid_;
  std::vector<double> values_;
  Spline spline_;
};

ValueField sample_value_field(const GridSpec& grid, const std::function<double(const Vec&)>& f);
Vec value_gradient(const ValueField& field, const Vec& y);

struct VectorSample {
  Vec value;
  Mat jacobian;  // rows: components, cols: coordinates
  bool outside;
};

class ControlField {
 public:
  ControlField(GridSpec grid, std::vector<Vec> vectors);

  const GridSpec& grid() const noexcept { return grid_; }
  int components() const noexcept { return static_cast<int>(splines_.size()); }
  const std::vector<Vec>& vectors() const noexcept { return vectors_; }
  const Vec& at_node(long index) const { return vectors_.at(index); }
  VectorSample evaluate(const Vec& y) const;
  Vec value(const Vec& y, bool& outside) const;

 private:
  GridSpec grid_;
  std::vector<Vec> vectors_;
  std::vector<Spline> splines_;
};

ControlField sample_control_field(const GridSpec& grid, const std::function<Vec(const Vec&)>& f);

struct LipschitzEstimate {
  double L0_hat;
  double L1_hat;
};
LipschitzEstimate lipschitz_probe(const ValueField& field);
LipschitzEstimate lipschitz_probe(const ControlField& field);

struct SteinResult {
  Mat lhs;
  Mat rhs;
  double abs_diff;
};
SteinResult stein_check(const std::function<Vec(const Vec&)>& grad_v, const Vec& z, double sigma,
                        int order);
SteinResult stein_check(const ValueField& field, const Vec& z, double sigma, int order);

void write_field_csv(std::ostream& os, const ValueField& field);
void write_field_csv(std::ostream& os, const ControlField& field);

}  // namespace pift
