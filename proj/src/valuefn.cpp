#include "pift/valuefn.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>

namespace pift {

namespace {

// Natural cubic spline second derivatives for uniform spacing h over strided samples.
void natural_second_derivs(const double* f, long stride, int n, double h, double* m, long mstride) {
  std::vector<double> c(n, 0.0), d(n, 0.0);
  const double k = 6.0 / (h * h);
  // Thomas sweep on rows 1..n-2 of [1 4 1] with M_0 = M_{n-1} = 0.
  for (int i = 1; i < n - 1; ++i) {
    const double rhs = k * (f[(i - 1) * stride] - 2.0 * f[i * stride] + f[(i + 1) * stride]);
    const double denom = 4.0 - (i > 1 ? c[i - 1] : 0.0);
    c[i] = 1.0 / denom;
    d[i] = (rhs - (i > 1 ? d[i - 1] : 0.0)) / denom;
  }
  m[0] = 0.0;
  m[(n - 1) * mstride] = 0.0;
  double next = 0.0;
  for (int i = n - 2; i >= 1; --i) {
    next = d[i] - c[i] * next;
    m[i * mstride] = next;
  }
}

struct Basis {
  double a, b, c, d;      // A, B, (A^3-A)h^2/6, (B^3-B)h^2/6
  double da, db, dc, dd;  // derivatives in x
};

Basis basis(double t, double h) {
  const double A = 1.0 - t, B = t;
  return {A,
          B,
          (A * A * A - A) * h * h / 6.0,
          (B * B * B - B) * h * h / 6.0,
          -1.0 / h,
          1.0 / h,
          -(3.0 * A * A - 1.0) * h / 6.0,
          (3.0 * B * B - 1.0) * h / 6.0};
}

void locate(double x, double lo, double h, int n, int& i, double& t) {
  double s = (x - lo) / h;
  i = static_cast<int>(std::floor(s));
  if (i < 0) i = 0;
  if (i > n - 2) i = n - 2;
  t = s - i;
}

double spectral_norm(const Mat& m) {
  if (m.rows() == 1 && m.cols() == 1) return std::abs(m(0, 0));
  Eigen::JacobiSVD<Mat> svd(m);
  return svd.singularValues()(0);
}

}  // namespace

GridSpec::GridSpec(Vec lo, Vec hi, int n) : lo_(std::move(lo)), hi_(std::move(hi)), n_(n) {
  if (lo_.size() < 1 || lo_.size() > 2) throw ValidationError("grid dimension must be 1 or 2");
  if (hi_.size() != lo_.size()) throw ValidationError("grid lo/hi dimensions differ");
  if (n_ < 16) throw ValidationError("grid needs at least 16 points per axis");
  for (int k = 0; k < lo_.size(); ++k)
    if (!(lo_(k) < hi_(k)) || !std::isfinite(lo_(k)) || !std::isfinite(hi_(k)))
      throw ValidationError("grid requires finite lo < hi on every axis");
}

long GridSpec::size() const noexcept {
  long s = 1;
  for (int k = 0; k < dim(); ++k) s *= n_;
  return s;
}

int GridSpec::axis_index(long index, int axis) const {
  return axis == 0 ? static_cast<int>(index % n_) : static_cast<int>(index / n_);
}

Vec GridSpec::node(long index) const {
  Vec y(dim());
  for (int k = 0; k < dim(); ++k) y(k) = lo_(k) + axis_index(index, k) * spacing(k);
  return y;
}

bool GridSpec::central_axis(int i) const noexcept {
  const double span = n_ - 1;
  return i >= std::ceil(0.1 * span - 1e-9) && i <= std::floor(0.9 * span + 1e-9);
}

bool GridSpec::central(long index) const {
  for (int k = 0; k < dim(); ++k)
    if (!central_axis(axis_index(index, k))) return false;
  return true;
}

// ---------------------------------------------------------------------------

Spline::Spline(const GridSpec& grid, const std::vector<double>& values) : grid_(grid), f_(values) {
  if (static_cast<long>(f_.size()) != grid_.size()) throw ValidationError("field size does not match grid");
  const int n = grid_.n();
  mx_.assign(f_.size(), 0.0);
  if (grid_.dim() == 1) {
    natural_second_derivs(f_.data(), 1, n, grid_.spacing(0), mx_.data(), 1);
    return;
  }
  my_.assign(f_.size(), 0.0);
  mxy_.assign(f_.size(), 0.0);
  const double hx = grid_.spacing(0), hy = grid_.spacing(1);
  for (int j = 0; j < n; ++j)
    natural_second_derivs(f_.data() + grid_.flat(0, j), 1, n, hx, mx_.data() + grid_.flat(0, j), 1);
  for (int i = 0; i < n; ++i)
    natural_second_derivs(f_.data() + i, n, n, hy, my_.data() + i, n);
  for (int j = 0; j < n; ++j)
    natural_second_derivs(my_.data() + grid_.flat(0, j), 1, n, hx, mxy_.data() + grid_.flat(0, j), 1);
}

void Spline::eval_inside(const Vec& y, double& v, Vec& g) const {
  const int n = grid_.n();
  if (grid_.dim() == 1) {
    const double h = grid_.spacing(0);
    int i;
    double t;
    locate(y(0), grid_.lo()(0), h, n, i, t);
    const Basis b = basis(t, h);
    v = b.a * f_[i] + b.b * f_[i + 1] + b.c * mx_[i] + b.d * mx_[i + 1];
    g.resize(1);
    g(0) = b.da * f_[i] + b.db * f_[i + 1] + b.dc * mx_[i] + b.dd * mx_[i + 1];
    return;
  }
  const double hx = grid_.spacing(0), hy = grid_.spacing(1);
  int i, j;
  double tx, ty;
  locate(y(0), grid_.lo()(0), hx, n, i, tx);
  locate(y(1), grid_.lo()(1), hy, n, j, ty);
  const Basis bx = basis(tx, hx), by = basis(ty, hy);
  const double ax[2] = {bx.a, bx.b}, cx[2] = {bx.c, bx.d};
  const double dax[2] = {bx.da, bx.db}, dcx[2] = {bx.dc, bx.dd};
  const double ay[2] = {by.a, by.b}, cy[2] = {by.c, by.d};
  const double day[2] = {by.da, by.db}, dcy[2] = {by.dc, by.dd};
  v = 0.0;
  double gx = 0.0, gy = 0.0;
  for (int p = 0; p < 2; ++p)
    for (int q = 0; q < 2; ++q) {
      const long k = grid_.flat(i + p, j + q);
      const double F = f_[k], MX = mx_[k], MY = my_[k], MXY = mxy_[k];
      v += ax[p] * ay[q] * F + cx[p] * ay[q] * MX + ax[p] * cy[q] * MY + cx[p] * cy[q] * MXY;
      gx += dax[p] * ay[q] * F + dcx[p] * ay[q] * MX + dax[p] * cy[q] * MY + dcx[p] * cy[q] * MXY;
      gy += ax[p] * day[q] * F + cx[p] * day[q] * MX + ax[p] * dcy[q] * MY + cx[p] * dcy[q] * MXY;
    }
  g.resize(2);
  g << gx, gy;
}

ScalarSample Spline::evaluate(const Vec& y) const {
  if (y.size() != grid_.dim()) throw ValidationError("evaluation point dimension mismatch");
  const Vec c = y.cwiseMax(grid_.lo()).cwiseMin(grid_.hi());
  ScalarSample s;
  s.outside = (c.array() != y.array()).any();
  eval_inside(c, s.value, s.grad);
  if (s.outside) s.value += s.grad.dot(y - c);
  return s;
}

// ---------------------------------------------------------------------------

ValueField::ValueField(GridSpec grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)), spline_(grid_, values_) {}

ValueField sample_value_field(const GridSpec& grid, const std::function<double(const Vec&)>& f) {
  std::vector<double> v(grid.size());
  for (long i = 0; i < grid.size(); ++i) v[i] = f(grid.node(i));
  return ValueField(grid, std::move(v));
}

Vec value_gradient(const ValueField& field, const Vec& y) { return field.evaluate(y).grad; }

namespace {

std::vector<Spline> component_splines(const GridSpec& grid, const std::vector<Vec>& vectors) {
  if (static_cast<long>(vectors.size()) != grid.size()) throw ValidationError("field size does not match grid");
  const int d = static_cast<int>(vectors.front().size());
  std::vector<Spline> out;
  std::vector<double> comp(vectors.size());
  for (int k = 0; k < d; ++k) {
    for (std::size_t i = 0; i < vectors.size(); ++i) {
      if (vectors[i].size() != d) throw ValidationError("control vectors differ in size");
      comp[i] = vectors[i](k);
    }
    out.emplace_back(grid, comp);
  }
  return out;
}

}  // namespace

ControlField::ControlField(GridSpec grid, std::vector<Vec> vectors)
    : grid_(std::move(grid)), vectors_(std::move(vectors)), splines_(component_splines(grid_, vectors_)) {}

VectorSample ControlField::evaluate(const Vec& y) const {
  VectorSample out;
  const int d = components();
  out.value.resize(d);
  out.jacobian.resize(d, grid_.dim());
  out.outside = false;
  for (int k = 0; k < d; ++k) {
    const ScalarSample s = splines_[k].evaluate(y);
    out.value(k) = s.value;
    out.jacobian.row(k) = s.grad.transpose();
    out.outside = out.outside || s.outside;
  }
  return out;
}

Vec ControlField::value(const Vec& y, bool& outside) const {
  Vec v(components());
  outside = false;
  for (int k = 0; k < components(); ++k) {
    const ScalarSample s = splines_[k].evaluate(y);
    v(k) = s.value;
    outside = outside || s.outside;
  }
  return v;
}

ControlField sample_control_field(const GridSpec& grid, const std::function<Vec(const Vec&)>& f) {
  std::vector<Vec> v(grid.size());
  for (long i = 0; i < grid.size(); ++i) v[i] = f(grid.node(i));
  return ControlField(grid, std::move(v));
}

// ---------------------------------------------------------------------------

namespace {

template <class Pair>
void for_central_pairs(const GridSpec& g, Pair&& pair) {
  for (long idx = 0; idx < g.size(); ++idx) {
    if (!g.central(idx)) continue;
    for (int axis = 0; axis < g.dim(); ++axis) {
      const int i = g.axis_index(idx, axis);
      if (i + 1 >= g.n() || !g.central_axis(i + 1)) continue;
      const long nb = axis == 0 ? idx + 1 : idx + g.n();
      pair(idx, nb, g.spacing(axis));
    }
  }
}

}  // namespace

LipschitzEstimate lipschitz_probe(const ValueField& field) {
  const GridSpec& g = field.grid();
  std::vector<Vec> grads(g.size());
  for (long i = 0; i < g.size(); ++i)
    if (g.central(i)) grads[i] = field.evaluate(g.node(i)).grad;
  LipschitzEstimate e{0.0, 0.0};
  for_central_pairs(g, [&](long a, long b, double h) {
    e.L0_hat = std::max(e.L0_hat, std::abs(field.values()[b] - field.values()[a]) / h);
    e.L1_hat = std::max(e.L1_hat, (grads[b] - grads[a]).norm() / h);
  });
  return e;
}

LipschitzEstimate lipschitz_probe(const ControlField& field) {
  const GridSpec& g = field.grid();
  std::vector<Mat> jac(g.size());
  for (long i = 0; i < g.size(); ++i)
    if (g.central(i)) jac[i] = field.evaluate(g.node(i)).jacobian;
  LipschitzEstimate e{0.0, 0.0};
  for_central_pairs(g, [&](long a, long b, double h) {
    e.L0_hat = std::max(e.L0_hat, (field.at_node(b) - field.at_node(a)).norm() / h);
    e.L1_hat = std::max(e.L1_hat, spectral_norm(jac[b] - jac[a]) / h);
  });
  return e;
}

SteinResult stein_check(const std::function<Vec(const Vec&)>& grad_v, const Vec& z, double sigma,
                        int order) {
  if (order < 4) throw ValidationError("stein_check needs quadrature order >= 4");
  if (!(sigma > 0.0)) throw ValidationError("sigma must be positive");
  const int d = static_cast<int>(z.size());
  const TensorRule rule = tensor_rule(GaussHermite(order), d);
  auto smoothed = [&](const Vec& c) { return gauss_expectation(rule, grad_v, c, sigma); };

  // Eighth-order central difference: exact on polynomials through degree 8.
  static constexpr double coef[4] = {4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0};
  const double h = 0.05 * std::max(1.0, z.cwiseAbs().maxCoeff());
  SteinResult r;
  r.lhs = Mat::Zero(d, d);
  for (int j = 0; j < d; ++j) {
    Vec col = Vec::Zero(d);
    for (int k = 0; k < 4; ++k) {
      const Vec e = Vec::Unit(d, j) * ((k + 1) * h);
      col += coef[k] * (smoothed(z + e) - smoothed(z - e));
    }
    r.lhs.col(j) = col / h;
  }
  r.rhs = Mat::Zero(d, d);
  for (std::size_t i = 0; i < rule.points.size(); ++i) {
    const Vec& w = rule.points[i];
    r.rhs += rule.weights[i] * grad_v(Vec(z + sigma * w)) * w.transpose();
  }
  r.rhs /= sigma;
  r.abs_diff = (r.lhs - r.rhs).cwiseAbs().maxCoeff();
  return r;
}

SteinResult stein_check(const ValueField& field, const Vec& z, double sigma, int order) {
  return stein_check([&](const Vec& y) { return field.evaluate(y).grad; }, z, sigma, order);
}

void write_field_csv(std::ostream& os, const ValueField& field) {
  const GridSpec& g = field.grid();
  os << (g.dim() == 1 ? "y0" : "y0,y1") << ",value\n" << std::setprecision(17);
  for (long i = 0; i < g.size(); ++i) {
    const Vec y = g.node(i);
    for (int k = 0; k < g.dim(); ++k) os << y(k) << ',';
    os << field.values()[i] << '\n';
  }
}

void write_field_csv(std::ostream& os, const ControlField& field) {
  const GridSpec& g = field.grid();
  os << (g.dim() == 1 ? "y0" : "y0,y1");
  for (int k = 0; k < field.components(); ++k) os << ",u" << k;
  os << '\n' << std::setprecision(17);
  for (long i = 0; i < g.size(); ++i) {
    const Vec y = g.node(i);
    for (int k = 0; k < g.dim(); ++k) os << y(k) << ',';
    const Vec& u = field.at_node(i);
    for (int k = 0; k < u.size(); ++k) os << (k ? "," : "") << u(k);
    os << '\n';
  }
}

}  // namespace pift
