#include "pift/model.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

namespace pift {

namespace {

double spectral_norm(const Mat& m) {
  if (m.size() == 0) return 0.0;
  if (m.rows() == 1 && m.cols() == 1) return std::abs(m(0, 0));
  Eigen::JacobiSVD<Mat> svd(m);
  return svd.singularValues()(0);
}

void require_symmetric(const Mat& m, const char* what) {
  if (m.rows() != m.cols()) throw ValidationError(std::string(what) + " must be square");
  if (!m.allFinite()) throw ValidationError(std::string(what) + " has non-finite entries");
  const double tol = 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > tol)
    throw ValidationError(std::string(what) + " must be symmetric");
}

void require_spd(const Mat& m, const char* what) {
  require_symmetric(m, what);
  Eigen::SelfAdjointEigenSolver<Mat> es(m);
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw ValidationError(std::string(what) + " must be positive definite");
}

}  // namespace

double safe_mul(double a, double b) noexcept {
  if (a == 0.0 || b == 0.0) return 0.0;
  return a * b;
}

Schedule::Schedule(std::vector<double> alpha, std::vector<double> sigma)
    : alpha_(std::move(alpha)), sigma_(std::move(sigma)) {
  if (alpha_.empty()) throw ValidationError("schedule needs T >= 1");
  if (alpha_.size() != sigma_.size())
    throw ValidationError("schedule alpha and sigma lengths differ");
  for (std::size_t t = 0; t < alpha_.size(); ++t) {
    if (!(alpha_[t] > 0.0 && alpha_[t] < 1.0)) {
      std::ostringstream os;
      os << "alpha[" << t << "] = " << alpha_[t] << " outside (0,1)";
      throw ValidationError(os.str());
    }
    if (!(sigma_[t] > 0.0) || !std::isfinite(sigma_[t])) {
      std::ostringstream os;
      os << "sigma[" << t << "] = " << sigma_[t] << " must be positive";
      throw ValidationError(os.str());
    }
  }
}

int Schedule::check(int t) const {
  if (t < 0 || t >= steps()) {
    std::ostringstream os;
    os << "step index " << t << " outside [0, " << steps() << ")";
    throw std::out_of_range(os.str());
  }
  return t;
}

double Schedule::alpha_bar(int t) const {
  if (t < 0 || t > steps()) throw std::out_of_range("alpha_bar index out of range");
  double p = 1.0;
  for (int s = t; s < steps(); ++s) p *= alpha_[s];
  return p;
}

Schedule make_ddpm_schedule(int T, double alpha_min, double alpha_max) {
  if (T < 1) throw ValidationError("T must be >= 1");
  if (!(alpha_min > 0.0 && alpha_min < 1.0) || !(alpha_max > 0.0 && alpha_max < 1.0))
    throw ValidationError("alpha bounds must lie in (0,1)");
  if (alpha_min > alpha_max) throw ValidationError("alpha_min must not exceed alpha_max");
  std::vector<double> a(T), s(T);
  for (int t = 0; t < T; ++t) {
    const double frac = T == 1 ? 0.0 : static_cast<double>(t) / (T - 1);
    a[t] = alpha_min + (alpha_max - alpha_min) * frac;
    s[t] = std::sqrt(1.0 / a[t] - 1.0);
  }
  return Schedule(std::move(a), std::move(s));
}

// ---------------------------------------------------------------------------

PretrainedScore PretrainedScore::gaussian(const Schedule& schedule, const Vec& mean,
                                          const Mat& cov) {
  if (mean.size() < 1) throw ValidationError("score mean must be nonempty");
  if (cov.rows() != mean.size()) throw ValidationError("score cov dimension mismatch");
  require_spd(cov, "score cov");
  PretrainedScore s;
  s.kind_ = Kind::gaussian;
  s.dim_ = static_cast<int>(mean.size());
  s.weights_ = {1.0};
  s.means_ = {mean};
  s.covs_ = {cov};
  s.build(schedule);
  return s;
}

PretrainedScore PretrainedScore::mixture(const Schedule& schedule, std::vector<double> weights,
                                         std::vector<Vec> means, std::vector<Mat> covs) {
  if (weights.empty()) throw ValidationError("mixture needs at least one component");
  if (weights.size() != means.size() || weights.size() != covs.size())
    throw ValidationError("mixture weights/means/covs lengths differ");
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw ValidationError("mixture weights must be positive");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError("mixture weights must sum to 1");
  const auto d = means.front().size();
  for (std::size_t k = 0; k < means.size(); ++k) {
    if (means[k].size() != d || covs[k].rows() != d)
      throw ValidationError("mixture component dimensions differ");
    require_spd(covs[k], "mixture cov");
  }
  PretrainedScore s;
  s.kind_ = Kind::mixture;
  s.dim_ = static_cast<int>(d);
  s.weights_ = std::move(weights);
  s.means_ = std::move(means);
  s.covs_ = std::move(covs);
  s.build(schedule);
  return s;
}

void PretrainedScore::build(const Schedule& schedule) {
  const int T = schedule.steps();
  const int d = dim_;
  const Mat I = Mat::Identity(d, d);
  steps_.assign(T, {});
  L0s_.assign(T, 0.0);
  L1s_.assign(T, 0.0);
  for (int t = 0; t < T; ++t) {
    const double ab = schedule.alpha_bar(t);
    Step& st = steps_[t];
    for (std::size_t k = 0; k < weights_.size(); ++k) {
      const Mat C = ab * covs_[k] + (1.0 - ab) * I;
      Eigen::LLT<Mat> llt(C);
      Component c;
      c.log_weight = std::log(weights_[k]);
      c.mean = std::sqrt(ab) * means_[k];
      c.precision = llt.solve(I);
      c.precision = 0.5 * (c.precision + c.precision.transpose());
      const Mat L = llt.matrixL();
      double logdet = 0.0;
      for (int i = 0; i < d; ++i) logdet += 2.0 * std::log(L(i, i));
      c.log_norm = -0.5 * logdet - 0.5 * d * std::log(2.0 * std::numbers::pi);
      st.comps.push_back(std::move(c));
    }
    if (kind_ == Kind::gaussian) {
      st.G = -st.comps[0].precision;
      st.g = st.comps[0].precision * st.comps[0].mean;
      L0s_[t] = spectral_norm(st.G);
      L1s_[t] = 0.0;
    }
  }
  if (kind_ == Kind::mixture) probe_constants(schedule);
}

Vec PretrainedScore::eval(int t, const Vec& y) const {
  const Step& st = steps_.at(t);
  if (y.size() != dim_) throw ValidationError("score input dimension mismatch");
  if (kind_ == Kind::gaussian) return st.G * y + st.g;
  const std::size_t K = st.comps.size();
  std::vector<double> logp(K);
  std::vector<Vec> sk(K);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < K; ++k) {
    const auto& c = st.comps[k];
    const Vec r = y - c.mean;
    sk[k] = -(c.precision * r);
    logp[k] = c.log_weight + c.log_norm - 0.5 * r.dot(c.precision * r);
    mx = std::max(mx, logp[k]);
  }
  double z = 0.0;
  for (auto& l : logp) z += (l = std::exp(l - mx));
  Vec s = Vec::Zero(dim_);
  for (std::size_t k = 0; k < K; ++k) s += (logp[k] / z) * sk[k];
  return s;
}

Mat PretrainedScore::jacobian(int t, const Vec& y) const {
  const Step& st = steps_.at(t);
  if (y.size() != dim_) throw ValidationError("score input dimension mismatch");
  if (kind_ == Kind::gaussian) return st.G;
  const std::size_t K = st.comps.size();
  std::vector<double> logp(K);
  std::vector<Vec> sk(K);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < K; ++k) {
    const auto& c = st.comps[k];
    const Vec r = y - c.mean;
    sk[k] = -(c.precision * r);
    logp[k] = c.log_weight + c.log_norm - 0.5 * r.dot(c.precision * r);
    mx = std::max(mx, logp[k]);
  }
  double z = 0.0;
  for (auto& l : logp) z += (l = std::exp(l - mx));
  Vec s = Vec::Zero(dim_);
  Mat J = Mat::Zero(dim_, dim_);
  for (std::size_t k = 0; k < K; ++k) {
    const double p = logp[k] / z;
    s += p * sk[k];
    J += p * (sk[k] * sk[k].transpose() - st.comps[k].precision);
  }
  J -= s * s.transpose();
  return J;
}

const Mat& PretrainedScore::affine_matrix(int t) const {
  if (kind_ != Kind::gaussian) throw ValidationError("mixture score is not affine");
  return steps_.at(t).G;
}

const Vec& PretrainedScore::affine_offset(int t) const {
  if (kind_ != Kind::gaussian) throw ValidationError("mixture score is not affine");
  return steps_.at(t).g;
}

void PretrainedScore::probe_constants(const Schedule& schedule) {
  const int T = schedule.steps();
  const int d = dim_;
  for (int t = 0; t < T; ++t) {
    const double ab = schedule.alpha_bar(t);
    Vec m = Vec::Zero(d);
    Vec second = Vec::Zero(d);
    for (std::size_t k = 0; k < weights_.size(); ++k) {
      const Vec mk = std::sqrt(ab) * means_[k];
      const Vec vk = (ab * covs_[k]).diagonal().array() + (1.0 - ab);
      m += weights_[k] * mk;
      second += weights_[k] * (vk.array() + mk.array().square()).matrix();
    }
    const Vec sd = (second.array() - m.array().square()).max(0.0).sqrt();
    const Vec lo = m - 6.0 * sd;
    const Vec hi = m + 6.0 * sd;

    double l0 = 0.0, l1 = 0.0;
    auto pair = [&](const Vec& a, const Vec& b) {
      const Mat Ja = jacobian(t, a);
      const Mat Jb = jacobian(t, b);
      l0 = std::max({l0, spectral_norm(Ja), spectral_norm(Jb)});
      l1 = std::max(l1, spectral_norm(Ja - Jb) / (a - b).norm());
    };
    if (d <= 2) {
      const int n = d == 1 ? 2001 : 161;
      const Vec h = (hi - lo) / (n - 1);
      if (d == 1) {
        for (int i = 0; i + 1 < n; ++i) {
          Vec a(1), b(1);
          a(0) = lo(0) + i * h(0);
          b(0) = lo(0) + (i + 1) * h(0);
          pair(a, b);
        }
      } else {
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            Vec a(2);
            a << lo(0) + i * h(0), lo(1) + j * h(1);
            if (i + 1 < n) pair(a, a + Vec::Unit(2, 0) * h(0));
            if (j + 1 < n) pair(a, a + Vec::Unit(2, 1) * h(1));
          }
      }
    } else {
      std::mt19937_64 gen(0x9e3779b97f4a7c15ULL + static_cast<unsigned>(t));
      auto unif = [&] { return (static_cast<double>(gen() >> 11) + 0.5) * 0x1.0p-53; };
      const double step = 1e-3;
      for (int i = 0; i < 20000; ++i) {
        Vec a(d), dir(d);
        for (int k = 0; k < d; ++k) {
          a(k) = lo(k) + (hi(k) - lo(k)) * unif();
          dir(k) = unif() - 0.5;
        }
        pair(a, a + step * sd.cwiseMax(1e-12).cwiseProduct(dir.normalized()));
      }
    }
    L0s_[t] = 1.05 * l0;
    L1s_[t] = 1.05 * l1;
  }
}

// ---------------------------------------------------------------------------

RewardModel RewardModel::quadratic(const Mat& A, const Vec& b, double c) {
  if (b.size() < 1) throw ValidationError("reward b must be nonempty");
  if (A.rows() != b.size()) throw ValidationError("reward A/b dimension mismatch");
  require_symmetric(A, "reward A");
  if (!b.allFinite() || !std::isfinite(c)) throw ValidationError("reward has non-finite entries");
  RewardModel r;
  r.kind_ = Kind::quadratic;
  r.A_ = A;
  r.center_ = b;
  r.c_ = c;
  const double sA = spectral_norm(A);
  r.L1r_ = 2.0 * sA;
  r.L0r_ = sA == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return r;
}

RewardModel RewardModel::pseudo_huber(const Vec& center, double scale, double gain) {
  if (center.size() < 1) throw ValidationError("reward center must be nonempty");
  if (!(scale > 0.0) || !std::isfinite(scale)) throw ValidationError("pseudo_huber scale must be positive");
  if (!std::isfinite(gain) || !center.allFinite()) throw ValidationError("pseudo_huber has non-finite entries");
  RewardModel r;
  r.kind_ = Kind::pseudo_huber;
  r.center_ = center;
  r.scale_ = scale;
  r.gain_ = gain;
  r.L0r_ = std::abs(gain);
  r.L1r_ = std::abs(gain) / scale;
  return r;
}

bool RewardModel::l0_bounded() const noexcept { return std::isfinite(L0r_); }

double RewardModel::eval(const Vec& y) const {
  const Vec r = y - center_;
  if (kind_ == Kind::quadratic) return -r.dot(A_ * r) + c_;
  return gain_ * (scale_ - std::sqrt(scale_ * scale_ + r.squaredNorm()));
}

Vec RewardModel::grad(const Vec& y) const {
  const Vec r = y - center_;
  if (kind_ == Kind::quadratic) return -2.0 * (A_ * r);
  return (-gain_ / std::sqrt(scale_ * scale_ + r.squaredNorm())) * r;
}

double RewardModel::sup_grad_norm_on_box(const Vec& lo, const Vec& hi) const {
  if (kind_ == Kind::pseudo_huber) return L0r_;
  const int d = dim();
  if (d > 20) throw ValidationError("box vertex enumeration limited to d <= 20");
  double best = 0.0;
  for (unsigned long mask = 0; mask < (1UL << d); ++mask) {
    Vec v(d);
    for (int i = 0; i < d; ++i) v(i) = (mask >> i) & 1UL ? hi(i) : lo(i);
    best = std::max(best, grad(v).norm());
  }
  return best;
}

// ---------------------------------------------------------------------------

ProblemSpec::ProblemSpec(Schedule schedule, PretrainedScore score, RewardModel reward,
                         std::vector<double> beta)
    : schedule_(std::move(schedule)), score_(std::move(score)), reward_(std::move(reward)) {
  if (score_.dim() != reward_.dim()) throw ValidationError("score and reward dimensions differ");
  if (score_.steps() != schedule_.steps())
    throw ValidationError("score was built for a different schedule length");
  if (!beta.empty()) *this = with_beta(std::move(beta));
}

double ProblemSpec::beta(int t) const {
  if (beta_.empty()) throw ValidationError("beta has not been set");
  return beta_.at(schedule_.check(t));
}

ProblemSpec ProblemSpec::with_beta(std::vector<double> beta) const {
  if (beta.size() == 1 && steps() > 1) beta.assign(steps(), beta.front());
  if (static_cast<int>(beta.size()) != steps()) throw ValidationError("beta length must equal T");
  for (double b : beta)
    if (!(b > 0.0) || !std::isfinite(b)) throw ValidationError("beta entries must be positive and finite");
  ProblemSpec out = *this;
  out.beta_ = std::move(beta);
  return out;
}

ProblemSpec ProblemSpec::with_l0r_domain(double value) const {
  if (!(value >= 0.0) || !std::isfinite(value)) throw ValidationError("l0 domain bound must be finite");
  ProblemSpec out = *this;
  out.l0r_domain_ = value;
  return out;
}

double ProblemSpec::effective_L0r() const noexcept {
  if (reward_.l0_bounded()) return reward_.L0r();
  if (l0r_domain_) return *l0r_domain_;
  return std::numeric_limits<double>::infinity();
}

Vec score_eval(const ProblemSpec& spec, int t, const Vec& y) {
  return spec.score().eval(spec.schedule().check(t), y);
}

Vec step_mean(const Schedule& schedule, int t, const Vec& y, const Vec& u) {
  const double a = schedule.alpha(t);
  return (y + (1.0 - a) * u) / std::sqrt(a);
}

Vec step_dynamics(const Schedule& schedule, int t, const Vec& y, const Vec& u, const Vec& w) {
  return step_mean(schedule, t, y, u) + schedule.sigma(t) * w;
}

double kl_coefficient(const Schedule& schedule, int t) {
  const double a = schedule.alpha(t);
  const double s = schedule.sigma(t);
  return (1.0 - a) * (1.0 - a) / (2.0 * a * s * s);
}

double kl_onestep(const Schedule& schedule, int t, const Vec& u, const Vec& s) {
  return kl_coefficient(schedule, t) * (u - s).squaredNorm();
}

std::vector<Marginal> affine_reference_marginals(const ProblemSpec& spec) {
  const auto& sc = spec.schedule();
  const int T = sc.steps();
  const int d = spec.dim();
  const Mat I = Mat::Identity(d, d);
  std::vector<Marginal> out(T + 1);
  out[0] = {Vec::Zero(d), I};
  for (int t = 0; t < T; ++t) {
    const double a = sc.alpha(t);
    const double s = sc.sigma(t);
    const Mat F = (I + (1.0 - a) * spec.score().affine_matrix(t)) / std::sqrt(a);
    const Vec f = (1.0 - a) * spec.score().affine_offset(t) / std::sqrt(a);
    out[t + 1].mean = F * out[t].mean + f;
    out[t + 1].cov = F * out[t].cov * F.transpose() + s * s * I;
  }
  return out;
}

}  // namespace pift
