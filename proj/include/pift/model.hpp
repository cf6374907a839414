#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pift/errors.hpp"

namespace pift {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

class Schedule {
 public:
  Schedule(std::vector<double> alpha, std::vector<double> sigma);

  int steps() const noexcept { return static_cast<int>(alpha_.size()); }
  double alpha(int t) const { return alpha_.at(check(t)); }
  double sigma(int t) const { return sigma_.at(check(t)); }
  std::span<const double> alphas() const noexcept { return alpha_; }
  std::span<const double> sigmas() const noexcept { return sigma_; }

  // Reverse step t sits at forward noising level T - t; the data end is t = T.
  // Returns prod_{s=t}^{T-1} alpha_s, so t = T gives 1 and t = 0 the noisiest level.
  double alpha_bar(int t) const;

  int check(int t) const;

 private:
  std::vector<double> alpha_;
  std::vector<double> sigma_;
};

Schedule make_ddpm_schedule(int T, double alpha_min, double alpha_max);

// Score of a forward-noised Gaussian or Gaussian mixture, bound to a schedule.
class PretrainedScore {
 public:
  static PretrainedScore gaussian(const Schedule& schedule, const Vec& mean, const Mat& cov);
  static PretrainedScore mixture(const Schedule& schedule, std::vector<double> weights,
                                 std::vector<Vec> means, std::vector<Mat> covs);

  int dim() const noexcept { return dim_; }
  int steps() const noexcept { return static_cast<int>(steps_.size()); }
  bool is_affine() const noexcept { return kind_ == Kind::gaussian; }
  std::string kind() const { return kind_ == Kind::gaussian ? "gaussian" : "mixture"; }

  Vec eval(int t, const Vec& y) const;
  Mat jacobian(int t, const Vec& y) const;

  // s_t(y) = G_t y + g_t; gaussian variant only.
  const Mat& affine_matrix(int t) const;
  const Vec& affine_offset(int t) const;

  double L0s(int t) const { return L0s_.at(t); }
  double L1s(int t) const { return L1s_.at(t); }
  std::span<const double> L0s() const noexcept { return L0s_; }
  std::span<const double> L1s() const noexcept { return L1s_; }

  // Moments of the data distribution the score was built from.
  const std::vector<double>& weights() const noexcept { return weights_; }
  const std::vector<Vec>& means() const noexcept { return means_; }
  const std::vector<Mat>& covs() const noexcept { return covs_; }

 private:
  enum class Kind { gaussian, mixture };
  struct Component {
    double log_weight;
    Vec mean;
    Mat precision;
    double log_norm;
  };
  struct Step {
    std::vector<Component> comps;
    Mat G;
    Vec g;
  };

  PretrainedScore() = default;
  void build(const Schedule& schedule);
  void probe_constants(const Schedule& schedule);

  Kind kind_ = Kind::gaussian;
  int dim_ = 0;
  std::vector<double> weights_;
  std::vector<Vec> means_;
  std::vector<Mat> covs_;
  std::vector<Step> steps_;
  std::vector<double> L0s_;
  std::vector<double> L1s_;
};

class RewardModel {
 public:
  // r(y) = -(y - b)^T A (y - b) + c
  static RewardModel quadratic(const Mat& A, const Vec& b, double c);
  // r(y) = gain * (scale - sqrt(scale^2 + |y - center|^2))
  static RewardModel pseudo_huber(const Vec& center, double scale, double gain);

  int dim() const noexcept { return static_cast<int>(center_.size()); }
  bool is_quadratic() const noexcept { return kind_ == Kind::quadratic; }
  std::string kind() const { return kind_ == Kind::quadratic ? "quadratic" : "pseudo_huber"; }

  double eval(const Vec& y) const;
  Vec grad(const Vec& y) const;

  // +inf when unbounded.
  double L0r() const noexcept { return L0r_; }
  double L1r() const noexcept { return L1r_; }
  bool l0_bounded() const noexcept;

  // sup of |grad r| over the box [lo, hi]; attained at a vertex for the quadratic.
  double sup_grad_norm_on_box(const Vec& lo, const Vec& hi) const;

  const Mat& A() const noexcept { return A_; }
  const Vec& b() const noexcept { return center_; }
  double c() const noexcept { return c_; }
  const Vec& center() const noexcept { return center_; }
  double scale() const noexcept { return scale_; }
  double gain() const noexcept { return gain_; }

 private:
  enum class Kind { quadratic, pseudo_huber };
  RewardModel() = default;
  Kind kind_ = Kind::quadratic;
  Mat A_;
  Vec center_;
  double c_ = 0.0;
  double scale_ = 1.0;
  double gain_ = 0.0;
  double L0r_ = 0.0;
  double L1r_ = 0.0;
};

class ProblemSpec {
 public:
  ProblemSpec(Schedule schedule, PretrainedScore score, RewardModel reward,
              std::vector<double> beta = {});

  const Schedule& schedule() const noexcept { return schedule_; }
  const PretrainedScore& score() const noexcept { return score_; }
  const RewardModel& reward() const noexcept { return reward_; }
  int dim() const noexcept { return score_.dim(); }
  int steps() const noexcept { return schedule_.steps(); }

  bool has_beta() const noexcept { return !beta_.empty(); }
  double beta(int t) const;
  std::span<const double> betas() const noexcept { return beta_; }
  ProblemSpec with_beta(std::vector<double> beta) const;

  // Override for the reward's L0 restricted to the working domain; used when L0r is unbounded.
  std::optional<double> l0r_domain() const noexcept { return l0r_domain_; }
  ProblemSpec with_l0r_domain(double value) const;
  // L0r used by the ledger: analytic, else the domain override, else +inf.
  double effective_L0r() const noexcept;

 private:
  Schedule schedule_;
  PretrainedScore score_;
  RewardModel reward_;
  std::vector<double> beta_;
  std::optional<double> l0r_domain_;
};

Vec score_eval(const ProblemSpec& spec, int t, const Vec& y);

Vec step_dynamics(const Schedule& schedule, int t, const Vec& y, const Vec& u, const Vec& w);
// Deterministic part of step_dynamics.
Vec step_mean(const Schedule& schedule, int t, const Vec& y, const Vec& u);

double kl_coefficient(const Schedule& schedule, int t);
double kl_onestep(const Schedule& schedule, int t, const Vec& u, const Vec& s);

// Exact mean/covariance of Y_t under the pretrained dynamics of an affine score, Y_0 ~ N(0, I).
struct Marginal {
  Vec mean;
  Mat cov;
};
std::vector<Marginal> affine_reference_marginals(const ProblemSpec& spec);

// 0 * inf = 0 arithmetic for ledger products.
double safe_mul(double a, double b) noexcept;

}  // namespace pift
