#include "pift/sampler.hpp"

#include <cmath>
#include <iomanip>
#include <memory>
#include <ostream>
#include <sstream>

#include "pift/parallel.hpp"

namespace pift {

Policy pretrained_policy(const ProblemSpec& spec) {
  return {"pretrained", [&score = spec.score()](int t, const Vec& y, bool& outside) {
            outside = false;
            return score.eval(t, y);
          }};
}

Policy field_policy(std::vector<ControlField> controls) {
  auto shared = std::make_shared<const std::vector<ControlField>>(std::move(controls));
  return {"field", [shared](int t, const Vec& y, bool& outside) { return shared->at(t).value(y, outside); }};
}

Policy oracle_policy(LqgSolution sol) {
  auto shared = std::make_shared<const LqgSolution>(std::move(sol));
  return {"oracle", [shared](int t, const Vec& y, bool& outside) {
            outside = false;
            return oracle_control(*shared, t, y);
          }};
}

Policy offset_policy(const ProblemSpec& spec, Vec delta) {
  return {"offset", [&score = spec.score(), delta = std::move(delta)](int t, const Vec& y, bool& outside) {
            outside = false;
            return Vec(score.eval(t, y) + delta);
          }};
}

Simulation simulate(const ProblemSpec& spec, const Policy& policy, long n_paths, std::uint64_t seed) {
  if (n_paths < 1) throw ValidationError("n_paths must be >= 1");
  const auto& sc = spec.schedule();
  const int T = sc.steps();
  const int d = spec.dim();
  const NoiseStream noise(seed);
  Simulation sim;
  sim.seed = seed;
  sim.policy_kind = policy.kind;
  sim.paths.resize(n_paths);
  std::vector<long> events(n_paths, 0);
  parallel_for(static_cast<std::size_t>(n_paths), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      Trajectory& tr = sim.paths[i];
      tr.seed = seed;
      tr.path = i;
      tr.states.resize(T + 1);
      tr.controls_applied.resize(T);
      tr.states[0] = noise.normals(i, 0, d);
      for (int t = 0; t < T; ++t) {
        bool outside = false;
        tr.controls_applied[t] = policy.control(t, tr.states[t], outside);
        if (outside) ++events[i];
        tr.states[t + 1] = step_dynamics(sc, t, tr.states[t], tr.controls_applied[t],
                                         noise.normals(i, static_cast<std::uint32_t>(t + 1), d));
        if (!tr.states[t + 1].allFinite()) {
          std::ostringstream os;
          os << "non-finite state on path " << i << " at step " << t;
          throw NumericAbort(os.str(), t, static_cast<long>(i));
        }
      }
    }
  });
  for (long e : events) sim.boundary_events += e;
  return sim;
}

Vec trajectory_noise(const Trajectory& traj, int t, int d) {
  return NoiseStream(traj.seed).normals(traj.path, static_cast<std::uint32_t>(t + 1), d);
}

Estimate mean_and_se(const std::vector<double>& x) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  Estimate e;
  e.mean = pairwise_sum(x.data(), n) / static_cast<double>(n);
  if (n < 2) return e;
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) sq[i] = (x[i] - e.mean) * (x[i] - e.mean);
  const double var = pairwise_sum(sq.data(), n) / static_cast<double>(n - 1);
  e.std_error = std::sqrt(var / static_cast<double>(n));
  return e;
}

PathStatistics path_statistics(const Simulation& sim, const ProblemSpec& spec) {
  const auto& sc = spec.schedule();
  const int T = sc.steps();
  const std::size_t n = sim.paths.size();
  PathStatistics ps;
  ps.reward.resize(n);
  ps.kl_sum.resize(n);
  ps.objective.resize(n);
  ps.kl_step.assign(T, std::vector<double>(n));
  parallel_for(n, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const Trajectory& tr = sim.paths[i];
      double kls = 0.0, weighted = 0.0;
      for (int t = 0; t < T; ++t) {
        const double kl = kl_onestep(sc, t, tr.controls_applied[t], spec.score().eval(t, tr.states[t]));
        ps.kl_step[t][i] = kl;
        kls += kl;
        weighted += spec.beta(t) * kl;
      }
      ps.reward[i] = spec.reward().eval(tr.states[T]);
      ps.kl_sum[i] = kls;
      ps.objective[i] = ps.reward[i] - weighted;
    }
  });
  return ps;
}

ObjectiveEstimate estimate_objective(const Simulation& sim, const ProblemSpec& spec) {
  const PathStatistics ps = path_statistics(sim, spec);
  ObjectiveEstimate e;
  e.reward = mean_and_se(ps.reward);
  e.kl_sum = mean_and_se(ps.kl_sum);
  e.objective = mean_and_se(ps.objective);
  for (const auto& k : ps.kl_step) e.mean_kl_step.push_back(mean_and_se(k).mean);
  e.n_paths = static_cast<long>(sim.paths.size());
  e.seed = sim.seed;
  return e;
}

Estimate path_kl(const Simulation& sim, const ProblemSpec& spec) {
  const auto& sc = spec.schedule();
  const int T = sc.steps();
  std::vector<double> v(sim.paths.size());
  parallel_for(v.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const Trajectory& tr = sim.paths[i];
      double s = 0.0;
      for (int t = 0; t < T; ++t)
        s += kl_onestep(sc, t, tr.controls_applied[t], spec.score().eval(t, tr.states[t]));
      v[i] = s;
    }
  });
  return mean_and_se(v);
}

Estimate path_log_ratio(const Simulation& sim, const ProblemSpec& spec) {
  const auto& sc = spec.schedule();
  const int T = sc.steps();
  std::vector<double> v(sim.paths.size());
  parallel_for(v.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const Trajectory& tr = sim.paths[i];
      double s = 0.0;
      for (int t = 0; t < T; ++t) {
        const double s2 = sc.sigma(t) * sc.sigma(t);
        const Vec& next = tr.states[t + 1];
        const Vec mu = step_mean(sc, t, tr.states[t], tr.controls_applied[t]);
        const Vec mu_pre = step_mean(sc, t, tr.states[t], spec.score().eval(t, tr.states[t]));
        s += ((next - mu_pre).squaredNorm() - (next - mu).squaredNorm()) / (2.0 * s2);
      }
      v[i] = s;
    }
  });
  return mean_and_se(v);
}

std::vector<MarginalSummary> mc_reference_marginals(const ProblemSpec& spec, long n_paths,
                                                    std::uint64_t seed) {
  const Simulation sim = simulate(spec, pretrained_policy(spec), n_paths, seed);
  const int T = spec.steps();
  const int d = spec.dim();
  std::vector<MarginalSummary> out(T + 1);
  std::vector<double> col(sim.paths.size());
  for (int t = 0; t <= T; ++t) {
    out[t].mean.resize(d);
    out[t].sd.resize(d);
    for (int k = 0; k < d; ++k) {
      for (std::size_t i = 0; i < col.size(); ++i) col[i] = sim.paths[i].states[t](k);
      const Estimate e = mean_and_se(col);
      out[t].mean(k) = e.mean;
      out[t].sd(k) = e.std_error * std::sqrt(static_cast<double>(col.size()));
    }
  }
  return out;
}

void write_objective_csv_header(std::ostream& os) {
  os << "label,beta,n_paths,seed,mean_reward,se_reward,mean_kl_sum,se_kl_sum,objective,se_objective\n";
}

void write_objective_csv_row(std::ostream& os, const std::string& label, double beta,
                             const ObjectiveEstimate& e) {
  os << std::setprecision(17) << label << ',' << beta << ',' << e.n_paths << ',' << e.seed << ','
     << e.reward.mean << ',' << e.reward.std_error << ',' << e.kl_sum.mean << ',' << e.kl_sum.std_error
     << ',' << e.objective.mean << ',' << e.objective.std_error << '\n';
}

}  // namespace pift
