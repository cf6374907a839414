#include "pift/pipelines.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "pift/lqg.hpp"
#include "pift/parametric.hpp"
#include "pift/sampler.hpp"
#include "pift/svg.hpp"

#ifndef PIFT_VERSION
#define PIFT_VERSION "unknown"
#endif

namespace fs = std::filesystem;

namespace pift {

std::string tool_version() { return PIFT_VERSION; }

namespace {

std::string yaml_double(double x) {
  if (std::isnan(x)) return ".nan";
  if (std::isinf(x)) return x > 0 ? ".inf" : "-.inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << std::setprecision(17);
  return f;
}

bool is_lqg(const ProblemSpec& spec) { return spec.score().is_affine() && spec.reward().is_quadratic(); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

PiftConfig solver_config(const RunConfig& cfg, const PreparedProblem& prep) {
  PiftConfig p = cfg.pift;
  p.lambda = cfg.lambda;
  p.grids = prep.grids;
  p.beta_overridden = prep.beta_overridden;
  return p;
}

std::string step_name(const char* stem, int t, int T) {
  const int width = static_cast<int>(std::to_string(T).size());
  std::ostringstream os;
  os << stem << "_t" << std::setw(width) << std::setfill('0') << t << ".csv";
  return os.str();
}

void write_fields(const fs::path& dir, const PiftSolution& sol) {
  fs::create_directories(dir);
  const int T = static_cast<int>(sol.controls.size());
  for (int t = 0; t <= T; ++t) {
    auto f = open_out(dir / step_name("value", t, T));
    write_field_csv(f, sol.values[t]);
    if (t < T) {
      auto g = open_out(dir / step_name("control", t, T));
      write_field_csv(g, sol.controls[t]);
    }
  }
}

void plot_residuals(const fs::path& path, const PiftSolution& sol) {
  SvgPlot plot{"inner residual sup|u(m) - u(m-1)|", "m", "residual", true, {}};
  const int T = static_cast<int>(sol.controls.size());
  for (int t = 0; t < T; ++t) {
    SvgSeries s{"t=" + std::to_string(t), {}, {}};
    for (const auto& r : sol.diagnostics.inner)
      if (r.t == t) {
        s.x.push_back(r.m);
        s.y.push_back(r.residual);
      }
    plot.series.push_back(std::move(s));
  }
  write_svg(path.string(), plot);
}

void plot_ledger(const fs::path& path, const LipschitzLedger& L) {
  SvgPlot plot{"Lipschitz ledger", "t", "constant", true, {}};
  auto series = [&](const char* name, const std::vector<double>& v) {
    SvgSeries s{name, {}, {}};
    for (std::size_t t = 0; t < v.size(); ++t) {
      s.x.push_back(static_cast<double>(t));
      s.y.push_back(v[t]);
    }
    plot.series.push_back(std::move(s));
  };
  series("L0V*", L.L0Vstar);
  series("L1V*", L.L1Vstar);
  series("L0Vbar", L.L0Vbar);
  series("L1Vbar", L.L1Vbar);
  series("beta", L.beta);
  write_svg(path.string(), plot);
}

void write_objectives(const fs::path& path, const ProblemSpec& spec, const RunConfig& cfg,
                      const std::vector<std::pair<std::string, Policy>>& policies) {
  auto f = open_out(path);
  write_objective_csv_header(f);
  for (const auto& [label, pol] : policies) {
    const Simulation sim = simulate(spec, pol, cfg.sampler.n_paths, cfg.sampler.seed);
    write_objective_csv_row(f, label, spec.beta(0), estimate_objective(sim, spec));
  }
}

void log_checks(std::ostream& log, const std::vector<CheckResult>& checks) {
  for (const auto& c : checks)
    log << (c.passed ? "  pass  " : "  FAIL  ") << c.name << "  measured=" << c.measured
        << " threshold=" << c.threshold << (c.detail.empty() ? "" : "  (" + c.detail + ")") << '\n';
}

}  // namespace

PreparedProblem prepare_problem(const RunConfig& cfg) {
  ProblemSpec spec = cfg.problem;
  std::vector<GridSpec> grids = default_step_grids(spec, cfg.pift.grid_points);
  if (!spec.reward().l0_bounded()) {
    if (cfg.l0_domain.kind == L0DomainSetting::Kind::value) {
      spec = spec.with_l0r_domain(cfg.l0_domain.value);
    } else if (cfg.l0_domain.kind == L0DomainSetting::Kind::automatic) {
      double sup = 0.0;
      for (const auto& g : grids) sup = std::max(sup, spec.reward().sup_grad_norm_on_box(g.lo(), g.hi()));
      spec = spec.with_l0r_domain(sup);
    }
  }
  LipschitzLedger ledger = bar_ledger(spec, cfg.lambda);
  bool overridden = false;
  if (cfg.beta.kind == BetaSetting::Kind::automatic) {
    const auto beta = select_beta(ledger, spec, cfg.lambda, cfg.beta_margin);
    spec = spec.with_beta(beta);
  } else {
    spec = spec.with_beta(cfg.beta.values);
    ledger.beta.assign(spec.betas().begin(), spec.betas().end());
    overridden = true;
  }
  return {std::move(spec), std::move(ledger), std::move(grids), overridden};
}

std::string manifest_text(const RunConfig& cfg, Pipeline pipeline, const PreparedProblem& prep) {
  std::ostringstream os;
  os << dump_config(cfg);
  os << "provenance:\n";
  os << "  tool_version: \"" << tool_version() << "\"\n";
  os << "  pipeline: " << pipeline_name(pipeline) << '\n';
  os << "  source: \"" << cfg.source << "\"\n";
  os << "  seed: " << cfg.sampler.seed << '\n';
  os << "  beta_overridden: " << (prep.beta_overridden ? "true" : "false") << '\n';
  os << "  beta_resolved: [";
  for (int t = 0; t < prep.spec.steps(); ++t) os << (t ? ", " : "") << yaml_double(prep.spec.beta(t));
  os << "]\n";
  os << "  l0r_source: " << prep.ledger.l0r_source << '\n';
  os << "  l0r_value: " << yaml_double(prep.ledger.L0r) << '\n';
  return os.str();
}

std::vector<CheckResult> verify_suite(const RunConfig& cfg, const PreparedProblem& prep, const PiftSolution& sol) {
  const ProblemSpec& spec = prep.spec;
  const LipschitzLedger& L = prep.ledger;
  const long n_paths = std::min<long>(cfg.sampler.n_paths, 100000);
  std::vector<CheckResult> out;
  auto add = [&](std::vector<CheckResult> v) { out.insert(out.end(), v.begin(), v.end()); };

  add(check_ledger_invariants(spec, L));
  add(check_stein(50, 8, cfg.sampler.seed ^ 0x5731ULL));
  add(check_kl_closed_form(20, 100000, cfg.sampler.seed ^ 0x4b4cULL));
  add(check_path_kl(spec, field_policy(sol.controls), n_paths, cfg.sampler.seed));

  const bool lqg = is_lqg(spec);
  add(check_contraction(spec, L, sol, lqg));
  if (!sol.control_iterates.empty() && L.l0r_source == "analytic") add(check_regularity(spec, L, sol, 1.05));
  if (lqg) {
    const LqgSolution oracle = solve_lqg(spec);
    add(check_oracle_equivalence(sol, oracle, 1e-3));
    add(check_oracle_consistency(spec, oracle, prep.grids, cfg.pift.quad_order ? cfg.pift.quad_order
                                                                               : default_quad_order(spec.dim())));
    add(check_product_formula(spec, oracle, 100, 32, cfg.sampler.seed ^ 0x9f0dULL));
    add(check_oracle_optimality(spec, oracle, n_paths, cfg.sampler.seed));
    for (int m : {1, 5, 20}) {
      PiftConfig pc = solver_config(cfg, prep);
      pc.inner_iters = {m};
      pc.tolerance.reset();
      pc.diagnostic_mode = false;
      add(check_bound_dominance(spec, L, backward_pass(spec, pc), oracle, m));
    }
  }
  return out;
}

PipelineResult run_pipeline(const RunConfig& cfg, Pipeline pipeline, const std::string& out_dir,
                            std::ostream& log) {
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  const auto t0 = std::chrono::steady_clock::now();
  const PreparedProblem prep = prepare_problem(cfg);
  {
    std::ofstream m(dir / "manifest.yaml");
    if (!m) throw std::runtime_error("cannot write " + (dir / "manifest.yaml").string());
    m << manifest_text(cfg, pipeline, prep);
  }
  const ProblemSpec& spec = prep.spec;
  {
    auto f = open_out(dir / "ledger.csv");
    write_ledger_csv(f, prep.ledger);
    plot_ledger(dir / "ledger.svg", prep.ledger);
  }
  log << pipeline_name(pipeline) << ": T=" << spec.steps() << " d=" << spec.dim()
      << " beta " << (prep.beta_overridden ? "explicit" : "from ledger") << ", L0r " << prep.ledger.l0r_source
      << '\n';

  PipelineResult res;
  switch (pipeline) {
    case Pipeline::solve:
    case Pipeline::verify:
    case Pipeline::oracle_compare: {
      if (pipeline == Pipeline::oracle_compare && !is_lqg(spec))
        throw ValidationError("oracle-compare needs a gaussian score and a quadratic reward");
      const PiftSolution sol = backward_pass(spec, solver_config(cfg, prep));
      log << "  backward pass " << std::fixed << std::setprecision(3) << seconds_since(t0) << " s\n"
          << std::defaultfloat << std::setprecision(6);
      {
        auto f = open_out(dir / "diagnostics.csv");
        write_diagnostics_csv(f, sol.diagnostics);
      }
      write_fields(dir / "fields", sol);
      plot_residuals(dir / "residuals.svg", sol);
      std::vector<std::pair<std::string, Policy>> pols{{"pretrained", pretrained_policy(spec)},
                                                       {"pift", field_policy(sol.controls)}};
      if (pipeline == Pipeline::oracle_compare) {
        const LqgSolution oracle = solve_lqg(spec);
        {
          auto f = open_out(dir / "lqg.csv");
          write_lqg_csv(f, oracle);
        }
        const OracleErrors e = oracle_errors(sol, oracle);
        {
          auto f = open_out(dir / "oracle_errors.csv");
          f << "t,control_sup_error,value_rel_error\n";
          for (std::size_t t = 0; t < e.value.size(); ++t) {
            f << t << ',';
            if (t < e.control.size())
              f << e.control[t];
            else
              f << "nan";
            f << ',' << e.value[t] << '\n';
          }
        }
        SvgPlot plot{"PI-FT vs oracle", "t", "error", true, {{"control", {}, {}}, {"value (rel)", {}, {}}}};
        for (std::size_t t = 0; t < e.value.size(); ++t) {
          if (t < e.control.size()) plot.series[0].x.push_back(double(t)), plot.series[0].y.push_back(e.control[t]);
          plot.series[1].x.push_back(double(t));
          plot.series[1].y.push_back(e.value[t]);
        }
        write_svg((dir / "oracle_errors.svg").string(), plot);
        res.checks = check_oracle_equivalence(sol, oracle, 1e-3);
        pols.emplace_back("oracle", oracle_policy(oracle));
      }
      if (pipeline == Pipeline::verify) {
        res.checks = verify_suite(cfg, prep, sol);
        auto f = open_out(dir / "verify_report.csv");
        write_checks_csv(f, res.checks);
        res.exit_code = all_passed(res.checks) ? 0 : 2;
      } else {
        write_objectives(dir / "objective.csv", spec, cfg, pols);
      }
      break;
    }
    case Pipeline::beta_sweep: {
      const auto sweep = run_beta_sweep(spec, cfg.sweep_betas, solver_config(cfg, prep), cfg.sampler.n_paths,
                                        cfg.sampler.seed);
      auto f = open_out(dir / "beta_sweep.csv");
      f << "beta,reward_mean,reward_se,kl_mean,kl_se,objective_mean,objective_se,max_effective_m\n";
      SvgPlot plot{"beta sweep", "log10 beta", "mean", false, {{"reward", {}, {}}, {"path KL", {}, {}}}};
      for (const auto& p : sweep) {
        f << p.beta << ',' << p.estimate.reward.mean << ',' << p.estimate.reward.std_error << ','
          << p.estimate.kl_sum.mean << ',' << p.estimate.kl_sum.std_error << ',' << p.estimate.objective.mean << ','
          << p.estimate.objective.std_error << ',' << p.max_effective_m << '\n';
        plot.series[0].x.push_back(std::log10(p.beta));
        plot.series[0].y.push_back(p.estimate.reward.mean);
        plot.series[1].x.push_back(std::log10(p.beta));
        plot.series[1].y.push_back(p.estimate.kl_sum.mean);
      }
      write_svg((dir / "beta_sweep.svg").string(), plot);
      res.checks = check_beta_sweep(sweep, 4.0);
      auto g = open_out(dir / "beta_sweep_trend.csv");
      write_checks_csv(g, res.checks);
      break;
    }
    case Pipeline::pg: {
      const FeatureMap f = FeatureMap::affine(spec.dim());
      const PolicyParams K0 = cfg.pg.init == "zero" ? zero_params(spec, f) : pretrained_params(spec);
      const NoisePlan plan = cfg.pg.mode == GradientMode::exact ? NoisePlan::exact()
                                                                : NoisePlan::monte_carlo(cfg.pg.n_paths, cfg.sampler.seed);
      std::optional<PolicyParams> star;
      if (is_lqg(spec)) star = oracle_params(solve_lqg(spec));
      const PgResult r = pg_ascent(K0, spec, f, cfg.pg.eta, cfg.pg.iters, plan, star);
      {
        auto out = open_out(dir / "pg_trace.csv");
        write_pg_trace_csv(out, r.trace);
      }
      {
        auto out = open_out(dir / "pg_params.csv");
        out << "t,row,col,value\n";
        for (std::size_t t = 0; t < r.K_final.K.size(); ++t)
          for (int i = 0; i < r.K_final.K[t].rows(); ++i)
            for (int j = 0; j < r.K_final.K[t].cols(); ++j)
              out << t << ',' << i << ',' << j << ',' << r.K_final.K[t](i, j) << '\n';
      }
      SvgPlot plot{"policy gradient ascent", "iteration", "value", true,
                   {{"grad norm", {}, {}}, {"distance to oracle", {}, {}}}};
      for (const auto& row : r.trace) {
        plot.series[0].x.push_back(row.iteration);
        plot.series[0].y.push_back(row.grad_norm);
        plot.series[1].x.push_back(row.iteration);
        plot.series[1].y.push_back(row.distance);
      }
      write_svg((dir / "pg_trace.svg").string(), plot);
      break;
    }
  }
  log_checks(log, res.checks);
  log << "  done in " << std::fixed << std::setprecision(3) << seconds_since(t0) << " s\n" << std::defaultfloat;
  return res;
}

}  // namespace pift
