#include "pift/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace pift {

namespace {

int line_of(const YAML::Node& n) { return n.Mark().line >= 0 ? n.Mark().line + 1 : 0; }

[[noreturn]] void fail(const YAML::Node& n, const std::string& key, const std::string& msg) {
  std::ostringstream os;
  const int line = line_of(n);
  if (line > 0) os << "line " << line << ": ";
  os << key << ": " << msg;
  throw ConfigError(os.str(), key, line);
}

[[noreturn]] void missing(const YAML::Node& parent, const std::string& key) {
  std::ostringstream os;
  const int line = line_of(parent);
  if (line > 0) os << "line " << line << ": ";
  os << "missing required key '" << key << "'";
  throw ConfigError(os.str(), key, line);
}

void require_map(const YAML::Node& n, const std::string& key) {
  if (!n.IsMap()) fail(n, key, "expected a mapping");
}

void check_keys(const YAML::Node& n, const std::string& where, const std::set<std::string>& allowed) {
  require_map(n, where);
  for (const auto& kv : n) {
    const auto k = kv.first.as<std::string>();
    if (!allowed.count(k)) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      fail(kv.first, where.empty() ? k : where + "." + k, "unknown key (allowed: " + list + ")");
    }
  }
}

YAML::Node need(const YAML::Node& parent, const std::string& key, const std::string& path) {
  const YAML::Node n = parent[key];
  if (!n) missing(parent, path);
  return n;
}

double as_double(const YAML::Node& n, const std::string& key) {
  if (!n.IsScalar()) fail(n, key, "expected a number");
  try {
    return n.as<double>();
  } catch (const YAML::Exception&) {
    fail(n, key, "expected a number, got '" + n.Scalar() + "'");
  }
}

long as_long(const YAML::Node& n, const std::string& key) {
  if (!n.IsScalar()) fail(n, key, "expected an integer");
  try {
    return n.as<long>();
  } catch (const YAML::Exception&) {
    fail(n, key, "expected an integer, got '" + n.Scalar() + "'");
  }
}

std::uint64_t as_u64(const YAML::Node& n, const std::string& key) {
  if (!n.IsScalar()) fail(n, key, "expected a nonnegative integer");
  try {
    return n.as<std::uint64_t>();
  } catch (const YAML::Exception&) {
    fail(n, key, "expected a nonnegative integer, got '" + n.Scalar() + "'");
  }
}

bool as_bool(const YAML::Node& n, const std::string& key) {
  if (!n.IsScalar()) fail(n, key, "expected true/false");
  try {
    return n.as<bool>();
  } catch (const YAML::Exception&) {
    fail(n, key, "expected true/false, got '" + n.Scalar() + "'");
  }
}

std::string as_string(const YAML::Node& n, const std::string& key) {
  if (!n.IsScalar()) fail(n, key, "expected a string");
  return n.Scalar();
}

std::vector<double> as_doubles(const YAML::Node& n, const std::string& key) {
  if (n.IsScalar()) return {as_double(n, key)};
  if (!n.IsSequence() || n.size() == 0) fail(n, key, "expected a number or a nonempty list of numbers");
  std::vector<double> v;
  for (std::size_t i = 0; i < n.size(); ++i) v.push_back(as_double(n[i], key + "[" + std::to_string(i) + "]"));
  return v;
}

Vec as_vec(const YAML::Node& n, const std::string& key) {
  if (!n.IsSequence() || n.size() == 0) fail(n, key, "expected a nonempty list of numbers");
  const auto v = as_doubles(n, key);
  return Eigen::Map<const Vec>(v.data(), static_cast<long>(v.size()));
}

Mat as_mat(const YAML::Node& n, const std::string& key) {
  if (!n.IsSequence() || n.size() == 0) fail(n, key, "expected a list of rows");
  const auto rows = static_cast<long>(n.size());
  Mat m;
  for (long i = 0; i < rows; ++i) {
    const auto r = as_vec(n[i], key + "[" + std::to_string(i) + "]");
    if (i == 0) m.resize(rows, r.size());
    if (r.size() != m.cols()) fail(n[i], key, "rows have different lengths");
    m.row(i) = r.transpose();
  }
  return m;
}

template <class F>
auto guarded(const YAML::Node& n, const std::string& key, F&& f) {
  try {
    return f();
  } catch (const ValidationError& e) {
    fail(n, key, e.what());
  }
}

Schedule parse_schedule(const YAML::Node& n) {
  check_keys(n, "schedule", {"T", "alpha_min", "alpha_max", "alpha", "sigma"});
  if (n["alpha"]) {
    if (n["alpha_min"] || n["alpha_max"]) fail(n, "schedule", "give either alpha or alpha_min/alpha_max");
    const auto alpha = as_doubles(n["alpha"], "schedule.alpha");
    if (n["T"] && as_long(n["T"], "schedule.T") != static_cast<long>(alpha.size()))
      fail(n["T"], "schedule.T", "does not match the length of alpha");
    std::vector<double> sigma;
    if (n["sigma"]) {
      sigma = as_doubles(n["sigma"], "schedule.sigma");
    } else {
      for (double a : alpha) sigma.push_back(a > 0.0 && a < 1.0 ? std::sqrt(1.0 / a - 1.0) : 1.0);
    }
    return guarded(n, "schedule", [&] { return Schedule(alpha, sigma); });
  }
  if (n["sigma"]) fail(n["sigma"], "schedule.sigma", "sigma requires an explicit alpha list");
  const long T = as_long(need(n, "T", "schedule.T"), "schedule.T");
  const double lo = as_double(need(n, "alpha_min", "schedule.alpha_min"), "schedule.alpha_min");
  const double hi = as_double(need(n, "alpha_max", "schedule.alpha_max"), "schedule.alpha_max");
  if (T < 1 || T > 100000) fail(n["T"], "schedule.T", "must lie in [1, 100000]");
  return guarded(n, "schedule", [&] { return make_ddpm_schedule(static_cast<int>(T), lo, hi); });
}

PretrainedScore parse_score(const YAML::Node& n, const Schedule& sc) {
  require_map(n, "score");
  const std::string type = as_string(need(n, "type", "score.type"), "score.type");
  if (type == "gaussian") {
    check_keys(n, "score", {"type", "mean", "cov"});
    const Vec mean = as_vec(need(n, "mean", "score.mean"), "score.mean");
    const Mat cov = as_mat(need(n, "cov", "score.cov"), "score.cov");
    return guarded(n, "score", [&] { return PretrainedScore::gaussian(sc, mean, cov); });
  }
  if (type == "mixture") {
    check_keys(n, "score", {"type", "weights", "means", "covs"});
    const auto w = as_doubles(need(n, "weights", "score.weights"), "score.weights");
    const YAML::Node mn = need(n, "means", "score.means");
    const YAML::Node cn = need(n, "covs", "score.covs");
    if (!mn.IsSequence() || !cn.IsSequence()) fail(n, "score", "means and covs must be lists");
    std::vector<Vec> means;
    std::vector<Mat> covs;
    for (std::size_t k = 0; k < mn.size(); ++k) means.push_back(as_vec(mn[k], "score.means"));
    for (std::size_t k = 0; k < cn.size(); ++k) covs.push_back(as_mat(cn[k], "score.covs"));
    return guarded(n, "score", [&] { return PretrainedScore::mixture(sc, w, means, covs); });
  }
  fail(n["type"], "score.type", "expected gaussian or mixture, got '" + type + "'");
}

RewardModel parse_reward(const YAML::Node& n, L0DomainSetting& l0) {
  require_map(n, "reward");
  const std::string type = as_string(need(n, "type", "reward.type"), "reward.type");
  if (type == "quadratic") {
    check_keys(n, "reward", {"type", "A", "b", "c", "l0_domain"});
    const Mat A = as_mat(need(n, "A", "reward.A"), "reward.A");
    const Vec b = as_vec(need(n, "b", "reward.b"), "reward.b");
    const double c = n["c"] ? as_double(n["c"], "reward.c") : 0.0;
    if (const YAML::Node ld = n["l0_domain"]) {
      if (ld.IsScalar() && ld.Scalar() == "auto") {
        l0.kind = L0DomainSetting::Kind::automatic;
      } else if (ld.IsScalar() && ld.Scalar() == "none") {
        l0.kind = L0DomainSetting::Kind::none;
      } else {
        l0.kind = L0DomainSetting::Kind::value;
        l0.value = as_double(ld, "reward.l0_domain");
        if (!(l0.value >= 0.0)) fail(ld, "reward.l0_domain", "must be nonnegative");
      }
    }
    return guarded(n, "reward", [&] { return RewardModel::quadratic(A, b, c); });
  }
  if (type == "pseudo_huber") {
    check_keys(n, "reward", {"type", "center", "scale", "gain"});
    const Vec center = as_vec(need(n, "center", "reward.center"), "reward.center");
    const double scale = as_double(need(n, "scale", "reward.scale"), "reward.scale");
    const double gain = as_double(need(n, "gain", "reward.gain"), "reward.gain");
    return guarded(n, "reward", [&] { return RewardModel::pseudo_huber(center, scale, gain); });
  }
  fail(n["type"], "reward.type", "expected quadratic or pseudo_huber, got '" + type + "'");
}

}  // namespace

std::string pipeline_name(Pipeline p) {
  switch (p) {
    case Pipeline::solve: return "solve";
    case Pipeline::verify: return "verify";
    case Pipeline::oracle_compare: return "oracle-compare";
    case Pipeline::beta_sweep: return "beta-sweep";
    case Pipeline::pg: return "pg";
  }
  return "solve";
}

Pipeline parse_pipeline(const std::string& name) {
  if (name == "solve") return Pipeline::solve;
  if (name == "verify") return Pipeline::verify;
  if (name == "oracle-compare" || name == "oracle_compare") return Pipeline::oracle_compare;
  if (name == "beta-sweep" || name == "beta_sweep") return Pipeline::beta_sweep;
  if (name == "pg") return Pipeline::pg;
  throw ConfigError("unknown pipeline '" + name + "'", "pipeline", 0);
}

RunConfig load_config_string(const std::string& text, const std::string& source) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(source + ": " + e.what(), "", e.mark.line + 1);
  }
  if (!root || root.IsNull()) throw ConfigError(source + ": empty configuration", "", 0);
  check_keys(root, "", {"schedule", "score", "reward", "beta", "beta_margin", "lambda", "pift", "sampler",
                        "sweep", "pg", "output", "provenance"});

  const Schedule sc = parse_schedule(need(root, "schedule", "schedule"));
  const PretrainedScore score = parse_score(need(root, "score", "score"), sc);
  L0DomainSetting l0;
  const RewardModel reward = parse_reward(need(root, "reward", "reward"), l0);
  std::optional<ProblemSpec> spec;
  spec.emplace(guarded(root, "reward", [&] { return ProblemSpec(sc, score, reward); }));

  RunConfig cfg(*spec);
  cfg.source = source;
  cfg.l0_domain = l0;
  const int T = sc.steps();

  if (const YAML::Node b = root["beta"]) {
    if (b.IsScalar() && b.Scalar() == "auto") {
      cfg.beta.kind = BetaSetting::Kind::automatic;
    } else {
      cfg.beta.kind = BetaSetting::Kind::explicit_values;
      cfg.beta.values = as_doubles(b, "beta");
      if (cfg.beta.values.size() != 1 && static_cast<int>(cfg.beta.values.size()) != T)
        fail(b, "beta", "needs 1 or T entries");
      for (double x : cfg.beta.values)
        if (!(x > 0.0)) fail(b, "beta", "entries must be positive");
    }
  }
  if (const YAML::Node m = root["beta_margin"]) {
    cfg.beta_margin = as_double(m, "beta_margin");
    if (!(cfg.beta_margin >= 1.0)) fail(m, "beta_margin", "must be >= 1");
  }
  if (const YAML::Node l = root["lambda"]) {
    cfg.lambda = as_doubles(l, "lambda");
    if (cfg.lambda.size() != 1 && static_cast<int>(cfg.lambda.size()) != T)
      fail(l, "lambda", "needs 1 or T entries");
    for (double x : cfg.lambda)
      if (!(x > 0.0 && x < 1.0)) fail(l, "lambda", "entries must lie in (0,1)");
  }
  cfg.pift.inner_iters = {50};
  cfg.pift.grid_points = 512;
  cfg.pift.quad_order = default_quad_order(spec->dim());
  if (const YAML::Node p = root["pift"]) {
    check_keys(p, "pift", {"inner_iters", "tolerance", "grid_points", "quad_order", "diagnostic_mode"});
    if (p["inner_iters"]) {
      const auto v = as_doubles(p["inner_iters"], "pift.inner_iters");
      if (v.size() != 1 && static_cast<int>(v.size()) != T) fail(p["inner_iters"], "pift.inner_iters", "needs 1 or T entries");
      cfg.pift.inner_iters.clear();
      for (double x : v) {
        if (!(x >= 1.0) || x != std::floor(x)) fail(p["inner_iters"], "pift.inner_iters", "entries must be integers >= 1");
        cfg.pift.inner_iters.push_back(static_cast<int>(x));
      }
    }
    if (p["tolerance"]) {
      const double tol = as_double(p["tolerance"], "pift.tolerance");
      if (!(tol > 0.0)) fail(p["tolerance"], "pift.tolerance", "must be positive");
      cfg.pift.tolerance = tol;
    }
    if (p["grid_points"]) {
      const long g = as_long(p["grid_points"], "pift.grid_points");
      if (g < 16 || g > 100000) fail(p["grid_points"], "pift.grid_points", "must lie in [16, 100000]");
      cfg.pift.grid_points = static_cast<int>(g);
    }
    if (p["quad_order"]) {
      const long q = as_long(p["quad_order"], "pift.quad_order");
      if (q < 2 || q > 200) fail(p["quad_order"], "pift.quad_order", "must lie in [2, 200]");
      cfg.pift.quad_order = static_cast<int>(q);
    }
    if (p["diagnostic_mode"]) cfg.pift.diagnostic_mode = as_bool(p["diagnostic_mode"], "pift.diagnostic_mode");
  }
  cfg.pift.lambda = cfg.lambda;
  if (const YAML::Node s = root["sampler"]) {
    check_keys(s, "sampler", {"n_paths", "seed"});
    if (s["n_paths"]) {
      cfg.sampler.n_paths = as_long(s["n_paths"], "sampler.n_paths");
      if (cfg.sampler.n_paths < 2) fail(s["n_paths"], "sampler.n_paths", "must be >= 2");
    }
    if (s["seed"]) cfg.sampler.seed = as_u64(s["seed"], "sampler.seed");
  }
  if (const YAML::Node s = root["sweep"]) {
    check_keys(s, "sweep", {"betas"});
    if (s["betas"]) {
      cfg.sweep_betas = as_doubles(s["betas"], "sweep.betas");
      for (double x : cfg.sweep_betas)
        if (!(x > 0.0)) fail(s["betas"], "sweep.betas", "entries must be positive");
    }
  }
  if (const YAML::Node p = root["pg"]) {
    check_keys(p, "pg", {"eta", "iters", "mode", "n_paths", "init"});
    if (p["eta"]) {
      cfg.pg.eta = as_double(p["eta"], "pg.eta");
      if (!(cfg.pg.eta >= 0.0)) fail(p["eta"], "pg.eta", "must be nonnegative");
    }
    if (p["iters"]) {
      const long it = as_long(p["iters"], "pg.iters");
      if (it < 0 || it > 1000000) fail(p["iters"], "pg.iters", "must lie in [0, 1000000]");
      cfg.pg.iters = static_cast<int>(it);
    }
    if (p["mode"]) {
      const std::string m = as_string(p["mode"], "pg.mode");
      if (m == "exact")
        cfg.pg.mode = GradientMode::exact;
      else if (m == "monte_carlo")
        cfg.pg.mode = GradientMode::monte_carlo;
      else
        fail(p["mode"], "pg.mode", "expected exact or monte_carlo");
    }
    if (p["n_paths"]) {
      cfg.pg.n_paths = as_long(p["n_paths"], "pg.n_paths");
      if (cfg.pg.n_paths < 2) fail(p["n_paths"], "pg.n_paths", "must be >= 2");
    }
    if (p["init"]) {
      cfg.pg.init = as_string(p["init"], "pg.init");
      if (cfg.pg.init != "pretrained" && cfg.pg.init != "zero") fail(p["init"], "pg.init", "expected pretrained or zero");
    }
  }
  if (const YAML::Node o = root["output"]) {
    check_keys(o, "output", {"dir"});
    if (o["dir"]) cfg.output_dir = as_string(o["dir"], "output.dir");
  }
  if (const YAML::Node pv = root["provenance"]) {
    check_keys(pv, "provenance", {"tool_version", "pipeline", "source", "seed", "beta_overridden", "beta_resolved",
                                  "l0r_source", "l0r_value"});
  }
  return cfg;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'", "", 0);
  std::stringstream ss;
  ss << in.rdbuf();
  return load_config_string(ss.str(), path);
}

namespace {

void emit_vec(YAML::Emitter& e, const Vec& v) {
  e << YAML::Flow << YAML::BeginSeq;
  for (int i = 0; i < v.size(); ++i) e << v(i);
  e << YAML::EndSeq;
}

void emit_mat(YAML::Emitter& e, const Mat& m) {
  e << YAML::Flow << YAML::BeginSeq;
  for (int i = 0; i < m.rows(); ++i) {
    e << YAML::Flow << YAML::BeginSeq;
    for (int j = 0; j < m.cols(); ++j) e << m(i, j);
    e << YAML::EndSeq;
  }
  e << YAML::EndSeq;
}

void emit_doubles(YAML::Emitter& e, const std::vector<double>& v) {
  if (v.size() == 1) {
    e << v.front();
    return;
  }
  e << YAML::Flow << YAML::BeginSeq;
  for (double x : v) e << x;
  e << YAML::EndSeq;
}

}  // namespace

std::string dump_config(const RunConfig& cfg) {
  const ProblemSpec& p = cfg.problem;
  YAML::Emitter e;
  e.SetDoublePrecision(17);
  e << YAML::BeginMap;

  e << YAML::Key << "schedule" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "alpha" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (double a : p.schedule().alphas()) e << a;
  e << YAML::EndSeq;
  e << YAML::Key << "sigma" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (double s : p.schedule().sigmas()) e << s;
  e << YAML::EndSeq << YAML::EndMap;

  e << YAML::Key << "score" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "type" << YAML::Value << p.score().kind();
  if (p.score().is_affine()) {
    e << YAML::Key << "mean" << YAML::Value;
    emit_vec(e, p.score().means().front());
    e << YAML::Key << "cov" << YAML::Value;
    emit_mat(e, p.score().covs().front());
  } else {
    e << YAML::Key << "weights" << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (double w : p.score().weights()) e << w;
    e << YAML::EndSeq << YAML::Key << "means" << YAML::Value << YAML::BeginSeq;
    for (const auto& m : p.score().means()) emit_vec(e, m);
    e << YAML::EndSeq << YAML::Key << "covs" << YAML::Value << YAML::BeginSeq;
    for (const auto& c : p.score().covs()) emit_mat(e, c);
    e << YAML::EndSeq;
  }
  e << YAML::EndMap;

  e << YAML::Key << "reward" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "type" << YAML::Value << p.reward().kind();
  if (p.reward().is_quadratic()) {
    e << YAML::Key << "A" << YAML::Value;
    emit_mat(e, p.reward().A());
    e << YAML::Key << "b" << YAML::Value;
    emit_vec(e, p.reward().b());
    e << YAML::Key << "c" << YAML::Value << p.reward().c();
    e << YAML::Key << "l0_domain" << YAML::Value;
    switch (cfg.l0_domain.kind) {
      case L0DomainSetting::Kind::none: e << "none"; break;
      case L0DomainSetting::Kind::automatic: e << "auto"; break;
      case L0DomainSetting::Kind::value: e << cfg.l0_domain.value; break;
    }
  } else {
    e << YAML::Key << "center" << YAML::Value;
    emit_vec(e, p.reward().center());
    e << YAML::Key << "scale" << YAML::Value << p.reward().scale();
    e << YAML::Key << "gain" << YAML::Value << p.reward().gain();
  }
  e << YAML::EndMap;

  e << YAML::Key << "beta" << YAML::Value;
  if (cfg.beta.kind == BetaSetting::Kind::automatic)
    e << "auto";
  else
    emit_doubles(e, cfg.beta.values);
  e << YAML::Key << "beta_margin" << YAML::Value << cfg.beta_margin;
  e << YAML::Key << "lambda" << YAML::Value;
  emit_doubles(e, cfg.lambda);

  e << YAML::Key << "pift" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "inner_iters" << YAML::Value;
  if (cfg.pift.inner_iters.size() == 1) {
    e << cfg.pift.inner_iters.front();
  } else {
    e << YAML::Flow << YAML::BeginSeq;
    for (int m : cfg.pift.inner_iters) e << m;
    e << YAML::EndSeq;
  }
  if (cfg.pift.tolerance) e << YAML::Key << "tolerance" << YAML::Value << *cfg.pift.tolerance;
  e << YAML::Key << "grid_points" << YAML::Value << cfg.pift.grid_points;
  e << YAML::Key << "quad_order" << YAML::Value << cfg.pift.quad_order;
  e << YAML::Key << "diagnostic_mode" << YAML::Value << cfg.pift.diagnostic_mode;
  e << YAML::EndMap;

  e << YAML::Key << "sampler" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "n_paths" << YAML::Value << cfg.sampler.n_paths;
  e << YAML::Key << "seed" << YAML::Value << cfg.sampler.seed;
  e << YAML::EndMap;

  e << YAML::Key << "sweep" << YAML::Value << YAML::BeginMap << YAML::Key << "betas" << YAML::Value
    << YAML::Flow << YAML::BeginSeq;
  for (double b : cfg.sweep_betas) e << b;
  e << YAML::EndSeq << YAML::EndMap;

  e << YAML::Key << "pg" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "eta" << YAML::Value << cfg.pg.eta;
  e << YAML::Key << "iters" << YAML::Value << cfg.pg.iters;
  e << YAML::Key << "mode" << YAML::Value << (cfg.pg.mode == GradientMode::exact ? "exact" : "monte_carlo");
  e << YAML::Key << "n_paths" << YAML::Value << cfg.pg.n_paths;
  e << YAML::Key << "init" << YAML::Value << cfg.pg.init;
  e << YAML::EndMap;

  e << YAML::Key << "output" << YAML::Value << YAML::BeginMap << YAML::Key << "dir" << YAML::Value
    << cfg.output_dir << YAML::EndMap;
  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

}  // namespace pift
