#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pift/model.hpp"
#include "pift/parametric.hpp"
#include "pift/solver.hpp"

namespace pift {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, std::string key, int line)
      : std::runtime_error(what), key_(std::move(key)), line_(line) {}
  const std::string& key() const noexcept { return key_; }
  int line() const noexcept { return line_; }  // 1-based, 0 when unknown

 private:
  std::string key_;
  int line_;
};

enum class Pipeline { solve, verify, oracle_compare, beta_sweep, pg };
std::string pipeline_name(Pipeline p);
Pipeline parse_pipeline(const std::string& name);

struct BetaSetting {
  enum class Kind { automatic, explicit_values } kind = Kind::automatic;
  std::vector<double> values;
};

struct L0DomainSetting {
  enum class Kind { none, automatic, value } kind = Kind::none;
  double value = 0.0;
};

struct SamplerSettings {
  long n_paths = 100000;
  std::uint64_t seed = 20240601;
};

struct PgSettings {
  double eta = 1.0;
  int iters = 200;
  GradientMode mode = GradientMode::exact;
  long n_paths = 10000;
  std::string init = "pretrained";  // pretrained | zero
};

struct RunConfig {
  explicit RunConfig(ProblemSpec p) : problem(std::move(p)) {}

  ProblemSpec problem;  // no beta yet
  BetaSetting beta;
  double beta_margin = 1.0;
  L0DomainSetting l0_domain;
  std::vector<double> lambda{0.5};
  PiftConfig pift;
  SamplerSettings sampler;
  std::vector<double> sweep_betas{0.01, 0.1, 1.0};
  PgSettings pg;
  std::string output_dir = "out";
  std::string source;  // file path or "<string>"
};

// Parses YAML text. Unknown keys and type errors raise ConfigError with the line.
RunConfig load_config_string(const std::string& text, const std::string& source = "<string>");
RunConfig load_config_file(const std::string& path);

// Normalized YAML with every default spelled out; loads back to the same RunConfig.
std::string dump_config(const RunConfig& cfg);

}  // namespace pift
