#include "pift/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <optional>
#include <ostream>

#include "pift/errors.hpp"
#include "pift/parallel.hpp"
#include "pift/pipelines.hpp"

namespace pift {

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Policy-iteration fine-tuning of diffusion samplers", "pift"};
  app.require_subcommand(1);
  app.set_version_flag("--version", tool_version());

  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  const std::vector<std::pair<const char*, const char*>> subs{
      {"solve", "run PI-FT and write fields, diagnostics and objective estimates"},
      {"verify", "run the invariant suite; exit 2 if any check fails"},
      {"oracle-compare", "compare PI-FT against the closed-form LQG oracle"},
      {"beta-sweep", "reward and path KL across the configured beta values"},
      {"pg", "policy gradient ascent with affine features"}};
  for (const auto& [name, help] : subs) {
    CLI::App* s = app.add_subcommand(name, help);
    s->add_option("--config", config_path, "problem configuration (YAML)")->required();
    s->add_option("--out", out_dir, "output directory (default: output.dir from the config)");
    s->add_option("--seed", seed, "sampler seed override");
    s->add_option("--threads", threads, "worker threads (overrides PIFT_THREADS)")->check(CLI::Range(1, 4096));
  }

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return exit_ok;
  } catch (const CLI::CallForVersion&) {
    out << tool_version() << '\n';
    return exit_ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return exit_config;
  }
  const std::string sub = app.get_subcommands().front()->get_name();

  set_thread_count(threads.value_or(0));
  try {
    RunConfig cfg = load_config_file(config_path);
    if (seed) cfg.sampler.seed = *seed;
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    const PipelineResult r = run_pipeline(cfg, parse_pipeline(sub), cfg.output_dir, out);
    if (r.exit_code == exit_invariant) {
      const auto failed = std::count_if(r.checks.begin(), r.checks.end(), [](const auto& c) { return !c.passed; });
      err << "verify: " << failed << " of " << r.checks.size() << " checks failed\n";
    }
    return r.exit_code;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return exit_config;
  } catch (const ValidationError& e) {
    err << "invalid problem: " << e.what() << '\n';
    return exit_config;
  } catch (const UnboundedConstantError& e) {
    err << "unbounded constant: " << e.what() << '\n';
    return exit_config;
  } catch (const ConcavityError& e) {
    err << "concavity: " << e.what() << " (need beta >= " << e.required_beta() << " at t=" << e.step() << ")\n";
    return exit_config;
  } catch (const NumericAbort& e) {
    err << "numeric abort: " << e.what() << '\n';
    return exit_numeric;
  }
}

}  // namespace pift
