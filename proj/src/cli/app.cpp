#include <CLI11.hpp>
#include <iostream>
#include <map>
#include <optional>

#include "alignmeter/cli.hpp"
#include "alignmeter/error.hpp"
#include "alignmeter/parallel.hpp"
#include "commands.hpp"
#include "config.hpp"

namespace alignmeter::cli {
namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> permutations, bootstrap, chains, iters;
  std::optional<double> level, alpha;
  std::optional<std::string> preset;
  std::optional<unsigned> threads;
};

void add_flags(CLI::App& sub, Flags& f) {
  sub.add_option("--config", f.config, "JSON analysis config")->check(CLI::ExistingFile);
  sub.add_option("--seed", f.seed, "random seed (required unless in config)");
  sub.add_option("--out", f.out, "output directory");
  sub.add_option("--permutations", f.permutations, "permutation replicates")->check(CLI::PositiveNumber);
  sub.add_option("--bootstrap", f.bootstrap, "bootstrap replicates")->check(CLI::PositiveNumber);
  sub.add_option("--chains", f.chains, "sampler chains")->check(CLI::PositiveNumber);
  sub.add_option("--iters", f.iters, "sampler iterations per chain, warmup included")->check(CLI::PositiveNumber);
  sub.add_option("--level", f.level, "confidence level")->check(CLI::Range(0.0, 1.0));
  sub.add_option("--alpha", f.alpha, "family-wise alpha for Bonferroni masking")->check(CLI::Range(0.0, 1.0));
  sub.add_option("--preset", f.preset, "simulation preset: study, positive, shared-bias, null");
  sub.add_option("--threads", f.threads, "worker threads (does not change results)")->check(CLI::PositiveNumber);
}

Json overrides_from(const Flags& f) {
  Json o = Json::object();
  if (f.seed) o["seed"] = *f.seed;
  if (f.out) o["out"] = *f.out;
  if (f.permutations) o["permutations"] = *f.permutations;
  if (f.bootstrap) o["bootstrap"] = *f.bootstrap;
  if (f.chains) o["chains"] = *f.chains;
  if (f.iters) o["iters"] = *f.iters;
  if (f.level) o["level"] = *f.level;
  if (f.alpha) o["alpha"] = *f.alpha;
  if (f.preset) o["preset"] = *f.preset;
  return o;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Rating-alignment analyses: concordance, dependence, robustness, ensembles, variance decomposition"};
  app.require_subcommand(1);
  Flags flags;
  using Command = Written (*)(const AnalysisConfig&);
  const std::vector<std::tuple<std::string, std::string, Command>> commands{
      {"align", "alignment of every rater with human experts and with the outcome", cmd_align},
      {"dcor", "bias-corrected distance correlations, clustering and summary cells", cmd_dcor},
      {"robust", "seven-test robustness battery per rater and task", cmd_robust},
      {"ensemble", "build ensembles and compare their alignment with members", cmd_ensemble},
      {"decompose", "variance decomposition of misalignment residuals", cmd_decompose},
      {"simulate", "write a synthetic study bundle", cmd_simulate},
  };
  std::map<CLI::App*, Command> handlers;
  for (const auto& [name, help, fn] : commands) {
    auto* sub = app.add_subcommand(name, help);
    add_flags(*sub, flags);
    handlers[sub] = fn;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_input;
  }

  for (const auto& [sub, fn] : handlers) {
    if (!sub->parsed()) continue;
    try {
      if (flags.threads) set_thread_count(*flags.threads);
      std::optional<std::filesystem::path> file;
      if (!flags.config.empty()) file = flags.config;
      const auto cfg = load_config(file, overrides_from(flags));
      for (const auto& p : fn(cfg)) std::cout << p.string() << "\n";
      return exit_ok;
    } catch (const ValidationError& e) {
      std::cerr << "input error: " << e.report().summary() << "\n";
      return exit_input;
    } catch (const InputError& e) {
      std::cerr << "input error: " << e.what() << "\n";
      return exit_input;
    } catch (const AnalysisError& e) {
      std::cerr << "analysis error: " << e.what() << "\n";
      return exit_analysis;
    } catch (const std::exception& e) {
      std::cerr << "analysis error: " << sub->get_name() << ": " << e.what() << "\n";
      return exit_analysis;
    }
  }
  return exit_input;
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"alignmeter"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace alignmeter::cli
