// Command-line driver for the experiment harness.
#include <chrono>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "barker/experiments.hpp"

using barker::ExperimentKind;
using nlohmann::json;

namespace {

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw barker::UsageError("cannot open config file " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw barker::ConfigError("config", std::string("parse error: ") + e.what());
  }
}

struct Overrides {
  std::string config_path;
  std::optional<long long> seed;
  std::optional<long long> replicates;
  std::optional<long long> threads;
  std::optional<std::string> output_dir;
};

int run(ExperimentKind kind, const Overrides& o) {
  json user = o.config_path.empty() ? json::object() : load_json(o.config_path);
  if (user.contains("experiment") &&
      barker::experiment_from_string(user["experiment"].get<std::string>()) != kind)
    throw barker::ConfigError("config.experiment",
                              "config is for " + user["experiment"].get<std::string>() +
                                  ", not " + barker::to_string(kind));
  user["experiment"] = barker::to_string(kind);
  if (o.seed) user["seed"] = *o.seed;
  if (o.replicates) user["replicates"] = *o.replicates;
  if (o.threads) user["threads"] = *o.threads;
  if (o.output_dir) user["output_dir"] = *o.output_dir;
  const json config = barker::resolve_config(user);

  const auto start = std::chrono::steady_clock::now();
  const barker::ExperimentResult result = barker::run_experiment(config);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  barker::write_experiment_outputs(config, result, wall);

  std::cout << result.summary.dump(2) << '\n';
  std::cout << "wrote " << config["output_dir"].get<std::string>() << " in " << wall << " s\n";
  if (result.warnings > 0)
    std::cerr << "warning: " << result.warnings
              << " run(s) had divergences on at least half of their steps\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradient-based MCMC experiments (RWM, MALA, Barker, HMC)"};
  app.require_subcommand(1);

  Overrides o;
  const std::vector<std::pair<std::string, ExperimentKind>> commands = {
      {"sweep-stepsize", ExperimentKind::SweepStepsize},
      {"scaling", ExperimentKind::Scaling},
      {"adaptive", ExperimentKind::AdaptiveScenarios},
      {"poisson", ExperimentKind::Poisson},
      {"gap-lab", ExperimentKind::GapLab},
      {"tv-decay", ExperimentKind::TvDecay},
      {"acceptance-order", ExperimentKind::AcceptanceOrder}};

  std::optional<ExperimentKind> chosen;
  for (const auto& [name, kind] : commands) {
    CLI::App* sub = app.add_subcommand(name, "Run the " + barker::to_string(kind) +
                                                 " experiment");
    sub->footer("Outputs:\n" + barker::experiment_help(kind));
    sub->add_option("--config,-c", o.config_path, "JSON config; flags override its values")
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "Master seed");
    sub->add_option("--replicates", o.replicates, "Replicates per cell");
    sub->add_option("--threads", o.threads, "Worker threads");
    sub->add_option("--output-dir,-o", o.output_dir, "Directory for CSV and manifest");
    sub->callback([&chosen, kind = kind] { chosen = kind; });
  }

  std::string validate_path;
  CLI::App* validate = app.add_subcommand("validate-config", "Check a config file and print "
                                                             "the resolved config");
  validate->add_option("config", validate_path, "JSON config")->required();
  CLI::App* defaults = app.add_subcommand("defaults", "Print the default config of an experiment");
  std::string defaults_name;
  defaults->add_option("experiment", defaults_name, "Experiment name")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate->parsed()) {
      std::cout << barker::resolve_config(load_json(validate_path)).dump(2) << '\n';
      return 0;
    }
    if (defaults->parsed()) {
      std::cout << barker::default_config(barker::experiment_from_string(defaults_name)).dump(2)
                << '\n';
      return 0;
    }
    return run(*chosen, o);
  } catch (const barker::UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
