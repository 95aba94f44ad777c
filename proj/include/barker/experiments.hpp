#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "barker/proposals.hpp"
#include "barker/targets.hpp"

namespace barker {

enum class ExperimentKind {
  SweepStepsize,
  Scaling,
  AdaptiveScenarios,
  Poisson,
  GapLab,
  TvDecay,
  AcceptanceOrder,
};

/// Config name, e.g. "sweep_stepsize".
std::string to_string(ExperimentKind kind);
/// Accepts config names and CLI names ("sweep-stepsize", "adaptive").
ExperimentKind experiment_from_string(const std::string& name);

/// Invalid configuration. what() starts with the offending field path.
class ConfigError : public UsageError {
 public:
  ConfigError(const std::string& path, const std::string& message)
      : UsageError(path + ": " + message), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

/// Desk-scale defaults for `kind`.
nlohmann::json default_config(ExperimentKind kind);
/// Overlays `user` on the defaults of user["experiment"] and validates.
nlohmann::json resolve_config(const nlohmann::json& user);
/// Throws ConfigError for unknown keys, wrong types or out-of-range values.
void validate_config(const nlohmann::json& config);

/// Column schema of every table `kind` writes, for help text.
std::string experiment_help(ExperimentKind kind);

using Cell = std::variant<std::string, long long, double>;

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row);
  /// Header plus rows; doubles use %.17g.
  std::string to_csv() const;
};

struct ExperimentResult {
  std::vector<Table> tables;
  nlohmann::json summary;
  /// Runs in which at least half of the steps were flagged divergent.
  long warnings = 0;
};

/// Runs a resolved config. Deterministic given the seed; every replicate and
/// sweep point draws from its own stream, so the thread count does not
/// change any output.
ExperimentResult run_experiment(const nlohmann::json& config);

/// Writes <output_dir>/<table>.csv for each table and manifest.json.
void write_experiment_outputs(const nlohmann::json& config, const ExperimentResult& result,
                              double wall_seconds);

/// Calls fn(i) for i in [0, n) on up to `threads` workers.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

/// Seed for a nested stream id path under `master`.
std::uint64_t task_seed(std::uint64_t master, std::initializer_list<std::uint64_t> ids);

/// log-spaced grid of `points` values on [lo, hi].
std::vector<double> log_grid(double lo, double hi, int points);

/// Index of the largest ESJD; ties go to the smallest sigma.
std::size_t argmax_esjd(const std::vector<double>& esjd_values);

struct SigmaSearch {
  double sigma = 0.0;
  double esjd = 0.0;
  std::vector<double> esjd_by_sigma;
  std::vector<double> accept_by_sigma;
};

/// Runs `kernel` at each sigma on the grid for n_steps (starting from an
/// exact draw when available, else from the origin after n_steps / 5 burn-in
/// steps) and returns the sigma with the largest per-coordinate ESJD.
SigmaSearch optimal_sigma_search(const ProposalKernel& kernel, const TargetModel& target,
                                 const std::vector<double>& sigma_grid, long n_steps,
                                 std::uint64_t seed);

/// Builds the target described by a config "target" object at dimension d.
TargetModel target_from_config(const nlohmann::json& spec, int d);

}  // namespace barker
