#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

namespace barker {

/// Observed counts for the Poisson random-effects model
///   y_ij | eta_i ~ Poisson(exp(eta_i)),  eta_i | mu ~ N(mu, sigma_eta^2),
///   mu ~ N(0, prior_sd_mu^2).
struct PoissonDataset {
  std::vector<std::vector<std::int64_t>> groups;
  double sigma_eta = 1.0;
  double prior_sd_mu = 10.0;
  double mu_star = 0.0;
  std::uint64_t seed = 0;
  /// Number of eta_i* draws rejected by the overflow guard.
  int overflow_resamples = 0;

  int num_groups() const { return static_cast<int>(groups.size()); }
  /// Total number of observations.
  std::size_t num_counts() const;
  void validate() const;

  friend bool operator==(const PoissonDataset&, const PoissonDataset&) = default;
};

/// Largest Poisson mean the generator will sample from; eta_i* draws with
/// exp(eta_i*) above this are redrawn.
inline constexpr double kMaxPoissonMean = 1e9;

/// Simulates a dataset: eta_i* ~ N(mu_star, sigma_eta^2), y_ij ~ Poisson(exp(eta_i*)).
PoissonDataset generate_poisson_data(double mu_star, double sigma_eta,
                                     int num_groups, int group_size,
                                     std::uint64_t seed);

nlohmann::json to_json(const PoissonDataset& data);
PoissonDataset poisson_dataset_from_json(const nlohmann::json& j);

}  // namespace barker
