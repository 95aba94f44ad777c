#include "barker/poisson.hpp"

#include <cmath>
#include <random>

#include "barker/common.hpp"

namespace barker {

std::size_t PoissonDataset::num_counts() const {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.size();
  return n;
}

void PoissonDataset::validate() const {
  if (groups.empty()) throw UsageError("poisson dataset has no groups");
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (groups[i].empty())
      throw UsageError("poisson dataset group " + std::to_string(i) + " is empty");
    for (auto y : groups[i])
      if (y < 0) throw UsageError("poisson dataset has a negative count in group " +
                                  std::to_string(i));
  }
  if (!(sigma_eta >= 0.0) || !std::isfinite(sigma_eta))
    throw UsageError("sigma_eta must be non-negative and finite");
  if (!(prior_sd_mu > 0.0) || !std::isfinite(prior_sd_mu))
    throw UsageError("prior_sd_mu must be positive and finite");
}

PoissonDataset generate_poisson_data(double mu_star, double sigma_eta, int num_groups,
                                     int group_size, std::uint64_t seed) {
  if (num_groups < 1 || group_size < 1)
    throw UsageError("generate_poisson_data: need at least one group and one count");
  if (!(sigma_eta >= 0.0)) throw UsageError("generate_poisson_data: sigma_eta must be >= 0");
  if (mu_star > std::log(kMaxPoissonMean) && sigma_eta == 0.0)
    throw UsageError("generate_poisson_data: exp(mu_star) exceeds the count sampler range");

  PoissonDataset data;
  data.sigma_eta = sigma_eta;
  data.mu_star = mu_star;
  data.seed = seed;
  data.groups.resize(num_groups);

  Rng rng(seed);
  const double log_cap = std::log(kMaxPoissonMean);
  for (int i = 0; i < num_groups; ++i) {
    double eta = mu_star + sigma_eta * rng.normal();
    while (eta > log_cap) {
      ++data.overflow_resamples;
      eta = mu_star + sigma_eta * rng.normal();
    }
    std::poisson_distribution<std::int64_t> counts(std::exp(eta));
    auto& g = data.groups[i];
    g.resize(group_size);
    for (auto& y : g) y = counts(rng.engine());
  }
  return data;
}

nlohmann::json to_json(const PoissonDataset& data) {
  return {{"sigma_eta", data.sigma_eta},
          {"prior_sd_mu", data.prior_sd_mu},
          {"mu_star", data.mu_star},
          {"groups", data.groups},
          {"seed", data.seed},
          {"overflow_resamples", data.overflow_resamples}};
}

PoissonDataset poisson_dataset_from_json(const nlohmann::json& j) {
  PoissonDataset data;
  try {
    data.sigma_eta = j.at("sigma_eta").get<double>();
    data.prior_sd_mu = j.value("prior_sd_mu", 10.0);
    data.mu_star = j.at("mu_star").get<double>();
    data.groups = j.at("groups").get<std::vector<std::vector<std::int64_t>>>();
    data.seed = j.value("seed", std::uint64_t{0});
    data.overflow_resamples = j.value("overflow_resamples", 0);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("poisson dataset json: ") + e.what());
  }
  data.validate();
  return data;
}

}  // namespace barker
