#pragma once

#include <optional>
#include <string>
#include <vector>

#include "barker/common.hpp"
#include "barker/proposals.hpp"

namespace barker {

inline constexpr double kSigmaFloor = 1e-12;

/// Robbins-Monro state for the global scale and preconditioner.
///
/// `t` counts from 1 and is incremented before each update, so the first
/// update uses gamma = 2^{-kappa}; with gamma = 1 the covariance update would
/// reset Sigma to the zero matrix.
struct AdaptationState {
  double log_sigma = 0.0;
  Vector mu;
  /// Diagonal of Sigma. Kept in sync with sigma_dense when that is present.
  Vector sigma_diag;
  std::optional<Matrix> sigma_dense;
  long t = 1;
  double kappa = 0.6;
  double alpha_star = 0.4;
  bool diagonal_only = true;
  /// Forces gamma = 0; the chain then runs with the initial kernel.
  bool frozen = false;

  int dim() const { return static_cast<int>(mu.size()); }
  double sigma() const { return std::exp(log_sigma); }
};

struct DefaultInitialization {
  double sigma0;
  double alpha_star;
};

/// Initial global scale and target acceptance. Sigma_0 is the identity.
DefaultInitialization default_initialization(Family family, int d);

/// gamma_t = t^{-kappa}.
double learning_rate(long t, double kappa);

/// Fresh state with mu = 0 and Sigma = I.
AdaptationState make_adaptation_state(Family family, int d, double kappa = 0.6,
                                      bool diagonal_only = true,
                                      std::optional<double> alpha_star = std::nullopt,
                                      std::optional<double> sigma0 = std::nullopt);

/// One step of the scale, mean and covariance recursions driven by the
/// current point x and the acceptance probability of the move proposed from it.
void adapt_update(AdaptationState& state, const Vector& x, double accept_prob);

/// Kernel with sigma = exp(log_sigma) and local scales sqrt(diag Sigma), or the
/// Cholesky factor of the dense Sigma. HMC kernels only take the global scale.
ProposalKernel adapted_kernel(const AdaptationState& state, const ProposalKernel& base);

/// Recorded adaptation path; row k holds the state after update k.
struct AdaptationTrace {
  std::vector<long> t;
  std::vector<double> log_sigma;
  std::vector<Vector> sigma_diag;

  void record(const AdaptationState& state);
};

/// Columns: t, log_sigma, sigma_1..sigma_d (diagonal of Sigma_t).
void write_adaptation_csv(const AdaptationTrace& trace, const std::string& path);

}  // namespace barker
