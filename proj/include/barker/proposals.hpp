#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "barker/balancing.hpp"
#include "barker/common.hpp"
#include "barker/targets.hpp"

namespace barker {

enum class Family { RWM, MALA, Barker, BarkerGlobalFlip, MALTA, MALTAc, HMC, GenericLB };

std::string to_string(Family family);
/// Accepts the names produced by to_string, case-insensitively.
Family family_from_string(const std::string& name);
/// True for every family except RWM.
bool uses_gradient(Family family);

inline constexpr double kDefaultMaltaDelta = 1000.0;

/// A proposal family plus its tuning parameters.
///
/// The proposal scale is sigma * A where A is diag(local_scales), the lower
/// factor precond_chol, or the identity. Gaussian base noise only.
struct ProposalKernel {
  Family family = Family::RWM;
  double sigma = 1.0;
  std::optional<Vector> local_scales;
  std::optional<Matrix> precond_chol;
  std::optional<int> hmc_L;
  std::optional<double> malta_delta;
  std::optional<BalancingFunction> balancing;

  /// Throws UsageError when the fields do not match the family.
  void validate() const;
  nlohmann::json describe() const;

  static ProposalKernel rwm(double sigma);
  static ProposalKernel mala(double sigma);
  static ProposalKernel barker(double sigma);
  static ProposalKernel barker_global_flip(double sigma);
  static ProposalKernel malta(double sigma, double delta = kDefaultMaltaDelta);
  static ProposalKernel maltac(double sigma);
  static ProposalKernel hmc(double sigma, int L);
  static ProposalKernel generic_lb(double sigma, BalancingFunction g);
  /// Default kernel of `family` at scale sigma (HMC gets L = 1, GenericLB
  /// gets min(1, t)).
  static ProposalKernel of(Family family, double sigma);
};

struct ProposalAux {
  /// Base noise: the pre-flip draws z~ for Barker, xi for RWM/MALA.
  Vector z;
  /// Barker sign flips (one entry for the global-flip variant).
  std::vector<signed char> flips;
  /// HMC initial and final momenta.
  Vector xi0;
  Vector xiL;
  /// sum_i log Z_i(x) for GenericLB.
  double log_z = 0.0;
  /// GenericLB envelope draws (attempts per coordinate summed).
  long envelope_trials = 0;
  bool divergent = false;
};

struct ProposalOutcome {
  Vector y;
  double log_q_fwd = 0.0;
  /// log q(y, x); NaN until complete_outcome (HMC fills it directly).
  double log_q_rev = std::numeric_limits<double>::quiet_NaN();
  /// log q(y, x) - log q(x, y) in a cancellation-free form.
  double log_correction = std::numeric_limits<double>::quiet_NaN();
  ProposalAux aux;
  /// Filled by hmc_propose, which evaluates the target at y anyway.
  std::optional<double> log_pi_y;
  Vector grad_y;
  /// Gradient evaluations charged to this proposal by the accounting
  /// convention (HMC: L + 1; others: 0, the sampler charges y's gradient).
  int grad_evals = 0;
};

// -- proposal draws --------------------------------------------------------

ProposalOutcome rwm_propose(const Vector& x, const ProposalKernel& kernel, Rng& rng);
ProposalOutcome mala_propose(const Vector& x, const Vector& grad,
                             const ProposalKernel& kernel, Rng& rng);

struct Barker1dDraw {
  double y;
  double z;
  int flip;
  /// log p(x, z) or log(1 - p(x, z)) depending on the flip.
  double log_flip_prob;
};
Barker1dDraw barker_propose_1d(double x, double grad, double sigma, Rng& rng);

/// Coordinatewise (identity or diagonal scales) or preconditioned Barker.
/// Per coordinate the draw order is noise then flip uniform.
ProposalOutcome barker_propose(const Vector& x, const Vector& grad,
                               const ProposalKernel& kernel, Rng& rng);
ProposalOutcome barker_globalflip_propose(const Vector& x, const Vector& grad,
                                          const ProposalKernel& kernel, Rng& rng);
ProposalOutcome lb_propose_generic(const Vector& x, const Vector& grad,
                                   const ProposalKernel& kernel, Rng& rng);
/// Leapfrog with step sigma and L steps, identity mass.
ProposalOutcome hmc_propose(const Vector& x, const Vector& grad,
                            const ProposalKernel& kernel, const TargetModel& target,
                            Rng& rng);

/// Dispatches on kernel.family. `target` is only used by HMC.
ProposalOutcome propose(const ProposalKernel& kernel, const Vector& x, const Vector& grad,
                        const TargetModel& target, Rng& rng);

Vector malta_grad(const Vector& grad, double delta);
Vector maltac_grad(const Vector& grad, double sigma);

// -- densities -------------------------------------------------------------

/// log q(x, y) including all normalizing constants. Not defined for HMC.
double log_proposal_density(const ProposalKernel& kernel, const Vector& x,
                            const Vector& grad_x, const Vector& y);

/// log q(y, x) - log q(x, y) without forming either density. Not defined
/// for HMC.
double log_hastings_correction(const ProposalKernel& kernel, const Vector& x,
                               const Vector& grad_x, const Vector& y,
                               const Vector& grad_y);

/// Fills log_correction once the gradient at y is known, and log_q_rev as
/// log_q_fwd + log_correction.
void complete_outcome(ProposalOutcome& out, const ProposalKernel& kernel, const Vector& x,
                      const Vector& grad_x, const Vector& grad_y);

/// log of the Barker acceptance ratio of the coordinatewise kernel,
/// min(0, ...) not applied to the target ratio: returns
/// sum_i [softplus((x_i - y_i) d_i(x)) - softplus((y_i - x_i) d_i(y))].
double barker_log_correction(const Vector& x, const Vector& y, const Vector& grad_x,
                             const Vector& grad_y);

/// min(0, log pi(y) - log pi(x) + barker_log_correction).
double barker_log_accept(double log_pi_x, double log_pi_y, const Vector& x,
                         const Vector& y, const Vector& grad_x, const Vector& grad_y);

/// 1-d Barker proposal density 2 phi_sigma(w) / (1 + e^{-grad w}), w = y - x.
double barker_log_density_1d(double w, double grad, double sigma);

/// log Z(a) = log E[g(e^{a U})], U ~ N(0, 1). Closed form for the Barker
/// function (1/2), adaptive Gauss-Kronrod otherwise.
double lb_log_normalizer(const BalancingFunction& g, double a);

/// 1-d locally balanced density g(e^{grad w}) phi_sigma(w) / Z(grad sigma).
double lb_log_density_1d(const BalancingFunction& g, double w, double grad, double sigma);

}  // namespace barker
