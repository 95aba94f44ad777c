#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>

#include <nlohmann/json.hpp>

#include "barker/common.hpp"
#include "barker/poisson.hpp"

namespace barker {

enum class TargetKind {
  HeterogeneousGaussian,
  Hyperbolic,
  SkewNormal,
  ExponentialFamily,
  IIDProduct,
  PoissonHierarchical,
  LogLinear,
};

std::string to_string(TargetKind kind);

/// One-dimensional log-density profile for IIDProduct targets.
struct Profile1d {
  std::string name;
  std::function<double(double)> log_density;
  std::function<double(double)> derivative;
  std::optional<double> mean;
  std::optional<double> variance;
};

struct GaussianParams {
  Vector mean;
  Vector scales;  // standard deviations
};

/// log pi(x) = -sum_i sqrt(epsilon + (x_i / eta_i)^2), zero offset.
struct HyperbolicParams {
  Vector scales;
  double epsilon = 0.1;
};

/// log pi(x) = sum_i [-(x_i/eta_i)^2 / 2 + log Phi(alpha x_i / eta_i)], zero offset.
struct SkewNormalParams {
  Vector scales;
  double alpha = 4.0;
};

/// log pi(x) = -alpha ||x||^beta, zero offset.
struct ExponentialFamilyParams {
  int dim = 1;
  double alpha = 1.0;
  double beta = 2.0;
};

struct IIDProductParams {
  int dim = 1;
  Profile1d profile;
};

struct PoissonParams {
  PoissonDataset data;
};

/// log pi(x) = a.x + b (improper; used for first-order exactness checks).
struct LogLinearParams {
  Vector slope;
  double offset = 0.0;
};

class TargetModel;

struct ScaledParams {
  std::shared_ptr<const TargetModel> base;
  double lambda = 1.0;
  int k = 1;
};

using TargetParams =
    std::variant<GaussianParams, HyperbolicParams, SkewNormalParams,
                 ExponentialFamilyParams, IIDProductParams, PoissonParams,
                 LogLinearParams, ScaledParams>;

namespace detail {
class TargetImpl;
}

/// Differentiable unnormalized log-density on R^d.
///
/// Immutable after construction and cheap to copy (shared implementation);
/// all evaluations are pure and may run concurrently.
class TargetModel {
 public:
  int dim() const;
  TargetKind kind() const;
  const TargetParams& params() const;

  /// Unnormalized log-density. Throws UsageError on dimension mismatch.
  double log_density(const Vector& x) const;
  Vector grad_log_density(const Vector& x) const;
  /// Both at once; `grad` is resized as needed.
  double log_density_and_grad(const Vector& x, Vector& grad) const;

  const std::optional<Vector>& known_mean() const;
  const std::optional<Vector>& known_cov_diag() const;
  /// Per-coordinate scale parameters eta_i used to normalize test functions
  /// x_i / eta_i. Falls back to sqrt(known_cov_diag) when the family has no
  /// scale parameter.
  std::optional<Vector> scales() const;

  nlohmann::json describe() const;

  /// Exact draw from the target where an exact sampler is available
  /// (Gaussian, hyperbolic, skew-normal). Returns nullopt otherwise.
  std::optional<Vector> exact_draw(Rng& rng) const;

  explicit TargetModel(std::shared_ptr<const detail::TargetImpl> impl);

 private:
  std::shared_ptr<const detail::TargetImpl> impl_;
};

TargetModel make_gaussian(const Vector& scales);
TargetModel make_gaussian(const Vector& mean, const Vector& scales);
TargetModel make_hyperbolic(const Vector& scales, double epsilon = 0.1);
TargetModel make_skew_normal(const Vector& scales, double alpha);
TargetModel make_exponential_family(int dim, double alpha, double beta);
TargetModel make_iid_product(int dim, Profile1d profile);
TargetModel make_poisson_hierarchical(PoissonDataset data);
TargetModel make_log_linear(const Vector& slope, double offset = 0.0);

/// lambda^{-k} pi(x_1/lambda, ..., x_k/lambda, x_{k+1}, ..., x_d).
TargetModel scale_family(const TargetModel& model, double lambda, int k);

/// log Phi(t), accurate in the far left tail.
double log_normal_cdf(double t);
/// phi(t) / Phi(t), accurate in the far left tail.
double normal_hazard_ratio(double t);

/// Variance of the unit hyperbolic density exp(-sqrt(epsilon + u^2)).
double hyperbolic_unit_variance(double epsilon);

}  // namespace barker
