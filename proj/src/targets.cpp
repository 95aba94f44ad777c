#include "barker/targets.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace barker {

std::string to_string(TargetKind kind) {
  switch (kind) {
    case TargetKind::HeterogeneousGaussian: return "HeterogeneousGaussian";
    case TargetKind::Hyperbolic: return "Hyperbolic";
    case TargetKind::SkewNormal: return "SkewNormal";
    case TargetKind::ExponentialFamily: return "ExponentialFamily";
    case TargetKind::IIDProduct: return "IIDProduct";
    case TargetKind::PoissonHierarchical: return "PoissonHierarchical";
    case TargetKind::LogLinear: return "LogLinear";
  }
  return "Unknown";
}

namespace {

// Mills ratio Phi(-u) / phi(u) for u >= 5 by backward evaluation of the
// continued fraction 1/(u + 1/(u + 2/(u + 3/(u + ...)))).
double mills_ratio(double u) {
  double f = u;
  for (int k = 120; k >= 1; --k) f = u + k / f;
  return 1.0 / f;
}

constexpr double kMillsSwitch = -5.0;

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

double log_normal_cdf(double t) {
  if (t >= kMillsSwitch) return std::log(0.5 * std::erfc(-t / std::sqrt(2.0)));
  const double u = -t;
  return -0.5 * u * u - 0.5 * kLogTwoPi + std::log(mills_ratio(u));
}

double normal_hazard_ratio(double t) {
  if (t >= kMillsSwitch) {
    const double phi = std::exp(-0.5 * t * t - 0.5 * kLogTwoPi);
    return phi / (0.5 * std::erfc(-t / std::sqrt(2.0)));
  }
  return 1.0 / mills_ratio(-t);
}

double hyperbolic_unit_variance(double epsilon) {
  const double delta = std::sqrt(epsilon);
  return delta * std::cyl_bessel_k(2.0, delta) / std::cyl_bessel_k(1.0, delta);
}

namespace detail {

class TargetImpl {
 public:
  TargetImpl(int dim, TargetKind kind, TargetParams params)
      : dim(dim), kind(kind), params(std::move(params)) {}
  virtual ~TargetImpl() = default;

  virtual double value(const Vector& x) const = 0;
  virtual double value_and_grad(const Vector& x, Vector& g) const = 0;
  virtual std::optional<Vector> draw(Rng&) const { return std::nullopt; }
  virtual std::optional<Vector> scales() const {
    if (!known_cov) return std::nullopt;
    return Vector(known_cov->array().sqrt());
  }
  virtual nlohmann::json describe() const = 0;

  int dim;
  TargetKind kind;
  TargetParams params;
  std::optional<Vector> known_mean;
  std::optional<Vector> known_cov;
};

namespace {

class GaussianImpl final : public TargetImpl {
 public:
  GaussianImpl(Vector mean, Vector scales)
      : TargetImpl(static_cast<int>(scales.size()), TargetKind::HeterogeneousGaussian,
                   GaussianParams{mean, scales}),
        mean_(std::move(mean)),
        inv_var_(scales.array().square().inverse()),
        scales_(std::move(scales)) {
    log_norm_ = -scales_.array().log().sum() - 0.5 * dim * kLogTwoPi;
    known_mean = mean_;
    known_cov = Vector(scales_.array().square());
  }

  double value(const Vector& x) const override {
    return -0.5 * ((x - mean_).array().square() * inv_var_.array()).sum() + log_norm_;
  }
  double value_and_grad(const Vector& x, Vector& g) const override {
    g = -((x - mean_).array() * inv_var_.array()).matrix();
    return value(x);
  }
  std::optional<Vector> draw(Rng& rng) const override {
    Vector x(dim);
    for (int i = 0; i < dim; ++i) x[i] = mean_[i] + scales_[i] * rng.normal();
    return x;
  }
  std::optional<Vector> scales() const override { return scales_; }
  nlohmann::json describe() const override {
    return {{"kind", to_string(kind)}, {"dim", dim}, {"mean", to_std(mean_)},
            {"scales", to_std(scales_)}, {"offset", "normalized"}};
  }

 private:
  Vector mean_;
  Vector inv_var_;
  Vector scales_;
  double log_norm_ = 0.0;
};

class HyperbolicImpl final : public TargetImpl {
 public:
  HyperbolicImpl(Vector scales, double epsilon)
      : TargetImpl(static_cast<int>(scales.size()), TargetKind::Hyperbolic,
                   HyperbolicParams{scales, epsilon}),
        scales_(std::move(scales)),
        eps_(epsilon) {
    known_mean = Vector::Zero(dim);
    known_cov = Vector(scales_.array().square() * hyperbolic_unit_variance(eps_));
  }

  double value(const Vector& x) const override {
    double s = 0.0;
    for (int i = 0; i < dim; ++i) {
      const double u = x[i] / scales_[i];
      s -= std::sqrt(eps_ + u * u);
    }
    return s;
  }
  double value_and_grad(const Vector& x, Vector& g) const override {
    g.resize(dim);
    double s = 0.0;
    for (int i = 0; i < dim; ++i) {
      const double u = x[i] / scales_[i];
      const double r = std::sqrt(eps_ + u * u);
      s -= r;
      g[i] = -u / (r * scales_[i]);
    }
    return s;
  }
  // Rejection from a unit Laplace envelope: exp(-sqrt(eps+u^2)) <= exp(-|u|).
  std::optional<Vector> draw(Rng& rng) const override {
    Vector x(dim);
    for (int i = 0; i < dim; ++i) {
      for (;;) {
        const double e = -std::log1p(-rng.uniform());
        const double u = rng.uniform() < 0.5 ? -e : e;
        if (rng.uniform() < std::exp(e - std::sqrt(eps_ + u * u))) {
          x[i] = scales_[i] * u;
          break;
        }
      }
    }
    return x;
  }
  std::optional<Vector> scales() const override { return scales_; }
  nlohmann::json describe() const override {
    return {{"kind", to_string(kind)}, {"dim", dim}, {"epsilon", eps_},
            {"scales", to_std(scales_)}, {"offset", "zero"}};
  }

 private:
  Vector scales_;
  double eps_;
};

class SkewNormalImpl final : public TargetImpl {
 public:
  SkewNormalImpl(Vector scales, double alpha)
      : TargetImpl(static_cast<int>(scales.size()), TargetKind::SkewNormal,
                   SkewNormalParams{scales, alpha}),
        scales_(std::move(scales)),
        alpha_(alpha) {
    const double delta = alpha_ / std::sqrt(1.0 + alpha_ * alpha_);
    known_mean = Vector(scales_ * (delta * std::sqrt(2.0 / kPi)));
    known_cov = Vector(scales_.array().square() * (1.0 - 2.0 * delta * delta / kPi));
  }

  double value(const Vector& x) const override {
    double s = 0.0;
    for (int i = 0; i < dim; ++i) {
      const double u = x[i] / scales_[i];
      s += -0.5 * u * u + log_normal_cdf(alpha_ * u);
    }
    return s;
  }
  double value_and_grad(const Vector& x, Vector& g) const override {
    g.resize(dim);
    double s = 0.0;
    for (int i = 0; i < dim; ++i) {
      const double u = x[i] / scales_[i];
      s += -0.5 * u * u + log_normal_cdf(alpha_ * u);
      g[i] = (-u + alpha_ * normal_hazard_ratio(alpha_ * u)) / scales_[i];
    }
    return s;
  }
  std::optional<Vector> draw(Rng& rng) const override {
    const double delta = alpha_ / std::sqrt(1.0 + alpha_ * alpha_);
    const double rest = std::sqrt(1.0 - delta * delta);
    Vector x(dim);
    for (int i = 0; i < dim; ++i) {
      const double u0 = rng.normal();
      const double u1 = rng.normal();
      x[i] = scales_[i] * (delta * std::abs(u0) + rest * u1);
    }
    return x;
  }
  std::optional<Vector> scales() const override { return scales_; }
  nlohmann::json describe() const override {
    return {{"kind", to_string(kind)}, {"dim", dim}, {"alpha", alpha_},
            {"scales", to_std(scales_)}, {"offset", "zero"}};
  }

 private:
  Vector scales_;
  double alpha_;
};

class ExponentialFamilyImpl final : public TargetImpl {
 public:
  ExponentialFamilyImpl(int d, double alpha, double beta)
      : TargetImpl(d, TargetKind::ExponentialFamily, ExponentialFamilyParams{d, alpha, beta}),
        alpha_(alpha),
        beta_(beta) {
    known_mean = Vector::Zero(dim);
    const double log_r2 = -2.0 / beta_ * std::log(alpha_) + std::lgamma((d + 2.0) / beta_) -
                          std::lgamma(d / beta_);
    known_cov = Vector::Constant(dim, std::exp(log_r2) / d);
  }

  double value(const Vector& x) const override {
    return -alpha_ * std::pow(x.norm(), beta_);
  }
  // Gradient at the origin is defined as zero for every beta.
  double value_and_grad(const Vector& x, Vector& g) const override {
    const double r = x.norm();
    if (r == 0.0) {
      g = Vector::Zero(dim);
      return 0.0;
    }
    const double rb = std::pow(r, beta_);
    g = (-alpha_ * beta_ * rb / (r * r)) * x;
    return -alpha_ * rb;
  }
  nlohmann::json describe() const override {
    return {{"kind", to_string(kind)}, {"dim", dim}, {"alpha", alpha_},
            {"beta", beta_}, {"offset", "zero"}};
  }

 private:
  double alpha_;
  double beta_;
};

class IIDProductImpl final : public TargetImpl {
 public:
  IIDProductImpl(int d, Profile1d profile)
      : TargetImpl(d, TargetKind::IIDProduct, IIDProductParams{d, profile}),
        profile_(std::move(profile)) {
    if (profile_.mean) known_mean = Vector::Constant(dim, *profile_.mean);
    if (profile_.variance) known_cov = Vector::Constant(dim, *profile_.variance);
  }

  double value(const Vector& x) const override {
    double s = 0.0;
    for (int i = 0; i < dim; ++i) s += profile_.log_density(x[i]);
    return s;
  }
  double value_and_grad(const Vector& x, Vector& g) const override {
    g.resize(dim);
    double s = 0.0;
    for (int i = 0; i < dim; ++i) {
      s += profile_.log_density(x[i]);
      g[i] = profile_.derivative(x[i]);
    }
    return s;
  }
  nlohmann::json describe() const override {
    return {{"kind", to_string(kind)}, {"dim", dim}, {"profile", profile_.name}};
  }

 private:
  Profile1d profile_;
};

class PoissonImpl final : public TargetImpl {
 public:
  explicit PoissonImpl(PoissonDataset data)
      : TargetImpl(data.num_groups() + 1, TargetKind::PoissonHierarchical, PoissonParams{data}),
        sigma_(data.sigma_eta),
        prior_sd_(data.prior_sd_mu) {
    const int groups = data.num_groups();
    sums_.resize(groups);
    sizes_.resize(groups);
    for (int i = 0; i < groups; ++i) {
      double s = 0.0;
      for (auto y : data.groups[i]) {
        s += static_cast<double>(y);
        log_fact_ += std::lgamma(static_cast<double>(y) + 1.0);
      }
      sums_[i] = s;
      sizes_[i] = static_cast<double>(data.groups[i].size());
    }
  }

  // Layout: x = (mu, eta_1, ..., eta_I).
  double value(const Vector& x) const override {
    const double mu = x[0];
    double s = -log_fact_;
    for (int i = 0; i < sums_.size(); ++i) {
      const double eta = x[i + 1];
      const double r = (eta - mu) / sigma_;
      s += sums_[i] * eta - sizes_[i] * std::exp(eta) - 0.5 * r * r;
    }
    s -= sums_.size() * (std::log(sigma_) + 0.5 * kLogTwoPi);
    const double m = mu / prior_sd_;
    s += -0.5 * m * m - std::log(prior_sd_) - 0.5 * kLogTwoPi;
    return s;
  }
  double value_and_grad(const Vector& x, Vector& g) const override {
    g.resize(dim);
    const double mu = x[0];
    const double inv_var = 1.0 / (sigma_ * sigma_);
    double dmu = -mu / (prior_sd_ * prior_sd_);
    for (int i = 0; i < sums_.size(); ++i) {
      const double resid = (x[i + 1] - mu) * inv_var;
      g[i + 1] = sums_[i] - sizes_[i] * std::exp(x[i + 1]) - resid;
      dmu += resid;
    }
    g[0] = dmu;
    return value(x);
  }
  nlohmann::json describe() const override {
    const auto& data = std::get<PoissonParams>(params).data;
    return {{"kind", to_string(kind)}, {"dim", dim}, {"groups", data.num_groups()},
            {"sigma_eta", data.sigma_eta}, {"prior_sd_mu", data.prior_sd_mu},
            {"mu_star", data.mu_star}, {"data_seed", data.seed},
            {"layout", "(mu, eta_1..eta_I)"}};
  }

 private:
  Vector sums_;
  Vector sizes_;
  double sigma_;
  double prior_sd_;
  double log_fact_ = 0.0;
};

class LogLinearImpl final : public TargetImpl {
 public:
  LogLinearImpl(Vector slope, double offset)
      : TargetImpl(static_cast<int>(slope.size()), TargetKind::LogLinear,
                   LogLinearParams{slope, offset}),
        slope_(std::move(slope)),
        offset_(offset) {}

  double value(const Vector& x) const override { return slope_.dot(x) + offset_; }
  double value_and_grad(const Vector& x, Vector& g) const override {
    g = slope_;
    return value(x);
  }
  nlohmann::json describe() const override {
    return {{"kind", to_string(kind)}, {"dim", dim}, {"slope", to_std(slope_)},
            {"offset", offset_}};
  }

 private:
  Vector slope_;
  double offset_;
};

class ScaledImpl final : public TargetImpl {
 public:
  ScaledImpl(std::shared_ptr<const TargetModel> base, double lambda, int k)
      : TargetImpl(base->dim(), base->kind(), ScaledParams{base, lambda, k}),
        base_(std::move(base)),
        lambda_(lambda),
        k_(k),
        log_jacobian_(-k * std::log(lambda)) {
    if (base_->known_mean()) {
      Vector m = *base_->known_mean();
      m.head(k_) *= lambda_;
      known_mean = m;
    }
    if (base_->known_cov_diag()) {
      Vector c = *base_->known_cov_diag();
      c.head(k_) *= lambda_ * lambda_;
      known_cov = c;
    }
  }

  double value(const Vector& x) const override {
    return log_jacobian_ + base_->log_density(shrink(x));
  }
  double value_and_grad(const Vector& x, Vector& g) const override {
    const double v = base_->log_density_and_grad(shrink(x), g);
    g.head(k_) /= lambda_;
    return log_jacobian_ + v;
  }
  std::optional<Vector> draw(Rng& rng) const override {
    auto x = base_->exact_draw(rng);
    if (x) x->head(k_) *= lambda_;
    return x;
  }
  std::optional<Vector> scales() const override {
    auto s = base_->scales();
    if (s) s->head(k_) *= lambda_;
    return s;
  }
  nlohmann::json describe() const override {
    return {{"kind", to_string(kind)}, {"dim", dim}, {"lambda", lambda_}, {"k", k_},
            {"base", base_->describe()}};
  }

 private:
  Vector shrink(const Vector& x) const {
    Vector z = x;
    z.head(k_) /= lambda_;
    return z;
  }

  std::shared_ptr<const TargetModel> base_;
  double lambda_;
  int k_;
  double log_jacobian_;
};

}  // namespace
}  // namespace detail

TargetModel::TargetModel(std::shared_ptr<const detail::TargetImpl> impl)
    : impl_(std::move(impl)) {}

int TargetModel::dim() const { return impl_->dim; }
TargetKind TargetModel::kind() const { return impl_->kind; }
const TargetParams& TargetModel::params() const { return impl_->params; }

namespace {
void check_dim(const Vector& x, int dim) {
  if (x.size() != dim) {
    std::ostringstream msg;
    msg << "target expects dimension " << dim << ", got " << x.size();
    throw UsageError(msg.str());
  }
}
}  // namespace

double TargetModel::log_density(const Vector& x) const {
  check_dim(x, impl_->dim);
  return impl_->value(x);
}

Vector TargetModel::grad_log_density(const Vector& x) const {
  check_dim(x, impl_->dim);
  Vector g;
  impl_->value_and_grad(x, g);
  return g;
}

double TargetModel::log_density_and_grad(const Vector& x, Vector& grad) const {
  check_dim(x, impl_->dim);
  return impl_->value_and_grad(x, grad);
}

const std::optional<Vector>& TargetModel::known_mean() const { return impl_->known_mean; }
const std::optional<Vector>& TargetModel::known_cov_diag() const { return impl_->known_cov; }
std::optional<Vector> TargetModel::scales() const { return impl_->scales(); }
nlohmann::json TargetModel::describe() const { return impl_->describe(); }
std::optional<Vector> TargetModel::exact_draw(Rng& rng) const { return impl_->draw(rng); }

namespace {
void require_positive(const Vector& v, const char* what) {
  if (v.size() == 0) throw UsageError(std::string(what) + " must be non-empty");
  if (!(v.array() > 0.0).all() || !v.allFinite())
    throw UsageError(std::string(what) + " must be positive and finite");
}
}  // namespace

TargetModel make_gaussian(const Vector& scales) {
  return make_gaussian(Vector::Zero(scales.size()), scales);
}

TargetModel make_gaussian(const Vector& mean, const Vector& scales) {
  require_positive(scales, "gaussian scales");
  if (mean.size() != scales.size()) throw UsageError("gaussian mean/scales size mismatch");
  return TargetModel(std::make_shared<detail::GaussianImpl>(mean, scales));
}

TargetModel make_hyperbolic(const Vector& scales, double epsilon) {
  require_positive(scales, "hyperbolic scales");
  if (!(epsilon > 0.0)) throw UsageError("hyperbolic epsilon must be positive");
  return TargetModel(std::make_shared<detail::HyperbolicImpl>(scales, epsilon));
}

TargetModel make_skew_normal(const Vector& scales, double alpha) {
  require_positive(scales, "skew-normal scales");
  if (!std::isfinite(alpha)) throw UsageError("skew-normal alpha must be finite");
  return TargetModel(std::make_shared<detail::SkewNormalImpl>(scales, alpha));
}

TargetModel make_exponential_family(int dim, double alpha, double beta) {
  if (dim < 1) throw UsageError("exponential family dimension must be >= 1");
  if (!(alpha > 0.0) || !(beta > 0.0))
    throw UsageError("exponential family alpha and beta must be positive");
  return TargetModel(std::make_shared<detail::ExponentialFamilyImpl>(dim, alpha, beta));
}

TargetModel make_iid_product(int dim, Profile1d profile) {
  if (dim < 1) throw UsageError("iid product dimension must be >= 1");
  if (!profile.log_density || !profile.derivative)
    throw UsageError("iid product profile needs log_density and derivative");
  return TargetModel(std::make_shared<detail::IIDProductImpl>(dim, std::move(profile)));
}

TargetModel make_poisson_hierarchical(PoissonDataset data) {
  data.validate();
  if (!(data.sigma_eta > 0.0))
    throw UsageError("posterior requires sigma_eta > 0");
  return TargetModel(std::make_shared<detail::PoissonImpl>(std::move(data)));
}

TargetModel make_log_linear(const Vector& slope, double offset) {
  if (slope.size() == 0) throw UsageError("log-linear slope must be non-empty");
  return TargetModel(std::make_shared<detail::LogLinearImpl>(slope, offset));
}

TargetModel scale_family(const TargetModel& model, double lambda, int k) {
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw UsageError("scale_family: lambda must be positive");
  if (k < 1 || k > model.dim()) throw UsageError("scale_family: k must lie in [1, dim]");
  return TargetModel(std::make_shared<detail::ScaledImpl>(
      std::make_shared<const TargetModel>(model), lambda, k));
}

}  // namespace barker
