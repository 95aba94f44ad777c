#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "barker/poisson.hpp"
#include "barker/targets.hpp"

using namespace barker;

namespace {

Vector random_point(Rng& rng, int d, double scale) {
  Vector x(d);
  for (int i = 0; i < d; ++i) x[i] = scale * rng.normal();
  return x;
}

// Central differences with step 1e-5; returns the largest relative error.
double fd_error(const TargetModel& t, const Vector& x) {
  const double h = 1e-5;
  const Vector g = t.grad_log_density(x);
  double worst = 0.0;
  for (int i = 0; i < t.dim(); ++i) {
    Vector xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    const double fd = (t.log_density(xp) - t.log_density(xm)) / (2 * h);
    worst = std::max(worst, std::abs(fd - g[i]) / std::max(1.0, std::abs(g[i])));
  }
  return worst;
}

PoissonDataset small_dataset() {
  PoissonDataset data;
  data.groups = {{3, 0, 5}, {12, 9}, {0, 1, 0, 2}};
  data.sigma_eta = 1.7;
  data.prior_sd_mu = 10.0;
  data.mu_star = 1.0;
  return data;
}

// Straightforward re-derivation of the Poisson random-effects posterior.
double poisson_log_posterior_oracle(const PoissonDataset& data, const Vector& x) {
  const double mu = x[0];
  double s = 0.0;
  for (int i = 0; i < data.num_groups(); ++i) {
    const double eta = x[i + 1];
    for (auto y : data.groups[i])
      s += y * eta - std::exp(eta) - std::lgamma(static_cast<double>(y) + 1.0);
    const double r = (eta - mu) / data.sigma_eta;
    s += -0.5 * r * r - std::log(data.sigma_eta) - 0.5 * std::log(2 * M_PI);
  }
  const double r = mu / data.prior_sd_mu;
  s += -0.5 * r * r - std::log(data.prior_sd_mu) - 0.5 * std::log(2 * M_PI);
  return s;
}

}  // namespace

TEST(Targets, GaussianNormalizedAtOrigin) {
  const TargetModel t = make_gaussian(Vector::Ones(2));
  EXPECT_NEAR(t.log_density(Vector::Zero(2)), -std::log(2 * M_PI), 1e-14);
}

TEST(Targets, HyperbolicAtOrigin) {
  const TargetModel t = make_hyperbolic(Vector::Ones(1), 0.1);
  EXPECT_NEAR(t.log_density(Vector::Zero(1)), -std::sqrt(0.1), 1e-15);
}

TEST(Targets, GaussianScoreIsMinusX) {
  const TargetModel t = make_gaussian(Vector::Ones(4));
  Rng rng(1);
  const Vector x = random_point(rng, 4, 3.0);
  EXPECT_LT((t.grad_log_density(x) + x).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Targets, ExponentialFamilyGradient) {
  const TargetModel t = make_exponential_family(1, 1.0, 4.0);
  EXPECT_NEAR(t.grad_log_density(Vector::Constant(1, 2.0))[0], -32.0, 1e-12);
  // Defined as zero at the mode.
  const TargetModel flat = make_exponential_family(3, 1.0, 1.5);
  EXPECT_EQ(flat.grad_log_density(Vector::Zero(3)).norm(), 0.0);
}

TEST(Targets, SkewNormalDeepTailGradient) {
  const TargetModel t = make_skew_normal(Vector::Ones(1), 4.0);
  EXPECT_LT(fd_error(t, Vector::Constant(1, -3.0)), 1e-6);
  // alpha * x = -40 is far past where phi/Phi underflows naively.
  const Vector g = t.grad_log_density(Vector::Constant(1, -10.0));
  EXPECT_TRUE(std::isfinite(g[0]));
  EXPECT_LT(fd_error(t, Vector::Constant(1, -10.0)), 1e-6);
}

TEST(Targets, GradientMatchesFiniteDifferencesForEveryKind) {
  Rng rng(2024);
  Vector scales(3);
  scales << 0.5, 1.0, 2.0;
  std::vector<TargetModel> models = {
      make_gaussian(scales),
      make_hyperbolic(scales, 0.1),
      make_skew_normal(scales, 4.0),
      make_exponential_family(3, 0.7, 3.0),
      make_log_linear((Vector(3) << 1.0, -2.0, 0.5).finished(), 0.3),
      make_poisson_hierarchical(small_dataset()),
      scale_family(make_hyperbolic(scales, 0.1), 0.2, 2),
  };
  Profile1d logistic_profile{"logistic",
                             [](double u) { return -u - 2.0 * softplus(-u); },
                             [](double u) { return -1.0 + 2.0 * logistic(-u); },
                             0.0, M_PI * M_PI / 3.0};
  models.push_back(make_iid_product(3, logistic_profile));
  for (const auto& m : models) {
    for (int rep = 0; rep < 100; ++rep) {
      const Vector x = random_point(rng, m.dim(), 1.5);
      ASSERT_LT(fd_error(m, x), 1e-6) << m.describe().dump();
      ASSERT_TRUE(std::isfinite(m.log_density(x)));
    }
  }
}

TEST(Targets, GradientContinuousAcrossZero) {
  for (const TargetModel& t : {make_hyperbolic(Vector::Ones(1), 0.1),
                               make_skew_normal(Vector::Ones(1), 4.0)}) {
    const double left = t.grad_log_density(Vector::Constant(1, -1e-7))[0];
    const double right = t.grad_log_density(Vector::Constant(1, 1e-7))[0];
    EXPECT_NEAR(left, right, 1e-5);
  }
}

TEST(Targets, DimensionMismatchThrows) {
  const TargetModel t = make_gaussian(Vector::Ones(3));
  EXPECT_THROW(t.log_density(Vector::Zero(2)), UsageError);
  EXPECT_THROW(t.grad_log_density(Vector::Zero(4)), UsageError);
}

TEST(Targets, KnownMomentsMatchQuadrature) {
  // Skew-normal with alpha=4: mean sqrt(2/pi) delta, delta = alpha/sqrt(1+alpha^2).
  const TargetModel sn = make_skew_normal(Vector::Constant(1, 2.0), 4.0);
  const double delta = 4.0 / std::sqrt(17.0);
  EXPECT_NEAR((*sn.known_mean())[0], 2.0 * std::sqrt(2.0 / M_PI) * delta, 1e-12);
  EXPECT_NEAR((*sn.known_cov_diag())[0], 4.0 * (1.0 - 2.0 * delta * delta / M_PI), 1e-12);

  // Hyperbolic variance by a plain trapezoid rule on [-60, 60].
  const TargetModel hy = make_hyperbolic(Vector::Ones(1), 0.1);
  double z = 0.0, m2 = 0.0;
  const double h = 1e-3;
  for (double u = -60.0; u <= 60.0; u += h) {
    const double p = std::exp(hy.log_density(Vector::Constant(1, u)));
    z += p * h;
    m2 += u * u * p * h;
  }
  EXPECT_NEAR((*hy.known_cov_diag())[0], m2 / z, 1e-6);
  EXPECT_NEAR(hyperbolic_unit_variance(0.1), m2 / z, 1e-6);
}

TEST(Targets, ScaleFamily) {
  Rng rng(5);
  const TargetModel base = make_hyperbolic((Vector(3) << 1.0, 2.0, 0.5).finished(), 0.1);
  const TargetModel same = scale_family(base, 1.0, 2);
  for (int i = 0; i < 20; ++i) {
    const Vector x = random_point(rng, 3, 2.0);
    EXPECT_EQ(same.log_density(x), base.log_density(x));
  }

  const TargetModel g = scale_family(make_gaussian(Vector::Ones(1)), 0.1, 1);
  EXPECT_NEAR(g.log_density(Vector::Zero(1)), std::log(10.0) - 0.5 * std::log(2 * M_PI),
              1e-14);

  const TargetModel s1 = scale_family(make_gaussian(Vector::Ones(2)), 0.01, 1);
  EXPECT_NEAR((*s1.known_cov_diag())[0], 1e-4, 1e-18);
  EXPECT_EQ((*s1.known_cov_diag())[1], 1.0);

  // Composition with 1/lambda round-trips the base density.
  for (double lambda : {0.01, 0.3, 7.0}) {
    const TargetModel back = scale_family(scale_family(base, lambda, 2), 1.0 / lambda, 2);
    for (int i = 0; i < 20; ++i) {
      const Vector x = random_point(rng, 3, 2.0);
      EXPECT_NEAR(back.log_density(x), base.log_density(x), 1e-12);
    }
  }

  EXPECT_THROW(scale_family(base, 0.0, 1), UsageError);
  EXPECT_THROW(scale_family(base, 1.0, 4), UsageError);
}

TEST(Targets, LogLinearGradientConstant) {
  const Vector a = (Vector(2) << 0.3, -1.2).finished();
  const TargetModel t = make_log_linear(a, 2.0);
  Rng rng(9);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(t.grad_log_density(random_point(rng, 2, 5.0)), a);
}

TEST(Targets, ExactDrawsHaveKnownMoments) {
  Rng rng(11);
  const Vector scales = (Vector(2) << 0.5, 3.0).finished();
  for (const TargetModel& t :
       {make_gaussian(scales), make_hyperbolic(scales, 0.1), make_skew_normal(scales, 4.0)}) {
    const int n = 100000;
    Vector sum = Vector::Zero(2), sq = Vector::Zero(2);
    for (int i = 0; i < n; ++i) {
      const Vector x = *t.exact_draw(rng);
      sum += x;
      sq += x.cwiseProduct(x);
    }
    const Vector mean = sum / n;
    const Vector var = sq / n - mean.cwiseProduct(mean);
    for (int j = 0; j < 2; ++j) {
      const double se = std::sqrt((*t.known_cov_diag())[j] / n);
      EXPECT_NEAR(mean[j], (*t.known_mean())[j], 5 * se);
      EXPECT_NEAR(var[j] / (*t.known_cov_diag())[j], 1.0, 0.03);
    }
  }
  EXPECT_FALSE(make_exponential_family(2, 1.0, 2.0).exact_draw(rng).has_value());
}

TEST(Poisson, LogPosteriorMatchesIndependentDerivation) {
  const PoissonDataset data = small_dataset();
  const TargetModel t = make_poisson_hierarchical(data);
  ASSERT_EQ(t.dim(), 4);
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const Vector x = random_point(rng, 4, 2.0);
    EXPECT_NEAR(t.log_density(x), poisson_log_posterior_oracle(data, x), 1e-9);
  }
}

TEST(Poisson, DatasetShapeAndDeterminism) {
  const PoissonDataset a = generate_poisson_data(5.0, 1.0, 50, 5, 42);
  const PoissonDataset b = generate_poisson_data(5.0, 1.0, 50, 5, 42);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.num_groups(), 50);
  EXPECT_EQ(a.num_counts(), 250u);
  for (const auto& g : a.groups) {
    EXPECT_EQ(g.size(), 5u);
    for (auto y : g) EXPECT_GE(y, 0);
  }
  EXPECT_NE(a, generate_poisson_data(5.0, 1.0, 50, 5, 43));
}

TEST(Poisson, DegeneratePriorGivesCommonMean) {
  const PoissonDataset d = generate_poisson_data(2.0, 0.0, 1, 10000, 7);
  double sum = 0.0;
  for (auto y : d.groups[0]) sum += y;
  const double mean = sum / 10000.0;
  const double lam = std::exp(2.0);
  EXPECT_NEAR(mean, lam, 3.0 * std::sqrt(lam / 10000.0));
}

TEST(Poisson, OverflowGuardResamples) {
  // eta* ~ N(19, 3^2): a sizeable share of draws exceeds log(1e9) ~ 20.7.
  const PoissonDataset d = generate_poisson_data(19.0, 3.0, 200, 1, 1);
  EXPECT_GT(d.overflow_resamples, 0);
  for (const auto& g : d.groups)
    for (auto y : g) EXPECT_LT(static_cast<double>(y), 2.0 * kMaxPoissonMean);
}

TEST(Poisson, JsonRoundTrip) {
  const PoissonDataset a = generate_poisson_data(10.0, 3.0, 50, 5, 99);
  const PoissonDataset b = poisson_dataset_from_json(nlohmann::json::parse(to_json(a).dump()));
  EXPECT_EQ(a, b);
  EXPECT_THROW(poisson_dataset_from_json(nlohmann::json{{"groups", 3}}), UsageError);
}

TEST(Poisson, Validation) {
  PoissonDataset d = small_dataset();
  d.groups[1][0] = -1;
  EXPECT_THROW(d.validate(), UsageError);
  EXPECT_THROW(make_poisson_hierarchical(d), UsageError);
  PoissonDataset e = small_dataset();
  e.sigma_eta = 0.0;
  EXPECT_THROW(make_poisson_hierarchical(e), UsageError);
}
