#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "barker/diagnostics.hpp"
#include "barker/sampler.hpp"
#include "barker/targets.hpp"

using namespace barker;

namespace {

Trace trace_from(const std::vector<double>& xs, const std::vector<double>& ys,
                 const std::vector<double>& alphas) {
  Trace t;
  t.initial = Vector::Constant(1, xs.front());
  const long n = static_cast<long>(ys.size());
  t.samples.resize(n, 1);
  t.proposals.resize(n, 1);
  t.accept_prob.resize(n);
  t.proposed_sq_jump.resize(n);
  for (long i = 0; i < n; ++i) {
    t.proposals(i, 0) = ys[i];
    t.samples(i, 0) = xs[i + 1];
    t.accept_prob[i] = alphas[i];
    t.proposed_sq_jump[i] = (ys[i] - xs[i]) * (ys[i] - xs[i]);
    t.accepted.push_back(xs[i + 1] == ys[i]);
  }
  return t;
}

Vector ar1(double rho, long n, Rng& rng) {
  Vector v(n);
  double x = rng.normal() / std::sqrt(1 - rho * rho);
  for (long i = 0; i < n; ++i) {
    x = rho * x + rng.normal();
    v[i] = x;
  }
  return v;
}

}  // namespace

TEST(Esjd, TrivialCases) {
  // Never accepted: Rao-Blackwellised ESJD 0.
  const Trace stuck = trace_from({0, 0, 0}, {1, -1}, {0.0, 0.0});
  EXPECT_EQ(esjd(stuck), 0.0);
  EXPECT_EQ(esjd_naive(stuck), 0.0);
  // Always accepted unit jumps.
  const Trace moving = trace_from({0, 1, 2, 1}, {1, 2, 1}, {1.0, 1.0, 1.0});
  EXPECT_EQ(esjd(moving), 1.0);
  EXPECT_EQ(esjd_naive(moving), 1.0);
  const Trace half = trace_from({0, 0}, {2}, {0.5});
  EXPECT_EQ(esjd(half), 2.0);
}

TEST(Esjd, SmallStepRwm) {
  // sigma^2 * E[alpha] ~ 0.01 * (2/pi) atan(20).
  const TargetModel t = make_gaussian(Vector::Ones(1));
  Rng rng(8);
  const Trace tr = run_chain(Vector::Zero(1), ProposalKernel::rwm(0.1), t, 100000, rng);
  const double v = esjd(tr);
  EXPECT_GE(v, 0.008);
  EXPECT_LE(v, 0.010);
  EXPECT_NEAR(esjd_per_coordinate(tr), v, 1e-15);
  EXPECT_NEAR(esjd_naive(tr), v, 0.0005);
}

TEST(Ess, IidSeries) {
  Rng rng(1);
  Vector v(20000);
  for (auto& e : v) e = rng.normal();
  const double r = ess(v) / v.size();
  EXPECT_GE(r, 0.95);
  EXPECT_LE(r, 1.05);
}

TEST(Ess, Ar1) {
  // (1 - rho) / (1 + rho) = 1/3 at rho = 0.5.
  Rng rng(2);
  double total = 0.0;
  for (int rep = 0; rep < 10; ++rep) total += ess(ar1(0.5, 100000, rng)) / 100000.0;
  EXPECT_NEAR(total / 10, 1.0 / 3.0, 0.02);
}

TEST(Ess, ConstantAndAffineInvariance) {
  EXPECT_EQ(ess(Vector::Constant(100, 3.0)), 0.0);
  Rng rng(3);
  const Vector v = ar1(0.8, 5000, rng);
  const Vector w = (3.0 * v.array() + 7.0).matrix();
  EXPECT_NEAR(ess(v), ess(w), 1e-8 * ess(v));
  EXPECT_THROW(ess(Vector::Zero(5)), UsageError);
}

TEST(Ess, AutocovarianceMatchesDirectSum) {
  Rng rng(4);
  const Vector v = ar1(0.3, 257, rng);
  const Vector g = autocovariance(v);
  const double m = v.mean();
  for (int k : {0, 1, 5, 100, 256}) {
    double s = 0.0;
    for (int i = 0; i + k < v.size(); ++i) s += (v[i] - m) * (v[i + k] - m);
    EXPECT_NEAR(g[k], s / v.size(), 1e-12);
  }
}

TEST(Ess, BatchMeansOnIid) {
  Rng rng(5);
  Vector v(50000);
  for (auto& e : v) e = rng.normal();
  EXPECT_NEAR(batch_means_se(v), 1.0 / std::sqrt(50000.0), 0.25 / std::sqrt(50000.0));
}

TEST(Tv, ShiftedGaussians) {
  const auto p = [](double x) { return std::exp(-0.5 * x * x) / std::sqrt(2 * M_PI); };
  const auto q = [](double x) { return std::exp(-0.5 * (x - 1) * (x - 1)) / std::sqrt(2 * M_PI); };
  const double expected = std::erf(0.5 / std::sqrt(2.0));  // 2 Phi(1/2) - 1
  EXPECT_NEAR(expected, 0.38292, 1e-5);
  EXPECT_NEAR(tv_distance_1d(p, q, -20, 20), expected, 1e-8);
  EXPECT_NEAR(tv_distance_1d(q, p, -20, 20), tv_distance_1d(p, q, -20, 20), 1e-14);
  EXPECT_NEAR(tv_distance_1d(p, p, -20, 20), 0.0, 1e-15);
}

TEST(Tv, IntegrateAdaptive) {
  EXPECT_NEAR(integrate_adaptive([](double x) { return std::sin(x); }, 0, M_PI), 2.0, 1e-10);
  EXPECT_NEAR(integrate_adaptive([](double x) { return std::sqrt(x); }, 0, 1), 2.0 / 3, 1e-9);
}

TEST(TuningDistance, Examples) {
  const int d = 16;
  const Vector truth = Vector::Ones(d);
  EXPECT_EQ(tuning_distance(truth, truth), 0.0);
  // One coordinate off by a factor e^2.
  Vector s = truth;
  s[0] = std::exp(2.0);
  EXPECT_NEAR(tuning_distance(s, truth), 2.0 / std::sqrt(double(d)), 1e-15);
  // Invariant to a common rescaling of both arguments.
  Vector t = (Vector::Random(d).array().abs() + 0.1).matrix();
  Vector u = (Vector::Random(d).array().abs() + 0.1).matrix();
  EXPECT_NEAR(tuning_distance(t, u), tuning_distance(5.0 * t, 5.0 * u), 1e-13);
  EXPECT_THROW(tuning_distance(t, Vector::Ones(3)), UsageError);
}

TEST(TauAdapt, Examples) {
  EXPECT_EQ(tau_adapt({3.0, 2.0, 1.5}), std::nullopt);
  EXPECT_EQ(format_tau(std::nullopt, 20000), ">20000");
  EXPECT_EQ(tau_adapt({0.5, 2.0}), 1);
  std::vector<double> d(600, 2.0);
  d[523] = 1.0;
  EXPECT_EQ(tau_adapt(d), 524);
  EXPECT_EQ(format_tau(524, 600), "524");
}

TEST(Mse, IidDraws) {
  // Mean of n/2 post-burn-in iid N(0,1) draws has squared error 2/n.
  const int d = 100;
  const long n = 20000;
  MseAccumulator acc(Vector::Zero(d), Vector::Ones(d), {n / 2, n});
  Rng rng(6);
  Vector x(d);
  for (long t = 0; t < n; ++t) {
    for (auto& e : x) e = rng.normal();
    acc.push(x);
  }
  EXPECT_NEAR(acc.mse(1), 1e-4, 0.3e-4);
  EXPECT_NEAR(acc.mse(0), 2e-4, 0.6e-4);
  MseAccumulator early(Vector::Zero(1), Vector::Ones(1), {10});
  EXPECT_TRUE(std::isnan(early.mse(0)));
}

TEST(Mse, ScaledCoordinates) {
  // x_i / eta_i rescales the error.
  MseAccumulator acc(Vector::Zero(2), (Vector(2) << 1.0, 10.0).finished(), {2});
  acc.push((Vector(2) << 0.0, 0.0).finished());
  acc.push((Vector(2) << 1.0, 10.0).finished());
  EXPECT_NEAR(acc.mse(0), 1.0, 1e-15);
}

TEST(AcceptanceOrder, GaussianExponents) {
  const TargetModel t = make_gaussian(Vector::Ones(1));
  std::vector<double> grid;
  for (int i = 0; i < 9; ++i) grid.push_back(std::pow(10.0, -3.0 + 0.25 * i));
  EXPECT_NEAR(acceptance_order_fit(Family::RWM, t, 0.7, 1.0, grid).fit.slope, 1.0, 0.05);
  EXPECT_NEAR(acceptance_order_fit(Family::MALA, t, 0.7, 1.0, grid).fit.slope, 3.0, 0.05);
  EXPECT_NEAR(acceptance_order_fit(Family::Barker, t, 0.7, 1.0, grid).fit.slope, 3.0, 0.05);
}

TEST(FitLine, ExactLine) {
  const LinearFit f = fit_line({1, 2, 3, 4}, {3, 5, 7, 9});
  EXPECT_NEAR(f.slope, 2.0, 1e-14);
  EXPECT_NEAR(f.intercept, 1.0, 1e-14);
  EXPECT_NEAR(f.r2, 1.0, 1e-14);
}
