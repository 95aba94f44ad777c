#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "barker/gap_lab.hpp"
#include "barker/targets.hpp"

using namespace barker;

namespace {

Vector normalized(const Vector& w) { return w / w.sum(); }

}  // namespace

TEST(GapLab, IndependenceChainHasUnitGap) {
  const Vector pi = normalized((Vector(5) << 1.0, 3.0, 2.0, 0.5, 4.0).finished());
  Matrix P(5, 5);
  for (int i = 0; i < 5; ++i) P.row(i) = pi.transpose();
  const GridChain c = grid_chain_from_matrix(P, pi);
  EXPECT_NEAR(spectral_gap(c), 1.0, 1e-12);
  EXPECT_NEAR(spectral_gap_direct(c), 1.0, 1e-12);
  // Phi(K) = pi(K^c) for a rank-one chain.
  const std::vector<int> K = {0, 2};
  EXPECT_NEAR(conductance(c, K), 1.0 - pi[0] - pi[2], 1e-14);
}

TEST(GapLab, TwoPointChain) {
  for (double p : {0.5, 0.1, 1e-3, 1e-9}) {
    const Matrix P = (Matrix(2, 2) << 1 - p, p, p, 1 - p).finished();
    const GridChain c = grid_chain_from_matrix(P, Vector::Constant(2, 0.5));
    EXPECT_NEAR(spectral_gap(c) / (2 * p), 1.0, 1e-12) << p;
  }
}

TEST(GapLab, BirthDeathChainWithTinyGap) {
  // Nearest-neighbour walk on a path with a deep valley in the middle; the
  // accurate route must keep relative precision where 1 - lambda_2 is lost.
  const int n = 30;
  Vector grid = Vector::LinSpaced(n, 0.0, n - 1.0);
  Vector log_pi(n);
  for (int i = 0; i < n; ++i) log_pi[i] = std::abs(i - 14.5) * 3.0;
  const auto log_q = [](int i, int j) { return std::abs(i - j) == 1 ? std::log(0.5) : -INFINITY; };
  const GridChain c = grid_chain_from_log_weights(grid, log_pi, log_q);
  const GapEstimate g = spectral_gap_accurate(c);
  EXPECT_GT(g.gap, 0.0L);
  EXPECT_LT(g.log_gap, std::log(1e-15));
  // Gap <= 2 Phi for the right half, the bottleneck of this chain.
  std::vector<int> K;
  for (int i = 15; i < n; ++i) K.push_back(i);
  EXPECT_LE(static_cast<double>(g.gap), 2 * conductance(c, K) * (1 + 1e-10));
  EXPECT_GT(static_cast<double>(g.gap), 1e-3 * conductance(c, K));
}

TEST(GapLab, GridChainResiduals) {
  const TargetModel t = make_hyperbolic(Vector::Ones(1), 0.1);
  for (const auto& k : {ProposalKernel::rwm(2.0), ProposalKernel::mala(1.2),
                        ProposalKernel::barker(1.8),
                        ProposalKernel::generic_lb(1.5, metropolis_balancing())}) {
    const GridChain c = build_grid_chain(t, k, 201, 10.0);
    EXPECT_LE(row_sum_residual(c), 1e-10) << to_string(k.family);
    EXPECT_LE(reversibility_residual(c), 1e-10) << to_string(k.family);
    const Matrix P = c.transition();
    EXPECT_GE(P.minCoeff(), 0.0);
  }
}

TEST(GapLab, RwmGridRefinementStable) {
  const TargetModel t = make_gaussian(Vector::Ones(1));
  const ProposalKernel k = ProposalKernel::rwm(2.4);
  const double g200 = spectral_gap(build_grid_chain(t, k, 200, 8.0));
  const double g400 = spectral_gap(build_grid_chain(t, k, 400, 8.0));
  const double g400l = spectral_gap(build_grid_chain(t, k, 400, 10.0));
  EXPECT_NEAR(g400 / g200, 1.0, 0.02);
  EXPECT_NEAR(g400l / g400, 1.0, 0.02);
}

TEST(GapLab, AccurateAndDirectRoutesAgree) {
  const TargetModel t = make_gaussian(Vector::Ones(1));
  for (const auto& k : {ProposalKernel::rwm(2.4), ProposalKernel::mala(1.3),
                        ProposalKernel::barker(1.9), ProposalKernel::rwm(0.2)}) {
    const GridChain c = build_grid_chain(t, k, 241, 8.0);
    const double a = spectral_gap(c), d = spectral_gap_direct(c);
    ASSERT_GT(d, 1e-6);
    EXPECT_NEAR(a / d, 1.0, 1e-8) << to_string(k.family);
  }
}

TEST(GapLab, ConductanceUpperBound) {
  // The indicator of K gives Gap <= Phi(K) / pi(K^c), hence Gap <= 2 Phi(K)
  // whenever pi(K) <= 1/2.
  Rng rng(3);
  const TargetModel t = make_skew_normal(Vector::Ones(1), 4.0);
  for (const auto& k : {ProposalKernel::rwm(1.0), ProposalKernel::mala(0.8),
                        ProposalKernel::barker(1.0)}) {
    const GridChain c = build_grid_chain(t, k, 161, 8.0);
    const double gap = spectral_gap(c);
    const auto mass = [&](const std::vector<int>& K) {
      double m = 0.0;
      for (int i : K) m += static_cast<double>(c.pi[i]);
      return m;
    };
    std::vector<int> right = right_half(c), left;
    for (int i = 0; i < c.size(); ++i)
      if (c.grid[i] <= 0.0) left.push_back(i);
    const auto& small = mass(right) <= 0.5 ? right : left;
    EXPECT_LE(gap, 2 * conductance(c, small) + 1e-12);
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<int> K;
      for (int i = 0; i < c.size(); ++i)
        if (rng.uniform() < 0.3) K.push_back(i);
      if (K.empty() || K.size() == static_cast<std::size_t>(c.size())) continue;
      EXPECT_LE(gap, conductance(c, K) / (1.0 - mass(K)) + 1e-12);
      if (mass(K) <= 0.5) {
        EXPECT_LE(gap, 2 * conductance(c, K) + 1e-12);
      }
    }
  }
}

TEST(GapLab, ConductanceGrowsWithSmallSteps) {
  const TargetModel t = make_gaussian(Vector::Ones(1));
  double prev = 0.0;
  for (double s : {0.05, 0.1, 0.2, 0.5, 1.0}) {
    const GridChain c = build_grid_chain(t, ProposalKernel::rwm(s), 401, 8.0);
    const double phi = conductance(c, right_half(c));
    EXPECT_GT(phi, prev) << s;
    prev = phi;
  }
}

TEST(GapLab, RwmDominatesHalfGlobalFlipGap) {
  // The Barker candidate density is at most twice the random-walk one, so
  // Gap(RWM) >= Gap(global flip) / 2 holds exactly on the grid.
  Rng rng(2024);
  for (int rep = 0; rep < 5; ++rep) {
    const double scale = std::exp(rng.normal());
    TargetModel t = make_gaussian(Vector::Constant(1, scale));
    if (rep % 3 == 1) t = make_hyperbolic(Vector::Constant(1, scale), 0.1 + rng.uniform());
    if (rep % 3 == 2) t = make_skew_normal(Vector::Constant(1, scale), 8 * rng.uniform() - 4);
    const double sigma = std::exp(rng.normal()) * scale;
    const double L = 10.0 * scale;
    const GridChain r = build_grid_chain(t, ProposalKernel::rwm(sigma), 241, L);
    const GridChain b = build_grid_chain(t, ProposalKernel::barker_global_flip(sigma), 241, L);
    const double gr = spectral_gap(r), gb = spectral_gap(b);
    EXPECT_GE(gr, gb / 2 - 1e-12) << "rep " << rep << " sigma " << sigma;
  }
}

TEST(GapLab, DecaySweepRows) {
  const TargetModel t = make_gaussian(Vector::Ones(1));
  GapSweepOptions opt;
  opt.points_per_scale = 10;
  const auto rows = gap_decay_sweep(ProposalKernel::rwm(2.2), t, {1.0, 0.5, 0.25}, opt);
  ASSERT_EQ(rows.size(), 3u);
  for (const auto& row : rows) {
    EXPECT_EQ(row.family, "RWM");
    EXPECT_TRUE(row.stable);
    EXPECT_GE(row.n, opt.min_points);
    EXPECT_NEAR(row.L, 8.0 * row.lambda, 1e-12);
    EXPECT_NEAR(std::log(row.gap), row.log_gap, 1e-12);
    EXPECT_LE(row.gap, 2 * row.conductance_right + 1e-12);
    // Gap(lambda) >= lambda Gap(1) up to grid error.
    EXPECT_GE(row.gap / row.lambda, rows[0].gap * 0.9);
  }
  EXPECT_THROW(gap_decay_sweep(ProposalKernel::rwm(1.0), make_gaussian(Vector::Ones(2)), {1.0}),
               UsageError);
  EXPECT_THROW(
      gap_decay_sweep(ProposalKernel::hmc(1.0, 3), t, {1.0}), UsageError);
}

TEST(GapLab, GapOptimalSigmaIsInterior) {
  const TargetModel t = make_gaussian(Vector::Ones(1));
  GapSweepOptions opt;
  opt.points_per_scale = 10;
  const double s = gap_optimal_sigma(ProposalKernel::rwm(1.0), t, 0.05, 20.0, opt);
  EXPECT_GT(s, 1.5);
  EXPECT_LT(s, 3.5);
  const auto gap_at = [&](double sigma) {
    return spectral_gap(build_grid_chain(t, ProposalKernel::rwm(sigma), 161, 8.0));
  };
  EXPECT_GE(gap_at(s), gap_at(0.8 * s));
  EXPECT_GE(gap_at(s), gap_at(1.25 * s));
}
