#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

#include <gtest/gtest.h>

#include "barker/diagnostics.hpp"
#include "barker/sampler.hpp"
#include "barker/targets.hpp"

using namespace barker;

namespace {

double std_normal_cdf(double t) { return 0.5 * std::erfc(-t / std::sqrt(2.0)); }

std::vector<ProposalKernel> all_kernels() {
  return {ProposalKernel::rwm(1.5),       ProposalKernel::mala(1.0),
          ProposalKernel::barker(1.5),    ProposalKernel::barker_global_flip(1.5),
          ProposalKernel::malta(1.0, 2.0), ProposalKernel::maltac(1.0),
          ProposalKernel::hmc(0.3, 5),
          ProposalKernel::generic_lb(1.5, metropolis_balancing())};
}

}  // namespace

TEST(Sampler, SameSeedSameChain) {
  const TargetModel t = make_hyperbolic(Vector::Ones(3), 0.1);
  for (const auto& k : all_kernels()) {
    Rng a(42), b(42);
    const Trace ta = run_chain(Vector::Zero(3), k, t, 500, a);
    const Trace tb = run_chain(Vector::Zero(3), k, t, 500, b);
    EXPECT_EQ(ta.samples, tb.samples) << to_string(k.family);
    EXPECT_EQ(ta.accept_prob, tb.accept_prob);
  }
}

TEST(Sampler, AcceptedStepsMoveToProposal) {
  const TargetModel t = make_skew_normal((Vector(2) << 1.0, 3.0).finished(), 4.0);
  for (const auto& k : all_kernels()) {
    Rng rng(7);
    const Trace tr = run_chain(Vector::Zero(2), k, t, 2000, rng);
    Vector prev = tr.initial;
    for (long i = 0; i < tr.n_steps(); ++i) {
      const Vector cur = tr.samples.row(i).transpose();
      if (tr.accepted[i]) {
        ASSERT_EQ(cur, tr.proposals.row(i).transpose());
      } else {
        ASSERT_EQ(cur, prev);
      }
      ASSERT_GE(tr.accept_prob[i], 0.0);
      ASSERT_LE(tr.accept_prob[i], 1.0);
      ASSERT_NEAR(tr.proposed_sq_jump[i], (tr.proposals.row(i).transpose() - prev).squaredNorm(),
                  1e-12);
      prev = cur;
    }
  }
}

TEST(Sampler, ProposalAtCurrentPointIsAccepted) {
  // A zero-length HMC trajectory is impossible, but sigma -> 0 gives y -> x.
  const TargetModel t = make_gaussian(Vector::Ones(2));
  Rng rng(1);
  ChainState s = make_chain_state(t, Vector::Ones(2), Family::Barker);
  const StepResult r = mh_step(s, ProposalKernel::barker(1e-300), t, rng);
  EXPECT_EQ(r.accept_prob, 1.0);
  EXPECT_TRUE(r.accepted);
}

TEST(Sampler, RwmAcceptanceMatchesClosedForm) {
  // For N(0,1) at stationarity, E[alpha] = (2/pi) atan(2/sigma).
  const TargetModel t = make_gaussian(Vector::Ones(1));
  Rng rng(11);
  const Trace tr = run_chain(Vector::Zero(1), ProposalKernel::rwm(2.4), t, 200000, rng,
                             {false, false, {}});
  EXPECT_NEAR(2.0 / M_PI * std::atan(2.0 / 2.4), 0.4423, 1e-4);
  EXPECT_NEAR(tr.mean_accept(), 2.0 / M_PI * std::atan(2.0 / 2.4), 0.02);
}

TEST(Sampler, MeanWithinMonteCarloError) {
  const Vector mean = (Vector(2) << 1.0, -2.0).finished();
  const TargetModel t = make_gaussian(mean, (Vector(2) << 1.0, 0.5).finished());
  for (const auto& k : {ProposalKernel::barker(1.2), ProposalKernel::mala(0.8)}) {
    Rng rng(5);
    const Trace tr = run_chain(mean, k, t, 40000, rng);
    for (int j = 0; j < 2; ++j) {
      const Vector col = tr.samples.col(j);
      EXPECT_LT(std::abs(col.mean() - mean[j]), 4 * batch_means_se(col)) << to_string(k.family);
    }
  }
}

TEST(Sampler, StationarityIsPreserved) {
  // Chains started from exact draws must stay marginally N(0,1).
  const TargetModel t = make_gaussian(Vector::Ones(1));
  for (const auto& k : all_kernels()) {
    Rng rng(99);
    std::vector<double> pooled;
    for (int c = 0; c < 1000; ++c) {
      const Vector x0 = *t.exact_draw(rng);
      const Trace tr = run_chain(x0, k, t, 50, rng);
      for (long i = 0; i < 50; ++i) pooled.push_back(tr.samples(i, 0));
    }
    const auto density = [](double x) { return std::exp(-0.5 * x * x) / std::sqrt(2 * M_PI); };
    EXPECT_LE(ks_distance(pooled, density, -12.0), 0.02) << to_string(k.family);
    // Cross-check against the closed-form CDF at a few quantiles.
    std::sort(pooled.begin(), pooled.end());
    for (double q : {-1.0, 0.0, 1.0}) {
      const double emp = std::lower_bound(pooled.begin(), pooled.end(), q) - pooled.begin();
      EXPECT_NEAR(emp / pooled.size(), std_normal_cdf(q), 0.02);
    }
  }
}

TEST(Sampler, GradientCallAccounting) {
  const TargetModel t = make_gaussian(Vector::Ones(2));
  Rng rng(3);
  EXPECT_EQ(run_chain(Vector::Zero(2), ProposalKernel::rwm(1.0), t, 100, rng).grad_evals, 0);
  EXPECT_EQ(run_chain(Vector::Zero(2), ProposalKernel::mala(1.0), t, 100, rng).grad_evals, 100);
  EXPECT_EQ(run_chain(Vector::Zero(2), ProposalKernel::barker(1.0), t, 100, rng).grad_evals, 100);
  EXPECT_EQ(run_chain(Vector::Zero(2), ProposalKernel::hmc(0.1, 10), t, 100, rng).grad_evals,
            1100);
}

TEST(Sampler, DivergentProposalsAreRejected) {
  // Exponential-family target with a huge MALA step throws the chain to
  // regions where the log-density overflows.
  const TargetModel t = make_exponential_family(1, 1.0, 8.0);
  Rng rng(2);
  const Trace tr = run_chain(Vector::Constant(1, 3.0), ProposalKernel::mala(5.0), t, 200, rng);
  for (long i = 0; i < tr.n_steps(); ++i) ASSERT_TRUE(std::isfinite(tr.accept_prob[i]));
  EXPECT_EQ(tr.samples(tr.n_steps() - 1, 0), 3.0);
}

TEST(Sampler, AdaptiveObserverSeesEveryStep) {
  const TargetModel t = make_gaussian(Vector::Ones(2));
  Rng rng(4);
  long calls = 0;
  AdaptiveOptions opt;
  opt.record_every = 10;
  opt.observer = [&](const ChainState&, const StepResult&, const AdaptationState& a) {
    ++calls;
    EXPECT_EQ(a.t, calls + 1);
  };
  const AdaptiveRun run =
      run_chain_adaptive(Vector::Zero(2), ProposalKernel::barker(1.0),
                         make_adaptation_state(Family::Barker, 2), t, 100, rng, opt);
  EXPECT_EQ(calls, 100);
  EXPECT_EQ(run.adaptation.t.size(), 10u);
  EXPECT_EQ(run.final_state.t, 101);
}

TEST(Sampler, TraceCsvHasHeaderAndRows) {
  const TargetModel t = make_gaussian(Vector::Ones(2));
  Rng rng(1);
  const Trace tr = run_chain(Vector::Zero(2), ProposalKernel::barker(1.0), t, 5, rng);
  const std::string path = ::testing::TempDir() + "trace.csv";
  write_trace_csv(tr, path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t,x_1,x_2,accept_prob,accepted");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 5);
  std::remove(path.c_str());
}
