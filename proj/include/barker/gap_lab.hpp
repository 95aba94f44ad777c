#pragma once

#include <functional>
#include <string>
#include <vector>

#include "barker/common.hpp"
#include "barker/proposals.hpp"
#include "barker/targets.hpp"

namespace barker {

using LMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
using LVector = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

/// Reversible chain on a uniform grid. Off-diagonal probability flows
/// pi_i P_ij are kept in extended precision so that transition
/// probabilities far below the double range still count.
struct GridChain {
  Vector grid;
  double dx = 0.0;
  /// Normalized stationary weights.
  LVector pi;
  /// Symmetric off-diagonal flows F_ij = pi_i P_ij (zero diagonal).
  LMatrix flows;
  /// Factor (<= 1) applied to all flows so that no row exceeds 1.
  long double flow_scale = 1.0L;

  int size() const { return static_cast<int>(grid.size()); }
  /// Row-stochastic transition matrix in double precision.
  Matrix transition() const;
};

/// Builds a chain from unnormalized log weights and discrete log proposal
/// probabilities log q_ij (i != j). Flows are min(pi_i q_ij, pi_j q_ji).
GridChain grid_chain_from_log_weights(const Vector& grid, const Vector& log_pi,
                                      const std::function<double(int, int)>& log_q);

/// Builds a chain from an explicit reversible transition matrix.
GridChain grid_chain_from_matrix(const Matrix& P, const Vector& pi);

/// n grid points on [-L, L]; P_ij from the 1-d proposal density of `kernel`
/// times dx, with the Metropolis-Hastings symmetrization above.
GridChain build_grid_chain(const TargetModel& target1d, const ProposalKernel& kernel, int n,
                           double L);

/// max_i |sum_j P_ij - 1|.
double row_sum_residual(const GridChain& chain);
/// max_ij |pi_i P_ij - pi_j P_ji| computed from the double transition matrix.
double reversibility_residual(const GridChain& chain);

struct GapEstimate {
  long double gap = 0.0L;
  /// log(gap); -inf for a reducible chain.
  double log_gap = 0.0;
};

/// Right spectral gap through the grounded Laplacian inverse: elimination
/// without subtraction gives an entrywise accurate Green's function, and the
/// gap is 1 / lambda_max of its pi-centered symmetric form. Accurate even
/// when the gap is far below machine epsilon.
GapEstimate spectral_gap_accurate(const GridChain& chain);
/// spectral_gap_accurate(chain).gap as a double (may underflow to 0).
double spectral_gap(const GridChain& chain);
/// 1 - second largest eigenvalue of D^{1/2} P D^{-1/2}. Absolute accuracy
/// is limited to about 1e-15.
double spectral_gap_direct(const GridChain& chain);

/// Phi(K) = sum_{i in K, j not in K} pi_i P_ij / pi(K).
double conductance(const GridChain& chain, const std::vector<int>& K);
/// Indices with grid value > 0.
std::vector<int> right_half(const GridChain& chain);

struct GapSweepOptions {
  /// Half-width in units of the base target's largest sd, scaled by lambda.
  double half_width_sds = 8.0;
  /// Points per unit of lambda * sd: dx <= lambda * sd / points_per_scale.
  double points_per_scale = 10.0;
  int min_points = 161;
  /// Also solve with 2n - 1 points and report the relative change.
  bool refine = true;
  double refine_tolerance = 0.02;
};

struct GapSweepRow {
  std::string family;
  double lambda = 0.0;
  int n = 0;
  double L = 0.0;
  double gap = 0.0;
  double log_gap = 0.0;
  double conductance_right = 0.0;
  double refined_log_gap = 0.0;
  /// |gap_2n / gap_n - 1|.
  double refinement_change = 0.0;
  /// refinement_change <= refine_tolerance, or for gaps below 1e-8 a
  /// log-gap change within refine_tolerance * |log gap|.
  bool stable = true;
};

/// Scale in [lo, hi] maximizing the grid gap of `kernel` on the 1-d `base`
/// (grid as in gap_decay_sweep at lambda = 1).
double gap_optimal_sigma(const ProposalKernel& kernel, const TargetModel& base, double lo,
                         double hi, const GapSweepOptions& options = {});

/// Gaps of the fixed `kernel` targeting
/// scale_family(base, lambda, 1) for each lambda; base must be 1-d.
std::vector<GapSweepRow> gap_decay_sweep(const ProposalKernel& kernel,
                                         const TargetModel& base,
                                         const std::vector<double>& lambda_grid,
                                         const GapSweepOptions& options = {});

}  // namespace barker
