#include "barker/gap_lab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

namespace barker {

Matrix GridChain::transition() const {
  const int n = size();
  Matrix P(n, n);
  for (int i = 0; i < n; ++i) {
    long double off = 0.0L;
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const long double p = flows(i, j) / pi[i];
      P(i, j) = static_cast<double>(p);
      off += p;
    }
    P(i, i) = static_cast<double>(1.0L - off);
  }
  return P;
}

GridChain grid_chain_from_log_weights(const Vector& grid, const Vector& log_pi,
                                      const std::function<double(int, int)>& log_q) {
  const int n = static_cast<int>(grid.size());
  if (n < 2 || log_pi.size() != n) throw UsageError("grid chain needs >= 2 matching points");
  GridChain c;
  c.grid = grid;
  c.dx = n > 1 ? grid[1] - grid[0] : 0.0;
  const double top = log_pi.maxCoeff();
  LVector w(n);
  for (int i = 0; i < n; ++i) w[i] = std::exp(static_cast<long double>(log_pi[i] - top));
  const long double total = w.sum();
  c.pi = w / total;
  const long double log_total = std::log(total) + top;

  Matrix lq(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) lq(i, j) = i == j ? 0.0 : log_q(i, j);

  c.flows = LMatrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const long double a = log_pi[i] + lq(i, j);
      const long double b = log_pi[j] + lq(j, i);
      const long double f = std::exp(std::min(a, b) - log_total);
      c.flows(i, j) = f;
      c.flows(j, i) = f;
    }
  }
  long double worst = 0.0L;
  for (int i = 0; i < n; ++i) worst = std::max(worst, c.flows.row(i).sum() / c.pi[i]);
  if (worst > 1.0L) {
    c.flow_scale = 1.0L / worst;
    c.flows *= c.flow_scale;
  }
  return c;
}

GridChain grid_chain_from_matrix(const Matrix& P, const Vector& pi) {
  const int n = static_cast<int>(P.rows());
  if (P.cols() != n || pi.size() != n || n < 2)
    throw UsageError("grid_chain_from_matrix: shape mismatch");
  GridChain c;
  c.grid = Vector::LinSpaced(n, 0.0, n - 1.0);
  c.dx = 1.0;
  c.pi = pi.cast<long double>() / static_cast<long double>(pi.sum());
  c.flows = LMatrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const long double f = 0.5L * (c.pi[i] * P(i, j) + c.pi[j] * P(j, i));
      c.flows(i, j) = f;
      c.flows(j, i) = f;
    }
  return c;
}

GridChain build_grid_chain(const TargetModel& target1d, const ProposalKernel& kernel, int n,
                           double L) {
  if (target1d.dim() != 1) throw UsageError("build_grid_chain: target must be 1-d");
  if (kernel.family == Family::HMC)
    throw UsageError("build_grid_chain: HMC has no tractable proposal density");
  if (n < 2 || !(L > 0.0)) throw UsageError("build_grid_chain: need n >= 2 and L > 0");
  kernel.validate();
  const Vector grid = Vector::LinSpaced(n, -L, L);
  const double log_dx = std::log(grid[1] - grid[0]);
  Vector log_pi(n), grad(n);
  Vector xv(1), g;
  for (int i = 0; i < n; ++i) {
    xv[0] = grid[i];
    log_pi[i] = target1d.log_density_and_grad(xv, g);
    grad[i] = uses_gradient(kernel.family) ? g[0] : 0.0;
  }
  // Rows of log q are computed once; the GenericLB normalizer depends only
  // on the row.
  Matrix lq(n, n);
  Vector yv(1), gv(1);
  for (int i = 0; i < n; ++i) {
    xv[0] = grid[i];
    gv[0] = grad[i];
    if (kernel.family == Family::GenericLB) {
      const double s = kernel.sigma * (kernel.local_scales ? (*kernel.local_scales)[0] : 1.0);
      const double log_z = lb_log_normalizer(*kernel.balancing, grad[i] * s);
      for (int j = 0; j < n; ++j) {
        const double w = grid[j] - grid[i];
        lq(i, j) = kernel.balancing->log_g(grad[i] * w) + log_normal_pdf(w, s) - log_z;
      }
    } else {
      for (int j = 0; j < n; ++j) {
        yv[0] = grid[j];
        lq(i, j) = log_proposal_density(kernel, xv, gv, yv);
      }
    }
  }
  return grid_chain_from_log_weights(grid, log_pi,
                                     [&](int i, int j) { return lq(i, j) + log_dx; });
}

double row_sum_residual(const GridChain& chain) {
  const Matrix P = chain.transition();
  return (P.rowwise().sum().array() - 1.0).abs().maxCoeff();
}

double reversibility_residual(const GridChain& chain) {
  const Matrix P = chain.transition();
  const Vector pi = chain.pi.cast<double>();
  double worst = 0.0;
  for (int i = 0; i < chain.size(); ++i)
    for (int j = i + 1; j < chain.size(); ++j)
      worst = std::max(worst, std::abs(pi[i] * P(i, j) - pi[j] * P(j, i)));
  return worst;
}

GapEstimate spectral_gap_accurate(const GridChain& chain) {
  const int n = chain.size();
  int ground = 0;
  chain.pi.maxCoeff(&ground);
  // Reduced Laplacian with the ground node removed: off-diagonal weights m
  // and slack s (flow into the ground node).
  std::vector<int> keep;
  for (int i = 0; i < n; ++i)
    if (i != ground) keep.push_back(i);
  const int m = n - 1;
  LMatrix w(m, m);
  LVector slack(m);
  for (int a = 0; a < m; ++a) {
    for (int b = 0; b < m; ++b) w(a, b) = a == b ? 0.0L : chain.flows(keep[a], keep[b]);
    slack[a] = chain.flows(keep[a], ground);
  }
  // Elimination in which each pivot is recomputed as slack plus remaining
  // off-diagonal weight, so no subtraction ever occurs.
  LVector pivot(m);
  for (int k = 0; k < m; ++k) {
    long double d = slack[k];
    for (int j = k + 1; j < m; ++j) d += w(k, j);
    if (!(d > 0.0L)) return {0.0L, -std::numeric_limits<double>::infinity()};
    pivot[k] = d;
    for (int i = k + 1; i < m; ++i) {
      const long double wik = w(i, k);
      if (wik == 0.0L) continue;
      const long double f = wik / d;
      slack[i] += f * slack[k];
      for (int j = k + 1; j < m; ++j)
        if (j != i) w(i, j) += f * w(k, j);
    }
  }
  // Inverse (I - U)^{-1} D^{-1} (I - U^T)^{-1}, U_kj = w(k, j) / pivot_k for
  // j > k. Both triangular solves add nonnegative terms only.
  LMatrix inv_lt = LMatrix::Identity(m, m);  // (I - U^T)^{-1}, lower triangular
  for (int col = 0; col < m; ++col) {
    for (int i = col + 1; i < m; ++i) {
      long double acc = 0.0L;
      for (int k = col; k < i; ++k) acc += (w(k, i) / pivot[k]) * inv_lt(k, col);
      inv_lt(i, col) = acc;
    }
  }
  LMatrix green = LMatrix::Zero(n, n);
  for (int a = 0; a < m; ++a) {
    for (int b = 0; b <= a; ++b) {
      long double acc = 0.0L;
      for (int k = a; k < m; ++k) acc += inv_lt(k, a) * inv_lt(k, b) / pivot[k];
      green(keep[a], keep[b]) = acc;
      green(keep[b], keep[a]) = acc;
    }
  }
  // M = D^{1/2} (I - 1 pi^T) G (I - pi 1^T) D^{1/2}.
  const LVector gpi = green * chain.pi;
  const long double pgp = chain.pi.dot(gpi);
  LMatrix centered = green;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) centered(i, j) += pgp - gpi[i] - gpi[j];
  const LVector root = chain.pi.cwiseSqrt();
  const LMatrix M = root.asDiagonal() * centered * root.asDiagonal();
  Eigen::SelfAdjointEigenSolver<LMatrix> es(M, Eigen::EigenvaluesOnly);
  const long double top = es.eigenvalues().maxCoeff();
  if (!(top > 0.0L)) return {0.0L, -std::numeric_limits<double>::infinity()};
  return {1.0L / top, -static_cast<double>(std::log(top))};
}

double spectral_gap(const GridChain& chain) {
  return static_cast<double>(spectral_gap_accurate(chain).gap);
}

double spectral_gap_direct(const GridChain& chain) {
  const int n = chain.size();
  const Matrix P = chain.transition();
  Matrix S(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      S(i, j) = i == j ? P(i, i)
                       : static_cast<double>(chain.flows(i, j) /
                                             std::sqrt(chain.pi[i] * chain.pi[j]));
  Eigen::SelfAdjointEigenSolver<Matrix> es(S, Eigen::EigenvaluesOnly);
  return 1.0 - es.eigenvalues()[n - 2];
}

double conductance(const GridChain& chain, const std::vector<int>& K) {
  std::vector<char> in(chain.size(), 0);
  for (int i : K) {
    if (i < 0 || i >= chain.size()) throw UsageError("conductance: index out of range");
    in[i] = 1;
  }
  long double mass = 0.0L, out = 0.0L;
  for (int i = 0; i < chain.size(); ++i) {
    if (!in[i]) continue;
    mass += chain.pi[i];
    for (int j = 0; j < chain.size(); ++j)
      if (!in[j]) out += chain.flows(i, j);
  }
  if (!(mass > 0.0L)) throw UsageError("conductance: K has zero mass");
  return static_cast<double>(out / mass);
}

std::vector<int> right_half(const GridChain& chain) {
  std::vector<int> K;
  for (int i = 0; i < chain.size(); ++i)
    if (chain.grid[i] > 0.0) K.push_back(i);
  return K;
}

double gap_optimal_sigma(const ProposalKernel& kernel, const TargetModel& base, double lo,
                         double hi, const GapSweepOptions& options) {
  if (base.dim() != 1) throw UsageError("gap_optimal_sigma: base target must be 1-d");
  if (!(lo > 0.0) || !(hi > lo)) throw UsageError("gap_optimal_sigma: bad bracket");
  const auto cov = base.known_cov_diag();
  const double sd = cov ? std::sqrt((*cov)[0]) : 1.0;
  const double L = options.half_width_sds * sd;
  const int n = std::max(options.min_points,
                         static_cast<int>(std::ceil(2.0 * L * options.points_per_scale / sd)) + 1);
  const auto log_gap = [&](double log_sigma) {
    ProposalKernel k = kernel;
    k.sigma = std::exp(log_sigma);
    return spectral_gap_accurate(build_grid_chain(base, k, n, L)).log_gap;
  };
  // Coarse log grid, then golden section around the best point.
  constexpr int kCoarse = 25;
  const double a = std::log(lo), b = std::log(hi), h = (b - a) / (kCoarse - 1);
  int best = 0;
  double best_val = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < kCoarse; ++i) {
    const double v = log_gap(a + i * h);
    if (v > best_val) {
      best_val = v;
      best = i;
    }
  }
  double x0 = a + std::max(0, best - 1) * h;
  double x3 = a + std::min(kCoarse - 1, best + 1) * h;
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = x3 - r * (x3 - x0), x2 = x0 + r * (x3 - x0);
  double f1 = log_gap(x1), f2 = log_gap(x2);
  for (int it = 0; it < 20; ++it) {
    if (f1 >= f2) {
      x3 = x2;
      x2 = x1;
      f2 = f1;
      x1 = x3 - r * (x3 - x0);
      f1 = log_gap(x1);
    } else {
      x0 = x1;
      x1 = x2;
      f1 = f2;
      x2 = x0 + r * (x3 - x0);
      f2 = log_gap(x2);
    }
  }
  return std::exp(f1 >= f2 ? x1 : x2);
}

std::vector<GapSweepRow> gap_decay_sweep(const ProposalKernel& kernel,
                                         const TargetModel& base,
                                         const std::vector<double>& lambda_grid,
                                         const GapSweepOptions& options) {
  if (base.dim() != 1) throw UsageError("gap_decay_sweep: base target must be 1-d");
  if (lambda_grid.empty()) throw UsageError("gap_decay_sweep: empty lambda grid");
  const auto cov = base.known_cov_diag();
  const double sd = cov ? std::sqrt((*cov)[0]) : 1.0;
  std::vector<GapSweepRow> rows;
  for (double lambda : lambda_grid) {
    const TargetModel target = scale_family(base, lambda, 1);
    const double L = options.half_width_sds * sd * lambda;
    const int n = std::max(options.min_points,
                           static_cast<int>(std::ceil(2.0 * L * options.points_per_scale /
                                                      (lambda * sd))) + 1);
    const GridChain chain = build_grid_chain(target, kernel, n, L);
    const GapEstimate g = spectral_gap_accurate(chain);
    GapSweepRow row;
    row.family = to_string(kernel.family);
    row.lambda = lambda;
    row.n = n;
    row.L = L;
    row.gap = static_cast<double>(g.gap);
    row.log_gap = g.log_gap;
    row.conductance_right = conductance(chain, right_half(chain));
    row.refined_log_gap = g.log_gap;
    if (options.refine) {
      const GapEstimate fine = spectral_gap_accurate(build_grid_chain(target, kernel, 2 * n - 1, L));
      row.refined_log_gap = fine.log_gap;
      row.refinement_change = std::abs(std::expm1(fine.log_gap - g.log_gap));
      // Gaps far below double resolution are compared on the log scale,
      // where the grid error is a small fraction of log gap.
      const double dlog = std::abs(fine.log_gap - g.log_gap);
      row.stable = row.refinement_change <= options.refine_tolerance ||
                   (g.log_gap < std::log(1e-8) &&
                    dlog <= options.refine_tolerance * std::abs(g.log_gap));
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace barker
