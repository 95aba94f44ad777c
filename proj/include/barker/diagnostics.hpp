#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "barker/common.hpp"
#include "barker/proposals.hpp"
#include "barker/sampler.hpp"
#include "barker/targets.hpp"

namespace barker {

/// Rao-Blackwellised ESJD: mean over steps of accept_prob_t * ||y_t - x_t||^2.
double esjd(const Trace& trace);
/// esjd / d.
double esjd_per_coordinate(const Trace& trace);
/// Mean realized squared jump ||x_{t} - x_{t-1}||^2.
double esjd_naive(const Trace& trace);

/// Standard error of the mean by non-overlapping batch means.
double batch_means_se(const Vector& series, int batches = 50);

/// Geyer initial monotone sequence ESS, clamped to [0, n]. Constant series
/// give 0. Requires n >= 10.
double ess(const Vector& series);

/// Autocovariances gamma_0..gamma_{n-1} (divisor n) via FFT.
Vector autocovariance(const Vector& series);

/// Running first-moment squared error at fixed checkpoints with burn-in
/// floor(t/2): at checkpoint t the estimate is the mean of h(X^(i)),
/// i = floor(t/2)+1..t, with h(x) = x_i / eta_i.
class MseAccumulator {
 public:
  MseAccumulator(Vector truth_mean, Vector eta, std::vector<long> checkpoints);

  void push(const Vector& x);
  long steps() const { return t_; }
  /// Average over coordinates of the squared error at checkpoints[k];
  /// NaN if not reached yet.
  double mse(std::size_t k) const { return mse_.at(k); }
  const std::vector<long>& checkpoints() const { return checkpoints_; }

 private:
  Vector truth_;
  Vector inv_eta_;
  std::vector<long> checkpoints_;
  std::vector<Vector> burn_sums_;
  std::vector<double> mse_;
  Vector sum_;
  long t_ = 0;
};

/// Average over traces and coordinates of the squared error of the
/// post-burn-in mean of x_i / eta_i after all stored steps. Needs the
/// target's known mean and scales.
double mse_first_moments(const std::vector<Trace>& traces, const TargetModel& target);

/// d_t = ||log diag Sigma_t - log diag Sigma||_2 / sqrt(d).
double tuning_distance(const Vector& sigma_t_diag, const Vector& sigma_true_diag);

/// First 1-based index t with d_t <= epsilon; nullopt when never reached.
std::optional<long> tau_adapt(const std::vector<double>& d_series, double epsilon = 1.0);
/// "524" or ">20000" for a censored series of length n.
std::string format_tau(std::optional<long> tau, long n);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};
LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

struct AcceptanceOrderFit {
  LinearFit fit;
  std::vector<double> sigma;
  std::vector<double> log_abs_log_ratio;
};

/// Fits log|log r(x, x + sigma u)| against log sigma, where r is the
/// untruncated Metropolis-Hastings ratio of `family` at scale sigma on a 1-d
/// target. Using |log r| instead of |log min(1, r)| keeps points where r > 1
/// (the reverse move then has log alpha = -log r).
AcceptanceOrderFit acceptance_order_fit(Family family, const TargetModel& target1d, double x,
                                        double u, const std::vector<double>& sigma_grid);

using Density1d = std::function<double(double)>;

/// Adaptive Simpson integral of f on [a, b] to absolute tolerance tol.
double integrate_adaptive(const Density1d& f, double a, double b, double tol = 1e-10);

/// 0.5 * integral of |a - b| over [lo, hi] by adaptive Simpson.
double tv_distance_1d(const Density1d& a, const Density1d& b, double lo, double hi,
                      double tol = 1e-10);

/// sup |F_n - F| with F(t) = integral of `density` from `lo` to t, evaluated
/// exactly at the sample points by adaptive quadrature between them.
double ks_distance(std::vector<double> samples, const Density1d& density, double lo,
                   double tol = 1e-12);

}  // namespace barker
