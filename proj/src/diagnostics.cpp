#include "barker/diagnostics.hpp"

#include <algorithm>
#include <complex>
#include <numeric>

#include <unsupported/Eigen/FFT>

namespace barker {

double esjd(const Trace& trace) {
  if (trace.n_steps() == 0) return 0.0;
  return trace.accept_prob.dot(trace.proposed_sq_jump) / trace.n_steps();
}

double esjd_per_coordinate(const Trace& trace) {
  return esjd(trace) / static_cast<double>(trace.initial.size());
}

double esjd_naive(const Trace& trace) {
  if (trace.n_steps() == 0) return 0.0;
  double s = 0.0;
  for (long t = 0; t < trace.n_steps(); ++t)
    if (trace.accepted[t]) s += trace.proposed_sq_jump[t];
  return s / trace.n_steps();
}

double batch_means_se(const Vector& series, int batches) {
  const long n = series.size();
  if (batches < 2 || n < 2 * batches) throw UsageError("batch_means_se: series too short");
  const long len = n / batches;
  Vector means(batches);
  for (int b = 0; b < batches; ++b) means[b] = series.segment(b * len, len).mean();
  const double m = means.mean();
  const double var = (means.array() - m).square().sum() / (batches - 1);
  return std::sqrt(var / batches);
}

Vector autocovariance(const Vector& series) {
  const long n = series.size();
  long size = 1;
  while (size < 2 * n) size <<= 1;
  std::vector<double> padded(size, 0.0);
  const double mean = series.mean();
  for (long i = 0; i < n; ++i) padded[i] = series[i] - mean;
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, padded);
  for (auto& c : spec) c = std::norm(c);
  std::vector<double> acov;
  fft.inv(acov, spec);
  Vector out(n);
  for (long k = 0; k < n; ++k) out[k] = acov[k] / n;
  return out;
}

double ess(const Vector& series) {
  const long n = series.size();
  if (n < 10) throw UsageError("ess: series needs at least 10 values");
  if (!all_finite(series)) throw UsageError("ess: series has non-finite values");
  const double lo = series.minCoeff();
  const double hi = series.maxCoeff();
  if (lo == hi) return 0.0;
  const Vector acov = autocovariance(series);
  if (!(acov[0] > 0.0)) return 0.0;
  // Pairs Gamma_m = rho_{2m} + rho_{2m+1}, truncated at the first
  // non-positive pair and made monotone.
  double sum = 0.0;
  double prev = std::numeric_limits<double>::infinity();
  for (long m = 0; 2 * m + 1 < n; ++m) {
    double pair = (acov[2 * m] + acov[2 * m + 1]) / acov[0];
    if (pair <= 0.0) break;
    pair = std::min(pair, prev);
    sum += pair;
    prev = pair;
  }
  const double tau = -1.0 + 2.0 * sum;
  if (!(tau > 0.0)) return static_cast<double>(n);
  return std::min(static_cast<double>(n), n / tau);
}

MseAccumulator::MseAccumulator(Vector truth_mean, Vector eta, std::vector<long> checkpoints)
    : checkpoints_(std::move(checkpoints)) {
  if (truth_mean.size() != eta.size()) throw UsageError("MseAccumulator: size mismatch");
  inv_eta_ = eta.cwiseInverse();
  truth_ = truth_mean.cwiseProduct(inv_eta_);
  for (long c : checkpoints_)
    if (c < 2) throw UsageError("MseAccumulator: checkpoints must be >= 2");
  burn_sums_.assign(checkpoints_.size(), Vector::Zero(eta.size()));
  mse_.assign(checkpoints_.size(), std::numeric_limits<double>::quiet_NaN());
  sum_ = Vector::Zero(eta.size());
}

void MseAccumulator::push(const Vector& x) {
  sum_ += x.cwiseProduct(inv_eta_);
  ++t_;
  for (std::size_t k = 0; k < checkpoints_.size(); ++k) {
    const long c = checkpoints_[k];
    if (t_ == c / 2) burn_sums_[k] = sum_;
    if (t_ == c) {
      const double count = static_cast<double>(c - c / 2);
      const Vector est = (sum_ - burn_sums_[k]) / count;
      mse_[k] = (est - truth_).squaredNorm() / static_cast<double>(truth_.size());
    }
  }
}

double mse_first_moments(const std::vector<Trace>& traces, const TargetModel& target) {
  if (traces.empty()) throw UsageError("mse_first_moments: no traces");
  const auto& mean = target.known_mean();
  const auto eta = target.scales();
  if (!mean || !eta) throw UsageError("mse_first_moments: target has no known mean/scales");
  double total = 0.0;
  for (const Trace& tr : traces) {
    const long t = tr.samples.rows();
    if (t < 2) throw UsageError("mse_first_moments: trace has no stored samples");
    MseAccumulator acc(*mean, *eta, {t});
    for (long i = 0; i < t; ++i) acc.push(tr.samples.row(i).transpose());
    total += acc.mse(0);
  }
  return total / static_cast<double>(traces.size());
}

double tuning_distance(const Vector& sigma_t_diag, const Vector& sigma_true_diag) {
  if (sigma_t_diag.size() != sigma_true_diag.size() || sigma_t_diag.size() == 0)
    throw UsageError("tuning_distance: size mismatch");
  const double ss =
      (sigma_t_diag.array().log() - sigma_true_diag.array().log()).square().sum();
  return std::sqrt(ss) / std::sqrt(static_cast<double>(sigma_t_diag.size()));
}

std::optional<long> tau_adapt(const std::vector<double>& d_series, double epsilon) {
  for (std::size_t i = 0; i < d_series.size(); ++i)
    if (d_series[i] <= epsilon) return static_cast<long>(i + 1);
  return std::nullopt;
}

std::string format_tau(std::optional<long> tau, long n) {
  return tau ? std::to_string(*tau) : ">" + std::to_string(n);
}

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw UsageError("fit_line: need >= 2 points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw UsageError("fit_line: x values are all equal");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return f;
}

AcceptanceOrderFit acceptance_order_fit(Family family, const TargetModel& target1d, double x,
                                        double u, const std::vector<double>& sigma_grid) {
  if (target1d.dim() != 1) throw UsageError("acceptance_order_fit: target must be 1-d");
  if (family == Family::HMC) throw UsageError("acceptance_order_fit: HMC is not supported");
  AcceptanceOrderFit out;
  std::vector<double> log_sigma;
  Vector xv(1), yv(1), gx, gy;
  xv[0] = x;
  const double lpx = target1d.log_density_and_grad(xv, gx);
  for (double s : sigma_grid) {
    const ProposalKernel k = ProposalKernel::of(family, s);
    yv[0] = x + s * u;
    const double lpy = target1d.log_density_and_grad(yv, gy);
    const double log_r = lpy - lpx + log_hastings_correction(k, xv, gx, yv, gy);
    const double v = std::log(std::abs(log_r));
    if (!std::isfinite(v)) continue;
    out.sigma.push_back(s);
    log_sigma.push_back(std::log(s));
    out.log_abs_log_ratio.push_back(v);
  }
  out.fit = fit_line(log_sigma, out.log_abs_log_ratio);
  return out;
}

namespace {

struct SimpsonPanel {
  double a, b, fa, fm, fb, whole;
};

double simpson(double a, double b, double fa, double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive(const Density1d& f, const SimpsonPanel& p, double tol, int depth) {
  const double m = 0.5 * (p.a + p.b);
  const double lm = 0.5 * (p.a + m);
  const double rm = 0.5 * (m + p.b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = simpson(p.a, m, p.fa, flm, p.fm);
  const double right = simpson(m, p.b, p.fm, frm, p.fb);
  const double diff = left + right - p.whole;
  if (depth <= 0 || std::abs(diff) <= 15.0 * tol) return left + right + diff / 15.0;
  return adaptive(f, {p.a, m, p.fa, flm, p.fm, left}, 0.5 * tol, depth - 1) +
         adaptive(f, {m, p.b, p.fm, frm, p.fb, right}, 0.5 * tol, depth - 1);
}

}  // namespace

double integrate_adaptive(const Density1d& f, double a, double b, double tol) {
  if (b == a) return 0.0;
  if (b < a) return -integrate_adaptive(f, b, a, tol);
  // A uniform pre-split keeps narrow features from being skipped by the
  // first Simpson estimate.
  constexpr int kPanels = 64;
  const double h = (b - a) / kPanels;
  double total = 0.0;
  double fa = f(a);
  for (int i = 0; i < kPanels; ++i) {
    const double lo = a + i * h;
    const double hi = i + 1 == kPanels ? b : lo + h;
    const double fm = f(0.5 * (lo + hi));
    const double fb = f(hi);
    total += adaptive(f, {lo, hi, fa, fm, fb, simpson(lo, hi, fa, fm, fb)}, tol / kPanels, 50);
    fa = fb;
  }
  return total;
}

double tv_distance_1d(const Density1d& a, const Density1d& b, double lo, double hi,
                      double tol) {
  const double v =
      0.5 * integrate_adaptive([&](double t) { return std::abs(a(t) - b(t)); }, lo, hi, tol);
  return std::clamp(v, 0.0, 1.0);
}

double ks_distance(std::vector<double> samples, const Density1d& density, double lo,
                   double tol) {
  if (samples.empty()) throw UsageError("ks_distance: no samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double cdf = 0.0;
  double at = lo;
  double worst = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double s = samples[i];
    if (s > at) {
      const double width = s - at;
      // Short gaps between neighbouring samples need only a few nodes.
      cdf += width < 1e-2 ? simpson(at, s, density(at), density(0.5 * (at + s)), density(s))
                          : integrate_adaptive(density, at, s, tol);
      at = s;
    }
    worst = std::max({worst, std::abs(cdf - i / n), std::abs((i + 1) / n - cdf)});
  }
  return worst;
}

}  // namespace barker
