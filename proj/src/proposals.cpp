#include "barker/proposals.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace barker {

std::string to_string(Family family) {
  switch (family) {
    case Family::RWM: return "RWM";
    case Family::MALA: return "MALA";
    case Family::Barker: return "Barker";
    case Family::BarkerGlobalFlip: return "BarkerGlobalFlip";
    case Family::MALTA: return "MALTA";
    case Family::MALTAc: return "MALTAc";
    case Family::HMC: return "HMC";
    case Family::GenericLB: return "GenericLB";
  }
  return "Unknown";
}

Family family_from_string(const std::string& name) {
  auto lower = [](std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
  };
  const std::string key = lower(name);
  for (Family f : {Family::RWM, Family::MALA, Family::Barker, Family::BarkerGlobalFlip,
                   Family::MALTA, Family::MALTAc, Family::HMC, Family::GenericLB}) {
    if (lower(to_string(f)) == key) return f;
  }
  throw UsageError("unknown sampler family '" + name + "'");
}

bool uses_gradient(Family family) { return family != Family::RWM; }

// -- kernel ----------------------------------------------------------------

void ProposalKernel::validate() const {
  const std::string who = to_string(family);
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    throw UsageError(who + ": sigma must be positive and finite");
  if (local_scales && precond_chol)
    throw UsageError(who + ": local_scales and precond_chol are mutually exclusive");
  if (local_scales) {
    if (local_scales->size() == 0 || !local_scales->allFinite() ||
        !(local_scales->array() > 0.0).all())
      throw UsageError(who + ": local_scales must be positive and finite");
  }
  if (precond_chol) {
    const Matrix& c = *precond_chol;
    if (c.rows() != c.cols() || c.rows() == 0)
      throw UsageError(who + ": precond_chol must be square");
    if (!c.allFinite()) throw UsageError(who + ": precond_chol must be finite");
    for (Eigen::Index i = 0; i < c.rows(); ++i) {
      if (!(c(i, i) > 0.0)) throw UsageError(who + ": precond_chol needs a positive diagonal");
      for (Eigen::Index j = i + 1; j < c.cols(); ++j)
        if (c(i, j) != 0.0) throw UsageError(who + ": precond_chol must be lower-triangular");
    }
  }
  if (family == Family::HMC) {
    if (!hmc_L || *hmc_L < 1) throw UsageError("HMC: hmc_L must be a positive integer");
    if (local_scales || precond_chol)
      throw UsageError("HMC: preconditioning is not supported");
  } else if (hmc_L) {
    throw UsageError(who + ": hmc_L is only valid for HMC");
  }
  if (family == Family::MALTA) {
    if (malta_delta && !(*malta_delta > 0.0))
      throw UsageError("MALTA: malta_delta must be positive");
  } else if (malta_delta) {
    throw UsageError(who + ": malta_delta is only valid for MALTA");
  }
  if (family == Family::GenericLB) {
    if (!balancing) throw UsageError("GenericLB: balancing function required");
    if (!balancing->bounded())
      throw UsageError("GenericLB: balancing function must be bounded");
    if (precond_chol) throw UsageError("GenericLB: dense preconditioning is not supported");
    validate_balancing(*balancing);
  } else if (balancing) {
    throw UsageError(who + ": balancing function is only valid for GenericLB");
  }
}

nlohmann::json ProposalKernel::describe() const {
  nlohmann::json j = {{"family", to_string(family)}, {"sigma", sigma}, {"noise", "gaussian"}};
  if (local_scales)
    j["local_scales"] = std::vector<double>(local_scales->data(),
                                            local_scales->data() + local_scales->size());
  if (precond_chol) j["precond_chol_dim"] = precond_chol->rows();
  if (hmc_L) j["hmc_L"] = *hmc_L;
  if (family == Family::MALTA) j["malta_delta"] = malta_delta.value_or(kDefaultMaltaDelta);
  if (balancing) j["balancing"] = balancing->name;
  return j;
}

namespace {
ProposalKernel basic(Family family, double sigma) {
  ProposalKernel k;
  k.family = family;
  k.sigma = sigma;
  return k;
}
}  // namespace

ProposalKernel ProposalKernel::rwm(double sigma) { return basic(Family::RWM, sigma); }
ProposalKernel ProposalKernel::mala(double sigma) { return basic(Family::MALA, sigma); }
ProposalKernel ProposalKernel::barker(double sigma) { return basic(Family::Barker, sigma); }
ProposalKernel ProposalKernel::barker_global_flip(double sigma) {
  return basic(Family::BarkerGlobalFlip, sigma);
}
ProposalKernel ProposalKernel::malta(double sigma, double delta) {
  ProposalKernel k = basic(Family::MALTA, sigma);
  k.malta_delta = delta;
  return k;
}
ProposalKernel ProposalKernel::maltac(double sigma) { return basic(Family::MALTAc, sigma); }
ProposalKernel ProposalKernel::hmc(double sigma, int L) {
  ProposalKernel k = basic(Family::HMC, sigma);
  k.hmc_L = L;
  return k;
}
ProposalKernel ProposalKernel::generic_lb(double sigma, BalancingFunction g) {
  ProposalKernel k = basic(Family::GenericLB, sigma);
  k.balancing = std::move(g);
  return k;
}
ProposalKernel ProposalKernel::of(Family family, double sigma) {
  switch (family) {
    case Family::HMC: return hmc(sigma, 1);
    case Family::MALTA: return malta(sigma);
    case Family::GenericLB: return generic_lb(sigma, metropolis_balancing());
    default: return basic(family, sigma);
  }
}

// -- linear scaling A ------------------------------------------------------

namespace {

void check_size(const ProposalKernel& k, Eigen::Index d) {
  if (k.local_scales && k.local_scales->size() != d)
    throw UsageError("local_scales dimension does not match the state");
  if (k.precond_chol && k.precond_chol->rows() != d)
    throw UsageError("precond_chol dimension does not match the state");
}

// A v
Vector apply_a(const ProposalKernel& k, const Vector& v) {
  if (k.local_scales) return k.local_scales->cwiseProduct(v);
  if (k.precond_chol) return k.precond_chol->triangularView<Eigen::Lower>() * v;
  return v;
}

// A^T v
Vector apply_at(const ProposalKernel& k, const Vector& v) {
  if (k.local_scales) return k.local_scales->cwiseProduct(v);
  if (k.precond_chol) return k.precond_chol->triangularView<Eigen::Lower>().transpose() * v;
  return v;
}

// A^{-1} v
Vector solve_a(const ProposalKernel& k, const Vector& v) {
  if (k.local_scales) return v.cwiseQuotient(*k.local_scales);
  if (k.precond_chol) return k.precond_chol->triangularView<Eigen::Lower>().solve(v);
  return v;
}

double log_det_a(const ProposalKernel& k) {
  if (k.local_scales) return k.local_scales->array().log().sum();
  if (k.precond_chol) return k.precond_chol->diagonal().array().log().sum();
  return 0.0;
}

double log_gauss(const Vector& w, double sigma) {
  return -0.5 * w.squaredNorm() / (sigma * sigma) -
         w.size() * (std::log(sigma) + 0.5 * kLogTwoPi);
}

Vector draw_normal(Eigen::Index d, Rng& rng) {
  Vector n(d);
  for (Eigen::Index i = 0; i < d; ++i) n[i] = rng.normal();
  return n;
}

// Gradient used in the Langevin drift.
Vector langevin_field(const ProposalKernel& k, const Vector& grad) {
  switch (k.family) {
    case Family::MALTA: return malta_grad(grad, k.malta_delta.value_or(kDefaultMaltaDelta));
    case Family::MALTAc: return maltac_grad(grad, k.sigma);
    default: return grad;
  }
}

Vector langevin_mean(const ProposalKernel& k, const Vector& x, const Vector& grad) {
  const Vector g = langevin_field(k, grad);
  return x + (0.5 * k.sigma * k.sigma) * apply_a(k, apply_at(k, g));
}

double lb_log_normalizer_for(const ProposalKernel& k, double a) {
  return lb_log_normalizer(*k.balancing, a);
}

}  // namespace

Vector malta_grad(const Vector& grad, double delta) {
  const double norm = grad.norm();
  if (norm <= delta) return grad;
  return (delta / norm) * grad;
}

Vector maltac_grad(const Vector& grad, double sigma) {
  const double s2 = sigma * sigma;
  return grad.unaryExpr([s2](double g) { return g / (1.0 + s2 * std::abs(g)); });
}

// -- draws -----------------------------------------------------------------

ProposalOutcome rwm_propose(const Vector& x, const ProposalKernel& kernel, Rng& rng) {
  check_size(kernel, x.size());
  ProposalOutcome out;
  out.aux.z = draw_normal(x.size(), rng);
  const Vector w = kernel.sigma * out.aux.z;
  out.y = x + apply_a(kernel, w);
  out.log_q_fwd = log_gauss(w, kernel.sigma) - log_det_a(kernel);
  out.log_q_rev = out.log_q_fwd;
  out.log_correction = 0.0;
  return out;
}

ProposalOutcome mala_propose(const Vector& x, const Vector& grad,
                             const ProposalKernel& kernel, Rng& rng) {
  check_size(kernel, x.size());
  ProposalOutcome out;
  out.aux.z = draw_normal(x.size(), rng);
  const Vector w = kernel.sigma * out.aux.z;
  out.y = langevin_mean(kernel, x, grad) + apply_a(kernel, w);
  out.log_q_fwd = log_gauss(w, kernel.sigma) - log_det_a(kernel);
  out.aux.divergent = !all_finite(grad) || !all_finite(out.y);
  return out;
}

Barker1dDraw barker_propose_1d(double x, double grad, double sigma, Rng& rng) {
  const double z = sigma * rng.normal();
  const double u = rng.uniform();
  const double a = z * grad;
  const bool keep = u < logistic(a);
  const int b = keep ? 1 : -1;
  return {x + b * z, z, b, -softplus(-b * a)};
}

ProposalOutcome barker_propose(const Vector& x, const Vector& grad,
                               const ProposalKernel& kernel, Rng& rng) {
  check_size(kernel, x.size());
  const Eigen::Index d = x.size();
  const Vector c = apply_at(kernel, grad);
  ProposalOutcome out;
  out.aux.z.resize(d);
  out.aux.flips.resize(d);
  Vector v(d);
  double log_q = d * kLogTwo - log_det_a(kernel);
  for (Eigen::Index i = 0; i < d; ++i) {
    const double zt = kernel.sigma * rng.normal();
    const double u = rng.uniform();
    const double a = zt * c[i];
    const int b = u < logistic(a) ? 1 : -1;
    out.aux.z[i] = zt;
    out.aux.flips[i] = static_cast<signed char>(b);
    v[i] = b * zt;
    log_q += log_normal_pdf(zt, kernel.sigma) - softplus(-b * a);
  }
  if (kernel.precond_chol || kernel.local_scales) {
    out.y = x + apply_a(kernel, v);
  } else {
    out.y = x + v;
  }
  out.log_q_fwd = log_q;
  out.aux.divergent = !all_finite(c) || !all_finite(out.y);
  return out;
}

ProposalOutcome barker_globalflip_propose(const Vector& x, const Vector& grad,
                                          const ProposalKernel& kernel, Rng& rng) {
  check_size(kernel, x.size());
  const Vector c = apply_at(kernel, grad);
  ProposalOutcome out;
  out.aux.z = kernel.sigma * draw_normal(x.size(), rng);
  const double u = rng.uniform();
  const double a = out.aux.z.dot(c);
  const int b = u < logistic(a) ? 1 : -1;
  out.aux.flips = {static_cast<signed char>(b)};
  out.y = x + apply_a(kernel, b * out.aux.z);
  out.log_q_fwd = kLogTwo + log_gauss(out.aux.z, kernel.sigma) - softplus(-b * a) -
                  log_det_a(kernel);
  out.aux.divergent = !std::isfinite(a) || !all_finite(out.y);
  return out;
}

ProposalOutcome lb_propose_generic(const Vector& x, const Vector& grad,
                                   const ProposalKernel& kernel, Rng& rng) {
  check_size(kernel, x.size());
  if (!kernel.balancing || !kernel.balancing->bounded())
    throw UsageError("lb_propose_generic needs a bounded balancing function");
  const BalancingFunction& g = *kernel.balancing;
  const double log_m = std::log(g.sup);
  const Eigen::Index d = x.size();
  const Vector c = apply_at(kernel, grad);
  ProposalOutcome out;
  out.aux.divergent = !all_finite(c);
  if (out.aux.divergent) {
    out.y = x;
    return out;
  }
  Vector v(d);
  double log_q = -log_det_a(kernel);
  for (Eigen::Index i = 0; i < d; ++i) {
    double w = 0.0;
    for (;;) {
      w = kernel.sigma * rng.normal();
      const double u = rng.uniform();
      ++out.aux.envelope_trials;
      if (std::log(u) + log_m < g.log_g(w * c[i])) break;
    }
    v[i] = w;
    const double log_z = lb_log_normalizer_for(kernel, c[i] * kernel.sigma);
    out.aux.log_z += log_z;
    log_q += g.log_g(w * c[i]) + log_normal_pdf(w, kernel.sigma) - log_z;
  }
  out.aux.z = v;
  out.y = x + apply_a(kernel, v);
  out.log_q_fwd = log_q;
  return out;
}

ProposalOutcome hmc_propose(const Vector& x, const Vector& grad,
                            const ProposalKernel& kernel, const TargetModel& target,
                            Rng& rng) {
  const int steps = kernel.hmc_L.value_or(1);
  const double eps = kernel.sigma;
  ProposalOutcome out;
  out.grad_evals = steps + 1;
  out.aux.xi0 = draw_normal(x.size(), rng);
  Vector pos = x;
  Vector mom = out.aux.xi0 + (0.5 * eps) * grad;
  Vector g;
  double log_pi = 0.0;
  bool ok = all_finite(mom);
  for (int l = 1; l <= steps && ok; ++l) {
    pos += eps * mom;
    if (l < steps) {
      g = target.grad_log_density(pos);
      mom += eps * g;
    } else {
      log_pi = target.log_density_and_grad(pos, g);
      mom += (0.5 * eps) * g;
    }
    ok = all_finite(pos) && all_finite(mom);
  }
  out.y = pos;
  out.aux.xiL = mom;
  out.aux.divergent = !ok || !std::isfinite(log_pi);
  out.log_q_fwd = log_gauss(out.aux.xi0, 1.0);
  out.log_q_rev = ok ? log_gauss(mom, 1.0) : -std::numeric_limits<double>::infinity();
  out.log_correction = ok ? 0.5 * (out.aux.xi0.squaredNorm() - mom.squaredNorm())
                          : -std::numeric_limits<double>::infinity();
  out.log_pi_y = log_pi;
  out.grad_y = std::move(g);
  return out;
}

ProposalOutcome propose(const ProposalKernel& kernel, const Vector& x, const Vector& grad,
                        const TargetModel& target, Rng& rng) {
  switch (kernel.family) {
    case Family::RWM: return rwm_propose(x, kernel, rng);
    case Family::MALA:
    case Family::MALTA:
    case Family::MALTAc: return mala_propose(x, grad, kernel, rng);
    case Family::Barker: return barker_propose(x, grad, kernel, rng);
    case Family::BarkerGlobalFlip: return barker_globalflip_propose(x, grad, kernel, rng);
    case Family::GenericLB: return lb_propose_generic(x, grad, kernel, rng);
    case Family::HMC: return hmc_propose(x, grad, kernel, target, rng);
  }
  throw UsageError("unknown family");
}

// -- densities -------------------------------------------------------------

double barker_log_density_1d(double w, double grad, double sigma) {
  return kLogTwo + log_normal_pdf(w, sigma) - softplus(-grad * w);
}

double lb_log_normalizer(const BalancingFunction& g, double a) {
  if (g.closed_form_log_z) return g.closed_form_log_z(a);
  if (a == 0.0) return g.log_g(0.0);
  using boost::math::quadrature::gauss_kronrod;
  auto f = [&](double u) { return std::exp(g.log_g(a * u) - 0.5 * u * u - 0.5 * kLogTwoPi); };
  constexpr double kEdge = 8.0;
  const double body = gauss_kronrod<double, 61>::integrate(f, -kEdge, 0.0, 15, 1e-12) +
                      gauss_kronrod<double, 61>::integrate(f, 0.0, kEdge, 15, 1e-12);
  // Beyond |u| = 8 the weight g is at most its value at the edge (g is
  // monotone), so the tails contribute about Phi(-8) times the edge values.
  const double tail_mass = 0.5 * std::erfc(kEdge / std::sqrt(2.0));
  const double tails =
      tail_mass * (std::exp(g.log_g(a * kEdge)) + std::exp(g.log_g(-a * kEdge)));
  return std::log(body + tails);
}

double lb_log_density_1d(const BalancingFunction& g, double w, double grad, double sigma) {
  return g.log_g(grad * w) + log_normal_pdf(w, sigma) - lb_log_normalizer(g, grad * sigma);
}

double log_proposal_density(const ProposalKernel& kernel, const Vector& x,
                            const Vector& grad_x, const Vector& y) {
  check_size(kernel, x.size());
  const double s = kernel.sigma;
  switch (kernel.family) {
    case Family::RWM: return log_gauss(solve_a(kernel, y - x), s) - log_det_a(kernel);
    case Family::MALA:
    case Family::MALTA:
    case Family::MALTAc:
      return log_gauss(solve_a(kernel, y - langevin_mean(kernel, x, grad_x)), s) -
             log_det_a(kernel);
    case Family::Barker: {
      const Vector w = solve_a(kernel, y - x);
      const Vector c = apply_at(kernel, grad_x);
      double out = w.size() * kLogTwo - log_det_a(kernel);
      for (Eigen::Index i = 0; i < w.size(); ++i)
        out += log_normal_pdf(w[i], s) - softplus(-w[i] * c[i]);
      return out;
    }
    case Family::BarkerGlobalFlip: {
      const Vector w = solve_a(kernel, y - x);
      const Vector c = apply_at(kernel, grad_x);
      return kLogTwo + log_gauss(w, s) - softplus(-w.dot(c)) - log_det_a(kernel);
    }
    case Family::GenericLB: {
      const Vector w = solve_a(kernel, y - x);
      const Vector c = apply_at(kernel, grad_x);
      double out = -log_det_a(kernel);
      for (Eigen::Index i = 0; i < w.size(); ++i)
        out += lb_log_density_1d(*kernel.balancing, w[i], c[i], s);
      return out;
    }
    case Family::HMC:
      throw UsageError("HMC has no proposal density in position space");
  }
  throw UsageError("unknown family");
}

double barker_log_correction(const Vector& x, const Vector& y, const Vector& grad_x,
                             const Vector& grad_y) {
  double out = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double w = y[i] - x[i];
    out += softplus(-w * grad_x[i]) - softplus(w * grad_y[i]);
  }
  return out;
}

double barker_log_accept(double log_pi_x, double log_pi_y, const Vector& x,
                         const Vector& y, const Vector& grad_x, const Vector& grad_y) {
  return std::min(0.0, log_pi_y - log_pi_x + barker_log_correction(x, y, grad_x, grad_y));
}

double log_hastings_correction(const ProposalKernel& kernel, const Vector& x,
                               const Vector& grad_x, const Vector& y,
                               const Vector& grad_y) {
  check_size(kernel, x.size());
  const double s = kernel.sigma;
  switch (kernel.family) {
    case Family::RWM: return 0.0;
    case Family::MALA:
    case Family::MALTA:
    case Family::MALTAc: {
      const Vector fwd = solve_a(kernel, y - langevin_mean(kernel, x, grad_x));
      const Vector rev = solve_a(kernel, x - langevin_mean(kernel, y, grad_y));
      return -0.5 * (rev.squaredNorm() - fwd.squaredNorm()) / (s * s);
    }
    case Family::Barker: {
      const Vector w = solve_a(kernel, y - x);
      const Vector cx = apply_at(kernel, grad_x);
      const Vector cy = apply_at(kernel, grad_y);
      double out = 0.0;
      for (Eigen::Index i = 0; i < w.size(); ++i)
        out += softplus(-w[i] * cx[i]) - softplus(w[i] * cy[i]);
      return out;
    }
    case Family::BarkerGlobalFlip: {
      const Vector w = solve_a(kernel, y - x);
      return softplus(-w.dot(apply_at(kernel, grad_x))) -
             softplus(w.dot(apply_at(kernel, grad_y)));
    }
    case Family::GenericLB: {
      const BalancingFunction& g = *kernel.balancing;
      const Vector w = solve_a(kernel, y - x);
      const Vector cx = apply_at(kernel, grad_x);
      const Vector cy = apply_at(kernel, grad_y);
      double out = 0.0;
      for (Eigen::Index i = 0; i < w.size(); ++i) {
        out += g.log_g(-w[i] * cy[i]) - g.log_g(w[i] * cx[i]);
        out += lb_log_normalizer(g, cx[i] * s) - lb_log_normalizer(g, cy[i] * s);
      }
      return out;
    }
    case Family::HMC:
      throw UsageError("HMC correction comes from the momenta, not positions");
  }
  throw UsageError("unknown family");
}

void complete_outcome(ProposalOutcome& out, const ProposalKernel& kernel, const Vector& x,
                      const Vector& grad_x, const Vector& grad_y) {
  if (kernel.family == Family::HMC || kernel.family == Family::RWM) return;
  if (!all_finite(grad_y)) {
    out.aux.divergent = true;
    out.log_q_rev = -std::numeric_limits<double>::infinity();
    out.log_correction = -std::numeric_limits<double>::infinity();
    return;
  }
  out.log_correction = log_hastings_correction(kernel, x, grad_x, out.y, grad_y);
  out.log_q_rev = out.log_q_fwd + out.log_correction;
}

}  // namespace barker
