#include "barker/adaptation.hpp"

#include <cstdio>
#include <fstream>

namespace barker {

DefaultInitialization default_initialization(Family family, int d) {
  if (d < 1) throw UsageError("default_initialization: d must be >= 1");
  const double dd = static_cast<double>(d);
  switch (family) {
    case Family::RWM: return {2.4 / std::sqrt(dd), 0.23};
    case Family::MALA:
    case Family::MALTA:
    case Family::MALTAc: return {2.4 / std::cbrt(std::sqrt(dd)), 0.57};
    case Family::Barker:
    case Family::BarkerGlobalFlip:
    case Family::GenericLB: return {2.4 / std::cbrt(std::sqrt(dd)), 0.40};
    case Family::HMC: return {1.0 / std::sqrt(std::sqrt(dd)), 0.65};
  }
  throw UsageError("unknown family");
}

double learning_rate(long t, double kappa) {
  return std::pow(static_cast<double>(t), -kappa);
}

AdaptationState make_adaptation_state(Family family, int d, double kappa, bool diagonal_only,
                                      std::optional<double> alpha_star,
                                      std::optional<double> sigma0) {
  if (!(kappa > 0.5 && kappa < 1.0)) throw UsageError("kappa must lie in (0.5, 1)");
  const auto init = default_initialization(family, d);
  AdaptationState s;
  s.log_sigma = std::log(sigma0.value_or(init.sigma0));
  s.alpha_star = alpha_star.value_or(init.alpha_star);
  if (!(s.alpha_star > 0.0 && s.alpha_star < 1.0))
    throw UsageError("alpha_star must lie in (0, 1)");
  s.kappa = kappa;
  s.diagonal_only = diagonal_only;
  s.mu = Vector::Zero(d);
  s.sigma_diag = Vector::Ones(d);
  if (!diagonal_only) s.sigma_dense = Matrix::Identity(d, d);
  return s;
}

void adapt_update(AdaptationState& s, const Vector& x, double accept_prob) {
  if (x.size() != s.mu.size()) throw UsageError("adapt_update: dimension mismatch");
  s.t += 1;
  const double gamma = s.frozen ? 0.0 : learning_rate(s.t, s.kappa);
  s.log_sigma += gamma * (accept_prob - s.alpha_star);
  s.mu += gamma * (x - s.mu);
  const Vector r = x - s.mu;
  if (s.sigma_dense) {
    Matrix& m = *s.sigma_dense;
    m = (1.0 - gamma) * m + gamma * (r * r.transpose());
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, i) = std::max(m(i, i), kSigmaFloor);
    s.sigma_diag = m.diagonal();
  } else {
    s.sigma_diag = ((1.0 - gamma) * s.sigma_diag.array() + gamma * r.array().square())
                       .max(kSigmaFloor);
  }
}

ProposalKernel adapted_kernel(const AdaptationState& s, const ProposalKernel& base) {
  ProposalKernel k = base;
  k.sigma = s.sigma();
  k.local_scales.reset();
  k.precond_chol.reset();
  // HMC runs with identity mass, so only its step size adapts.
  if (base.family == Family::HMC) return k;
  if (s.sigma_dense) {
    Eigen::LLT<Matrix> llt(*s.sigma_dense);
    Matrix jittered;
    double jitter = kSigmaFloor;
    while (llt.info() != Eigen::Success) {
      jittered = *s.sigma_dense + jitter * Matrix::Identity(s.dim(), s.dim());
      llt.compute(jittered);
      jitter *= 10.0;
    }
    k.precond_chol = Matrix(llt.matrixL());
  } else {
    k.local_scales = Vector(s.sigma_diag.array().sqrt());
  }
  return k;
}

void AdaptationTrace::record(const AdaptationState& state) {
  t.push_back(state.t);
  log_sigma.push_back(state.log_sigma);
  sigma_diag.push_back(state.sigma_diag);
}

void write_adaptation_csv(const AdaptationTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot open " + path);
  const Eigen::Index d = trace.sigma_diag.empty() ? 0 : trace.sigma_diag.front().size();
  out << "t,log_sigma";
  for (Eigen::Index i = 0; i < d; ++i) out << ",sigma_" << (i + 1);
  out << '\n';
  char buf[32];
  for (std::size_t k = 0; k < trace.t.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", trace.log_sigma[k]);
    out << trace.t[k] << ',' << buf;
    for (Eigen::Index i = 0; i < d; ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", trace.sigma_diag[k][i]);
      out << ',' << buf;
    }
    out << '\n';
  }
}

}  // namespace barker
