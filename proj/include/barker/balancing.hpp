#pragma once

#include <functional>
#include <limits>
#include <string>

namespace barker {

/// Balancing function g with g(t) = t g(1/t), evaluated through
/// log_g(s) = log g(e^s) so that extreme arguments stay finite.
struct BalancingFunction {
  std::string name;
  std::function<double(double)> log_g;
  /// sup_t g(t); infinity for unbounded functions (density-only use).
  double sup = std::numeric_limits<double>::infinity();
  double g_one = 1.0;
  /// Optional closed form of log Z(a) = log E[g(e^{aU})], U ~ N(0, 1).
  std::function<double(double)> closed_form_log_z;

  double g(double t) const;
  bool bounded() const { return sup < std::numeric_limits<double>::infinity(); }
};

/// t / (1 + t).
BalancingFunction barker_balancing();
/// min(1, t).
BalancingFunction metropolis_balancing();
/// sqrt(t). Unbounded, so only usable for densities; yields MALA.
BalancingFunction sqrt_balancing();
/// Wraps a user function g on (0, inf) with supremum `sup`.
BalancingFunction make_balancing(std::string name, std::function<double(double)> g,
                                 double sup);

/// Largest |g(t) - t g(1/t)| / max(1, g(t)) over a log-spaced grid on
/// [t_min, t_max].
double balance_residual(const BalancingFunction& g, double t_min, double t_max,
                        int points = 2001);

/// Throws UsageError unless g is balanced to 1e-10 on [1e-6, 1e6], nondecreasing
/// there and below its reported supremum.
void validate_balancing(const BalancingFunction& g);

}  // namespace barker
