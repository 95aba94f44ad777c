#include "barker/balancing.hpp"

#include <algorithm>
#include <cmath>

#include "barker/common.hpp"

namespace barker {

double BalancingFunction::g(double t) const { return std::exp(log_g(std::log(t))); }

BalancingFunction barker_balancing() {
  return {"barker", [](double s) { return -softplus(-s); }, 1.0, 0.5,
          [](double) { return -kLogTwo; }};
}

BalancingFunction metropolis_balancing() {
  return {"metropolis", [](double s) { return std::min(0.0, s); }, 1.0, 1.0, {}};
}

BalancingFunction sqrt_balancing() {
  return {"sqrt", [](double s) { return 0.5 * s; },
          std::numeric_limits<double>::infinity(), 1.0,
          [](double a) { return a * a / 8.0; }};
}

BalancingFunction make_balancing(std::string name, std::function<double(double)> g,
                                 double sup) {
  if (!g) throw UsageError("balancing function is empty");
  const double g1 = g(1.0);
  return {std::move(name), [g](double s) { return std::log(g(std::exp(s))); }, sup, g1, {}};
}

double balance_residual(const BalancingFunction& g, double t_min, double t_max,
                        int points) {
  const double a = std::log(t_min);
  const double b = std::log(t_max);
  double worst = 0.0;
  for (int k = 0; k < points; ++k) {
    const double s = a + (b - a) * k / (points - 1);
    const double lhs = std::exp(g.log_g(s));
    const double rhs = std::exp(s + g.log_g(-s));
    worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, lhs));
  }
  return worst;
}

void validate_balancing(const BalancingFunction& g) {
  if (!g.log_g) throw UsageError("balancing function is empty");
  const double residual = balance_residual(g, 1e-6, 1e6);
  if (!(residual <= 1e-10))
    throw UsageError("balancing function '" + g.name + "' violates g(t) = t g(1/t)");
  double prev = -std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 2000; ++k) {
    const double s = std::log(1e-6) + (std::log(1e6) - std::log(1e-6)) * k / 2000.0;
    const double v = std::exp(g.log_g(s));
    if (!std::isfinite(v) || v < 0.0)
      throw UsageError("balancing function '" + g.name + "' is not finite and nonnegative");
    if (v < prev - 1e-12 * std::max(1.0, prev))
      throw UsageError("balancing function '" + g.name + "' is not nondecreasing");
    if (v > g.sup * (1.0 + 1e-12))
      throw UsageError("balancing function '" + g.name + "' exceeds its supremum");
    prev = v;
  }
}

}  // namespace barker
