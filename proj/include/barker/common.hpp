#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace barker {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Raised for invalid arguments or configurations supplied by the caller.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// SplitMix64 finalizer. Used to derive independent stream seeds.
std::uint64_t mix64(std::uint64_t z);

/// Seed for stream `stream` of master seed `master`.
///
/// Replicate r of an experiment runs on stream_seed(master, r); nested ids
/// (sampler, sweep point, replicate) are chained through stream_seed.
std::uint64_t stream_seed(std::uint64_t master, std::uint64_t stream);

/// Per-chain random source. The normal/uniform draws are a pure function of
/// the seed and the sequence of calls, so two chains built from the same seed
/// that issue the same calls see identical numbers.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  double normal() { return normal_(engine_); }
  /// Uniform on [0, 1).
  double uniform() { return uniform_(engine_); }

  std::uint64_t seed() const { return seed_; }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

inline constexpr double kLogTwoPi = 1.8378770664093454836;
inline constexpr double kLogTwo = 0.69314718055994530942;
inline constexpr double kPi = 3.14159265358979323846;

/// log(1 + e^a) without overflow for large |a|.
inline double softplus(double a) {
  return a > 0.0 ? a + std::log1p(std::exp(-a)) : std::log1p(std::exp(a));
}

/// Logistic function 1 / (1 + e^{-a}), branch-stable for both signs.
inline double logistic(double a) {
  if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
  const double e = std::exp(a);
  return e / (1.0 + e);
}

/// log N(w; 0, s^2).
inline double log_normal_pdf(double w, double s) {
  const double u = w / s;
  return -0.5 * u * u - std::log(s) - 0.5 * kLogTwoPi;
}

bool all_finite(const Vector& v);

}  // namespace barker
