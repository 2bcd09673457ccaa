#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

#include <Eigen/Dense>

namespace mhmm {

/// 64-bit FNV-1a; stable across platforms, used to fold string ids into seeds.
std::uint64_t hash_id(std::string_view id);

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Derives an independent substream seed from a root seed and a tuple of
/// counters, e.g. (scenario hash, iteration, subject). Each counter is mixed
/// together with its position so that (a, b) and (b, a) give distinct seeds.
std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> counters);

/// Random stream used by every stochastic routine. Not thread-safe; give each
/// worker its own stream via derive_seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return unif_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * unif_(engine_); }
  double normal() { return norm_(engine_); }
  double normal(double mean, double sd) { return mean + sd * norm_(engine_); }

  /// Gamma with shape/scale parameterization.
  double gamma(double shape, double scale);
  /// Inverse-gamma with density proportional to x^{-shape-1} exp(-scale/x).
  double inv_gamma(double shape, double scale) { return 1.0 / gamma(shape, 1.0 / scale); }

  /// Draws an index with probability proportional to weights (need not be normalized).
  template <typename Derived>
  int categorical(const Eigen::MatrixBase<Derived>& weights) {
    const double total = weights.sum();
    double u = unif_(engine_) * total;
    const Eigen::Index n = weights.size();
    for (Eigen::Index i = 0; i < n; ++i) {
      u -= weights(i);
      if (u < 0.0) return static_cast<int>(i);
    }
    // Round-off can leave u marginally positive; fall back to the last positive weight.
    for (Eigen::Index i = n - 1; i >= 0; --i)
      if (weights(i) > 0.0) return static_cast<int>(i);
    return static_cast<int>(n - 1);
  }

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> unif_{0.0, 1.0};
  std::normal_distribution<double> norm_{0.0, 1.0};
};

}  // namespace mhmm
