#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "lipspline/tensor.hpp"

namespace lipspline::testing {

/// Small deterministic generator for property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(rng_);
  }
  std::size_t index(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
  }
  bool coin() { return (rng_() & 1U) != 0; }

  std::vector<double> normals(std::size_t n, double stddev = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = normal(0.0, stddev);
    return v;
  }

  Tensor tensor(Shape shape, double stddev = 1.0) {
    Tensor t(std::move(shape));
    for (auto& x : t.data()) x = normal(0.0, stddev);
    return t;
  }

  /// Coefficients with a heavy-tailed mix of small and large jumps.
  std::vector<double> spline_coeffs(std::size_t k) {
    std::vector<double> c(k);
    double level = normal(0.0, 3.0);
    const double spread = std::exp(uniform(-4.0, 2.0));
    for (auto& x : c) {
      level += coin() ? normal(0.0, spread) : normal(0.0, 0.1 * spread);
      x = level;
    }
    return c;
  }

  std::mt19937_64& engine() noexcept { return rng_; }

 private:
  std::mt19937_64 rng_;
};

}  // namespace lipspline::testing
