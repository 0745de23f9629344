#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "lipspline/network.hpp"
#include "lipspline/training.hpp"

namespace lipspline {

/// N(mean, A^T A); an empty factor makes it a point mass.
struct GaussianComponent {
  std::vector<double> mean;
  Tensor factor;  // [N, N]
};

/// Equal-weight mixture of two Gaussian components.
struct MixtureParams {
  std::array<GaussianComponent, 2> components;
  std::size_t dim() const noexcept { return components[0].mean.size(); }
};

/// Single Gaussian N(mean, A^T A) as a degenerate mixture.
MixtureParams gaussian_params(std::vector<double> mean, Tensor factor);
/// Means and factor entries drawn i.i.d. from N(0, 1).
MixtureParams random_mixture(std::size_t dim, std::mt19937_64& rng);

/// n draws, one per row: a fair coin picks the component, then mean + A^T g.
Tensor sample_mixture(const MixtureParams& p, std::size_t n, std::mt19937_64& rng);

/// mean f(batch1) - mean f(batch2).
double dual_objective(const FrozenNetwork& critic, const Tensor& batch1, const Tensor& batch2);

struct CriticConfig {
  TrainConfig train;  // eta, lambda, batch_size (per distribution), seed
  std::size_t steps = 2000;
  /// Every `log_every` steps the dual objective on a fixed training sample is recorded.
  std::size_t log_every = 100;
  std::size_t log_samples = 4096;
};

struct CriticTraining {
  Network critic;
  std::vector<double> train_estimates;
};

/// Maximizes the dual objective over the critic by minimizing its negation (+ lambda TV(2)).
CriticTraining train_critic(const NetworkSpec& spec, const MixtureParams& p1, const MixtureParams& p2,
                            const CriticConfig& cfg);

struct W1Estimate {
  double mean = 0.0;
  double std = 0.0;
  /// Monte Carlo standard error of a single repeat.
  double standard_error = 0.0;
};

/// Repeated Monte Carlo evaluation of the dual objective with fresh samples.
W1Estimate estimate_w1(const FrozenNetwork& critic, const MixtureParams& p1, const MixtureParams& p2,
                       std::size_t n_mc, std::size_t repeats, std::uint64_t seed);

/// One-dimensional distribution with a computable quantile function.
class Distribution1d {
 public:
  static Distribution1d normal(double mean, double stddev);
  static Distribution1d point(double location);
  /// Equal-weight mixture of N(m1, s1^2) and N(m2, s2^2).
  static Distribution1d normal_mixture(double m1, double s1, double m2, double s2);
  static Distribution1d empirical(std::vector<double> samples);
  /// 1-D marginal of a one-dimensional MixtureParams.
  static Distribution1d from_mixture(const MixtureParams& p);

  double quantile(double t) const;
  double cdf(double x) const;
  /// Probability levels where the quantile jumps (empty for continuous laws).
  std::vector<double> jumps() const;

 private:
  enum class Kind { Normal, Point, Mixture, Empirical };
  Kind kind_ = Kind::Point;
  double m1_ = 0.0, s1_ = 1.0, m2_ = 0.0, s2_ = 1.0;
  std::vector<double> samples_;
};

/// Integral over (0, 1) of |F1^-1(t) - F2^-1(t)| by tanh-sinh quadrature
/// split at jumps and crossings; absolute tolerance ~1e-6 or better.
double w1_1d_oracle(const Distribution1d& d1, const Distribution1d& d2);

}  // namespace lipspline
