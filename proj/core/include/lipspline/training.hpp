#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "lipspline/graph.hpp"
#include "lipspline/network.hpp"

namespace lipspline {

struct TrainConfig {
  double eta = 1e-3;
  double alpha_ratio = 0.25;       // spline scaling factors train at eta * alpha_ratio
  double coeff_ratio = 1.0 / 40.0;  // spline coefficients train at eta * coeff_ratio
  std::size_t batch_size = 10;
  std::size_t epochs = 10;
  double lambda = 0.0;  // TV(2) weight
  int power_iters = 1;  // power iterations per step for spectral constraints
  std::uint64_t seed = 0;
};

void validate(const TrainConfig& cfg);

/// Learning rate of a parameter according to its group.
double learning_rate(const std::string& name, const TrainConfig& cfg);

/// Adam with bias correction and per-group learning rates.
class Adam {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  /// Updates every parameter that has a gradient. Throws NumericError, leaving
  /// parameters and moments untouched, when any gradient is non-finite.
  void step(std::map<std::string, Tensor>& params, const Gradients& grads, const TrainConfig& cfg);
  std::size_t steps() const noexcept { return t_; }

 private:
  std::map<std::string, Tensor> m_;
  std::map<std::string, Tensor> v_;
  std::size_t t_ = 0;
};

struct Objective {
  Var loss;
  Var data;  // mean squared error over all output entries
  Var reg;   // sum of TV(2); invalid when the network has no splines
};

/// mean((f(x) - y)^2) + lambda * sum TV(2)(sigma).
Objective build_objective(Graph& g, const Network& net, Var x, Var target, double lambda);

/// Evaluates the objective at the current parameters.
double objective(const Network& net, const Tensor& x, const Tensor& y, double lambda);

struct StepResult {
  double loss = 0.0;
  double data = 0.0;
};

/// Refreshes the power iterations, differentiates the objective on one batch and takes an Adam step.
StepResult train_step(Network& net, Adam& opt, const Tensor& x, const Tensor& y, const TrainConfig& cfg);

/// Rows `idx` of a tensor whose first axis indexes samples.
Tensor gather_rows(const Tensor& t, std::span<const std::size_t> idx);

std::vector<std::size_t> shuffled_indices(std::size_t n, std::mt19937_64& rng);

}  // namespace lipspline
