#pragma once

#include <string>
#include <vector>

#include "lipspline/network.hpp"
#include "lipspline/training.hpp"

namespace lipspline {

/// Zero-mean 1-Lipschitz targets on [-1, 1].
/// F1: triangular wave with four teeth, |f'| = 1.
/// F2: slope 1 and slope 0 alternating on eight equal intervals.
/// F3: sin(7 pi x) / (7 pi).
enum class Target { F1, F2, F3 };

const char* to_string(Target t);
Target parse_target(const std::string& name);
double target_value(Target t, double x);

struct Fit1dConfig {
  Target target = Target::F3;
  NetworkSpec spec;
  TrainConfig train;
  std::size_t train_points = 1000;
  std::size_t test_points = 10000;
  /// Random pairs for the per-epoch Lipschitz audit; 0 skips it.
  std::size_t audit_pairs = 0;
  /// Record metrics every `log_every` epochs (and after the last one).
  std::size_t log_every = 1;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_mse = 0.0;
  double test_mse = 0.0;
  double mean_aelr = 0.0;
  double lipschitz_audit = 0.0;
};

struct Fit1dResult {
  Network net;
  std::vector<EpochMetrics> history;
  double test_mse = 0.0;
};

Fit1dResult fit_1d(const Fit1dConfig& cfg);

/// epoch,train_mse,test_mse,mean_aelr,lipschitz_audit
std::string metrics_csv(const std::vector<EpochMetrics>& history);

}  // namespace lipspline
