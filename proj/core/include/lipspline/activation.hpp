#pragma once

#include <cstddef>
#include <string>

#include "lipspline/ops.hpp"
#include "lipspline/spline.hpp"
#include "lipspline/tensor.hpp"

namespace lipspline {

enum class ActivationKind { Identity, Lls, Relu, AbsoluteValue, PRelu, GroupSort, Householder };

const char* to_string(ActivationKind kind);
ActivationKind parse_activation(const std::string& name);

/// Activation used between consecutive layers of a network.
struct ActivationSpec {
  ActivationKind kind = ActivationKind::Relu;
  std::size_t group_size = 2;  // GroupSort; 2 is MaxMin
  bool shared = false;         // one spline / slope for the whole layer instead of one per channel
  SplineInit spline_init = SplineInit::Relu;
  std::size_t spline_size = 21;
  double spline_range = 1.0;
  double leaky_slope = 0.01;
  double prelu_init = 0.25;
};

/// Effective (already constrained) parameters of one activation layer.
struct ActivationParams {
  ActivationKind kind = ActivationKind::Identity;
  std::size_t group_size = 2;
  Tensor coeffs;       // Lls: [C, K], feasible
  Tensor alpha;        // Lls: [C]
  ops::SplineGrid grid;
  Tensor slopes;       // PRelu: [C] in [-1, 1]
  Tensor reflections;  // Householder: [C/2, 2] unit rows
};

/// Applies the activation along channel axis 1 (axis 0 for rank-1 input).
/// GroupSort with groups of 2 emits (max, min); larger groups sort ascending.
Tensor apply_activation(const ActivationParams& p, const Tensor& x);

inline bool sorts_descending(std::size_t group_size) { return group_size == 2; }

}  // namespace lipspline
