#pragma once

#include <array>

#include "lipspline/activation.hpp"
#include "lipspline/network.hpp"

namespace lipspline {

/// Source activation reproduced by an equivalence fragment.
struct FragmentSource {
  ActivationKind kind = ActivationKind::AbsoluteValue;
  double prelu_slope = 0.5;                      // PRelu source
  std::array<double, 2> reflection = {1.0, 0.0};  // Householder source, unit vector
};

/// Width of the source activation (1 for component-wise, 2 for MaxMin / Householder).
std::size_t fragment_width(const FragmentSource& from);

/// Two-layer network with `to` activations and weights of spectral norm at most 1
/// that reproduces `from` on inputs whose pre-activations stay above -B.
/// Supported: AV <- PReLU, PReLU <- AV, MaxMin <- AV, AV <- MaxMin,
/// MaxMin <- Householder, Householder <- MaxMin.
Network build_equivalence_fragment(const FragmentSource& from, ActivationKind to, double bound);

/// The source activation itself, applied to [B, width] input.
Tensor apply_source(const FragmentSource& from, const Tensor& x);

}  // namespace lipspline
