#include "lipspline/activation.hpp"

#include <cmath>

#include "lipspline/error.hpp"

namespace lipspline {

const char* to_string(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::Identity: return "identity";
    case ActivationKind::Lls: return "lls";
    case ActivationKind::Relu: return "relu";
    case ActivationKind::AbsoluteValue: return "absolute_value";
    case ActivationKind::PRelu: return "prelu";
    case ActivationKind::GroupSort: return "groupsort";
    case ActivationKind::Householder: return "householder";
  }
  return "?";
}

ActivationKind parse_activation(const std::string& name) {
  for (auto k : {ActivationKind::Identity, ActivationKind::Lls, ActivationKind::Relu, ActivationKind::AbsoluteValue,
                 ActivationKind::PRelu, ActivationKind::GroupSort, ActivationKind::Householder}) {
    if (name == to_string(k)) return k;
  }
  if (name == "maxmin") return ActivationKind::GroupSort;
  if (name == "abs") return ActivationKind::AbsoluteValue;
  throw ConfigError("unknown activation '" + name + "'");
}

Tensor apply_activation(const ActivationParams& p, const Tensor& x) {
  switch (p.kind) {
    case ActivationKind::Identity:
      return x;
    case ActivationKind::Lls:
      return ops::spline_forward(x, p.coeffs, p.alpha, p.grid);
    case ActivationKind::Relu: {
      Tensor y = x;
      for (auto& v : y.data()) v = v > 0.0 ? v : 0.0;
      return y;
    }
    case ActivationKind::AbsoluteValue: {
      Tensor y = x;
      for (auto& v : y.data()) v = std::abs(v);
      return y;
    }
    case ActivationKind::PRelu:
      for (double a : p.slopes.data()) {
        if (std::abs(a) > 1.0) throw ConfigError("prelu slope outside [-1, 1]");
      }
      return ops::prelu(x, p.slopes);
    case ActivationKind::GroupSort:
      return ops::group_sort(x, p.group_size, sorts_descending(p.group_size), nullptr);
    case ActivationKind::Householder: {
      const std::size_t rows = p.reflections.size() / 2;
      for (std::size_t r = 0; r < rows; ++r) {
        const double n = std::hypot(p.reflections[2 * r], p.reflections[2 * r + 1]);
        if (std::abs(n - 1.0) > 1e-9) throw ConfigError("householder reflection vector is not normalized");
      }
      return ops::householder(x, p.reflections);
    }
  }
  throw ConfigError("unknown activation kind");
}

}  // namespace lipspline
