#pragma once

#include <functional>

#include "lipspline/graph.hpp"

namespace lipspline {

/// Builds a scalar-valued graph whose differentiable leaves are parameters named after entries of the point.
using GraphBuilder = std::function<Var(Graph&)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  /// Distance of the point to the nearest non-smooth location of the graph.
  double kink_margin = 0.0;
};

/// Compares gradient() against central differences over every coordinate of
/// every parameter bound in `point` (inputs in `point` are held fixed).
/// Relative error is max|fd - ad| / max(|ad|_inf, |fd|_inf), 0 when both vanish.
GradCheckResult finite_diff_check(const GraphBuilder& fn, const Bindings& point, double eps);

/// Single-tensor form: `fn` receives the parameter node for `point`.
double finite_diff_check(const std::function<Var(Graph&, Var)>& fn, const Tensor& point, double eps);

}  // namespace lipspline
