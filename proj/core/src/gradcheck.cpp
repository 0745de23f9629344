#include "lipspline/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "lipspline/error.hpp"

namespace lipspline {

GradCheckResult finite_diff_check(const GraphBuilder& fn, const Bindings& point, double eps) {
  if (!(eps > 0.0 && eps <= 1e-3)) throw ConfigError("finite_diff_check: eps must lie in (0, 1e-3]");
  Graph g;
  const Var out = fn(g);
  g.evaluate(point);
  if (g.value(out).size() != 1) throw ShapeError("finite_diff_check: function is not scalar-valued");
  GradCheckResult result;
  result.kink_margin = g.kink_margin();
  const Gradients analytic = g.gradient(out);

  Bindings probe = point;
  double err = 0.0, scale = 0.0;
  for (const auto& [name, grad] : analytic) {
    auto it = probe.find(name);
    if (it == probe.end()) continue;
    Tensor& t = it->second;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double saved = t[i];
      t[i] = saved + eps;
      g.evaluate(probe);
      const double up = g.scalar(out);
      t[i] = saved - eps;
      g.evaluate(probe);
      const double down = g.scalar(out);
      t[i] = saved;
      const double fd = (up - down) / (2.0 * eps);
      err = std::max(err, std::abs(fd - grad[i]));
      scale = std::max({scale, std::abs(fd), std::abs(grad[i])});
    }
  }
  result.max_rel_error = scale == 0.0 ? 0.0 : err / scale;
  return result;
}

double finite_diff_check(const std::function<Var(Graph&, Var)>& fn, const Tensor& point, double eps) {
  const std::string name = "x";
  auto builder = [&](Graph& g) { return fn(g, g.parameter(name)); };
  return finite_diff_check(builder, Bindings{{name, point}}, eps).max_rel_error;
}

}  // namespace lipspline
