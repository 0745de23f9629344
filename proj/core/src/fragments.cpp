#include "lipspline/fragments.hpp"

#include <cmath>
#include <numbers>

#include "lipspline/error.hpp"

namespace lipspline {

std::size_t fragment_width(const FragmentSource& from) {
  return from.kind == ActivationKind::GroupSort || from.kind == ActivationKind::Householder ? 2 : 1;
}

namespace {

Network make_fragment(std::size_t in, std::size_t hidden, std::size_t out, ActivationKind to) {
  NetworkSpec spec;
  spec.widths = {in, hidden, out};
  spec.constraint = Constraint::None;
  spec.activation.kind = to;
  spec.activation.group_size = 2;
  return Network(spec);
}

}  // namespace

Network build_equivalence_fragment(const FragmentSource& from, ActivationKind to, double bound) {
  const double r2 = 1.0 / std::numbers::sqrt2;
  const auto f = from.kind;
  const double b = bound;

  if (f == ActivationKind::AbsoluteValue && to == ActivationKind::PRelu) {
    Network net = make_fragment(1, 1, 1, to);
    net.set_parameter(weight_name(0), Tensor::matrix({{1.0}}));
    net.set_parameter(weight_name(1), Tensor::matrix({{1.0}}));
    net.set_parameter(slopes_name(0), Tensor::vector({-1.0}));
    return net;
  }
  if (f == ActivationKind::PRelu && to == ActivationKind::AbsoluteValue) {
    const double a = from.prelu_slope;
    if (std::abs(a) > 1.0) throw ConfigError("prelu slope must lie in [-1, 1]");
    const double s1 = std::sqrt((1.0 + a) / 2.0), s2 = std::sqrt((1.0 - a) / 2.0);
    Network net = make_fragment(1, 2, 1, to);
    net.set_parameter(weight_name(0), Tensor::matrix({{s1}, {s2}}));
    net.set_parameter(bias_name(0), Tensor::vector({s1 * b, 0.0}));
    net.set_parameter(weight_name(1), Tensor::matrix({{s1, s2}}));
    net.set_parameter(bias_name(1), Tensor::vector({-(1.0 + a) * b / 2.0}));
    return net;
  }
  if (f == ActivationKind::GroupSort && to == ActivationKind::AbsoluteValue) {
    Network net = make_fragment(2, 2, 2, to);
    const Tensor m = Tensor::matrix({{r2, r2}, {r2, -r2}});
    net.set_parameter(weight_name(0), m);
    net.set_parameter(bias_name(0), Tensor::vector({b, 0.0}));
    net.set_parameter(weight_name(1), m);
    net.set_parameter(bias_name(1), Tensor::vector({-b * r2, -b * r2}));
    return net;
  }
  if (f == ActivationKind::AbsoluteValue && to == ActivationKind::GroupSort) {
    Network net = make_fragment(1, 2, 1, to);
    net.set_parameter(weight_name(0), Tensor::matrix({{r2}, {-r2}}));
    net.set_parameter(weight_name(1), Tensor::matrix({{r2, -r2}}));
    return net;
  }
  if (f == ActivationKind::GroupSort && to == ActivationKind::Householder) {
    Network net = make_fragment(2, 2, 2, to);
    net.set_parameter(weight_name(0), Tensor::matrix({{1.0, 0.0}, {0.0, 1.0}}));
    net.set_parameter(weight_name(1), Tensor::matrix({{1.0, 0.0}, {0.0, 1.0}}));
    net.set_parameter(reflections_name(0), Tensor::matrix({{r2, -r2}}));
    return net;
  }
  if (f == ActivationKind::Householder && to == ActivationKind::GroupSort) {
    const auto [v1, v2] = from.reflection;
    if (std::abs(std::hypot(v1, v2) - 1.0) > 1e-12) throw ConfigError("reflection vector must be a unit vector");
    const double gamma = std::numbers::pi / 4.0 + std::atan2(v2, v1);
    const double c = std::cos(gamma), s = std::sin(gamma);
    Network net = make_fragment(2, 2, 2, to);
    net.set_parameter(weight_name(0), Tensor::matrix({{c, s}, {-s, c}}));
    net.set_parameter(weight_name(1), Tensor::matrix({{c, -s}, {s, c}}));
    return net;
  }
  throw ConfigError(std::string("no fragment reproducing ") + to_string(f) + " with " + to_string(to) + " activations");
}

Tensor apply_source(const FragmentSource& from, const Tensor& x) {
  ActivationParams p;
  p.kind = from.kind;
  p.group_size = 2;
  if (from.kind == ActivationKind::PRelu) p.slopes = Tensor::vector({from.prelu_slope});
  if (from.kind == ActivationKind::Householder) {
    p.reflections = Tensor({1, 2}, std::vector<double>{from.reflection[0], from.reflection[1]});
  }
  return apply_activation(p, x);
}

}  // namespace lipspline
