#include "lipspline/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lipspline/error.hpp"

namespace lipspline {

void validate(const TrainConfig& cfg) {
  if (!(cfg.eta > 0.0)) throw ConfigError("learning rate must be positive");
  if (cfg.alpha_ratio < 0.0 || cfg.coeff_ratio < 0.0) throw ConfigError("learning-rate ratios must be non-negative");
  if (!(cfg.lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
  if (cfg.batch_size == 0) throw ConfigError("batch size must be positive");
  if (cfg.power_iters < 1) throw ConfigError("power_iters must be at least 1");
}

double learning_rate(const std::string& name, const TrainConfig& cfg) {
  switch (param_group(name)) {
    case ParamGroup::SplineCoeffs: return cfg.eta * cfg.coeff_ratio;
    case ParamGroup::SplineScale: return cfg.eta * cfg.alpha_ratio;
    case ParamGroup::Weight: return cfg.eta;
  }
  return cfg.eta;
}

void Adam::step(std::map<std::string, Tensor>& params, const Gradients& grads, const TrainConfig& cfg) {
  for (const auto& [name, g] : grads) {
    if (!g.all_finite()) throw NumericError("non-finite gradient for '" + name + "'; step aborted");
    auto it = params.find(name);
    if (it == params.end()) throw ConfigError("gradient for unknown parameter '" + name + "'");
    if (it->second.shape() != g.shape()) throw ShapeError("gradient shape mismatch for '" + name + "'");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
  for (const auto& [name, g] : grads) {
    Tensor& p = params.at(name);
    auto [mi, fresh_m] = m_.try_emplace(name, g.shape());
    auto [vi, fresh_v] = v_.try_emplace(name, g.shape());
    Tensor& m = mi->second;
    Tensor& v = vi->second;
    const double lr = learning_rate(name, cfg);
    for (std::size_t i = 0; i < g.size(); ++i) {
      m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g[i];
      v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p[i] -= lr * mhat / (std::sqrt(vhat) + kEps);
    }
  }
}

Objective build_objective(Graph& g, const Network& net, Var x, Var target, double lambda) {
  const auto out = net.forward(g, x);
  Objective o;
  const Var diff = g.sub(out.y, target);
  o.data = g.mean(g.mul(diff, diff));
  o.loss = o.data;
  if (out.tv2.valid()) {
    o.reg = out.tv2;
    if (lambda > 0.0) o.loss = g.add(o.data, g.scale(out.tv2, lambda));
  }
  return o;
}

double objective(const Network& net, const Tensor& x, const Tensor& y, double lambda) {
  Graph g;
  const auto o = build_objective(g, net, g.input("x"), g.input("y"), lambda);
  g.evaluate({{"x", x}, {"y", y}});
  double value = g.scalar(o.data);
  if (o.reg.valid()) value += lambda * g.scalar(o.reg);
  return value;
}

StepResult train_step(Network& net, Adam& opt, const Tensor& x, const Tensor& y, const TrainConfig& cfg) {
  net.refresh_constraints(cfg.power_iters);
  Graph g;
  const auto o = build_objective(g, net, g.input("x"), g.input("y"), cfg.lambda);
  g.evaluate({{"x", x}, {"y", y}});
  StepResult r{g.scalar(o.loss), g.scalar(o.data)};
  const Gradients grads = g.gradient(o.loss);
  opt.step(net.parameters(), grads, cfg);
  net.project_splines();
  return r;
}

Tensor gather_rows(const Tensor& t, std::span<const std::size_t> idx) {
  if (t.rank() == 0) throw ShapeError("gather_rows on empty tensor");
  const std::size_t row = t.size() / t.dim(0);
  Shape s = t.shape();
  s[0] = idx.size();
  Tensor out(s);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= t.dim(0)) throw ShapeError("gather_rows index out of range");
    std::copy_n(t.data().begin() + static_cast<long>(idx[r] * row), row, out.data().begin() + static_cast<long>(r * row));
  }
  return out;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

}  // namespace lipspline
