#include "lipspline/fit1d.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "lipspline/error.hpp"
#include "lipspline/io.hpp"

namespace lipspline {

const char* to_string(Target t) {
  switch (t) {
    case Target::F1: return "f1";
    case Target::F2: return "f2";
    case Target::F3: return "f3";
  }
  return "?";
}

Target parse_target(const std::string& name) {
  for (auto t : {Target::F1, Target::F2, Target::F3}) {
    if (name == to_string(t)) return t;
  }
  throw ConfigError("unknown target '" + name + "' (expected f1, f2 or f3)");
}

double target_value(Target t, double x) {
  switch (t) {
    case Target::F1: {
      const double r = std::fmod(x + 1.0, 0.5);
      return std::abs(r - 0.25) - 0.125;
    }
    case Target::F2: {
      // value at the left end of interval i is 0.25 * ceil(i / 2); mean over [-1, 1] is 0.5625
      const double u = (x + 1.0) / 0.25;
      const auto i = static_cast<long>(std::clamp(std::floor(u), 0.0, 7.0));
      const double start = 0.25 * static_cast<double>((i + 1) / 2);
      const double within = x - (-1.0 + 0.25 * static_cast<double>(i));
      return start + (i % 2 == 0 ? within : 0.0) - 0.5625;
    }
    case Target::F3: {
      const double w = 7.0 * std::numbers::pi;
      return std::sin(w * x) / w;
    }
  }
  return 0.0;
}

namespace {

Tensor column(const std::vector<double>& v) { return Tensor({v.size(), 1}, v); }

double mse(const FrozenNetwork& net, const Tensor& x, const Tensor& y) {
  const Tensor p = net.apply(x);
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += (p[i] - y[i]) * (p[i] - y[i]);
  return acc / static_cast<double>(p.size());
}

}  // namespace

Fit1dResult fit_1d(const Fit1dConfig& cfg) {
  validate(cfg.train);
  if (cfg.spec.widths.empty() || cfg.spec.widths.front() != 1 || cfg.spec.widths.back() != 1) {
    throw ConfigError("fit1d needs a scalar-to-scalar network");
  }
  if (cfg.train_points == 0 || cfg.test_points < 2) throw ConfigError("fit1d needs training and test points");
  std::mt19937_64 rng(cfg.train.seed);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  std::vector<double> xs(cfg.train_points), ys(cfg.train_points);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    xs[i] = uniform(rng);
    ys[i] = target_value(cfg.target, xs[i]);
  }
  std::vector<double> xt(cfg.test_points), yt(cfg.test_points);
  for (std::size_t i = 0; i < xt.size(); ++i) {
    xt[i] = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(cfg.test_points - 1);
    yt[i] = target_value(cfg.target, xt[i]);
  }
  const Tensor x_train = column(xs), y_train = column(ys);
  const Tensor x_test = column(xt), y_test = column(yt);

  Fit1dResult result{Network(cfg.spec), {}, 0.0};
  Network& net = result.net;
  Adam opt;
  const std::size_t log_every = std::max<std::size_t>(cfg.log_every, 1);
  for (std::size_t epoch = 1; epoch <= cfg.train.epochs; ++epoch) {
    const auto order = shuffled_indices(xs.size(), rng);
    for (std::size_t b = 0; b < order.size(); b += cfg.train.batch_size) {
      const std::size_t e = std::min(order.size(), b + cfg.train.batch_size);
      const std::span<const std::size_t> idx(order.data() + b, e - b);
      train_step(net, opt, gather_rows(x_train, idx), gather_rows(y_train, idx), cfg.train);
    }
    if (epoch % log_every != 0 && epoch != cfg.train.epochs) continue;
    const FrozenNetwork frozen = net.freeze();
    EpochMetrics m;
    m.epoch = epoch;
    m.train_mse = mse(frozen, x_train, y_train);
    m.test_mse = mse(frozen, x_test, y_test);
    m.mean_aelr = net.mean_aelr();
    if (cfg.audit_pairs > 0) {
      m.lipschitz_audit = lipschitz_audit(frozen, {1}, cfg.audit_pairs, cfg.train.seed + epoch).max_ratio;
    }
    result.history.push_back(m);
  }
  if (result.history.empty()) {
    result.test_mse = mse(net.freeze(), x_test, y_test);
  } else {
    result.test_mse = result.history.back().test_mse;
  }
  return result;
}

std::string metrics_csv(const std::vector<EpochMetrics>& history) {
  CsvWriter csv({"epoch", "train_mse", "test_mse", "mean_aelr", "lipschitz_audit"});
  for (const auto& m : history) {
    csv.cell(m.epoch).cell(m.train_mse).cell(m.test_mse).cell(m.mean_aelr).cell(m.lipschitz_audit);
    csv.end_row();
  }
  return csv.str();
}

}  // namespace lipspline
