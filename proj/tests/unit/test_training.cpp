#include <doctest.h>

#include <cmath>
#include <numbers>

#include "generators.hpp"
#include "lipspline/checkpoint.hpp"
#include "lipspline/error.hpp"
#include "lipspline/fit1d.hpp"
#include "lipspline/network.hpp"
#include "lipspline/training.hpp"
#include "oracles.hpp"

using namespace lipspline;
using lipspline::testing::Gen;

namespace {

NetworkSpec dense_spec(std::vector<std::size_t> widths, ActivationKind kind, Constraint c = Constraint::Spectral,
                       std::uint64_t seed = 1) {
  NetworkSpec s;
  s.widths = std::move(widths);
  s.activation.kind = kind;
  s.constraint = c;
  s.seed = seed;
  return s;
}

std::size_t stored_parameters(const Network& net) {
  std::size_t n = 0;
  for (const auto& [name, t] : net.parameters()) n += t.size();
  return n;
}

Tensor column(std::size_t n, double lo, double hi) {
  Tensor x({n, 1});
  for (std::size_t i = 0; i < n; ++i) x[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return x;
}

}  // namespace

TEST_SUITE("training") {
  TEST_CASE("identity weights without activations give the identity map") {
    NetworkSpec spec = dense_spec({3, 3}, ActivationKind::Relu, Constraint::Spectral);
    Network net(spec);
    net.set_parameter(weight_name(0), Tensor::matrix({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}));
    net.set_parameter(bias_name(0), Tensor({3}));
    Gen gen(1);
    const Tensor x = gen.tensor({5, 3});
    CHECK(max_abs_diff(net.freeze().apply(x).data(), x.data()) <= 1e-12);
  }

  TEST_CASE("parameter count formula") {
    NetworkSpec spec = dense_spec({1, 10, 10, 10, 1}, ActivationKind::Lls);
    spec.activation.spline_size = 21;
    const std::size_t weights = 1 * 10 + 10 * 10 + 10 * 10 + 10 * 1;
    const std::size_t biases = 10 + 10 + 10 + 1;
    const std::size_t splines = 3 * 10 * (21 + 1);
    CHECK(parameter_count(spec) == weights + biases + splines);
    CHECK(stored_parameters(Network(spec)) == parameter_count(spec));

    Gen gen(2);
    for (int trial = 0; trial < 30; ++trial) {
      NetworkSpec s;
      s.layer_kind = gen.coin() ? LayerKind::Dense : LayerKind::Conv;
      const std::size_t depth = gen.index(1, 4);
      for (std::size_t l = 0; l <= depth; ++l) s.widths.push_back(2 * gen.index(1, 3));
      const ActivationKind kinds[] = {ActivationKind::Lls, ActivationKind::Relu, ActivationKind::PRelu,
                                      ActivationKind::GroupSort, ActivationKind::Householder,
                                      ActivationKind::AbsoluteValue};
      s.activation.kind = kinds[gen.index(0, 5)];
      s.activation.shared = gen.coin();
      s.activation.spline_size = 2 * gen.index(1, 10) + 1;
      s.bias = gen.coin();
      s.image_size = 6;
      s.seed = static_cast<std::uint64_t>(trial);
      CHECK(stored_parameters(Network(s)) == parameter_count(s));
    }
  }

  TEST_CASE("invalid specs are rejected") {
    CHECK_THROWS_AS(Network(dense_spec({3}, ActivationKind::Relu)), ConfigError);
    CHECK_THROWS_AS(Network(dense_spec({2, 3, 1}, ActivationKind::GroupSort)), ConfigError);
    NetworkSpec even = dense_spec({1, 4, 1}, ActivationKind::Lls);
    even.activation.spline_size = 10;
    CHECK_THROWS_AS(Network{even}, ConfigError);
  }

  TEST_CASE("every freshly built network passes the Lipschitz audit") {
    const ActivationKind kinds[] = {ActivationKind::Lls, ActivationKind::Relu, ActivationKind::AbsoluteValue,
                                    ActivationKind::PRelu, ActivationKind::GroupSort, ActivationKind::Householder};
    std::uint64_t seed = 10;
    for (ActivationKind kind : kinds) {
      for (Constraint c : {Constraint::Spectral, Constraint::Orthonormal}) {
        NetworkSpec spec = dense_spec({4, 8, 8, 2}, kind, c, seed++);
        spec.activation.spline_init = SplineInit::AbsoluteValue;
        const AuditResult r = lipschitz_audit(Network(spec).freeze(), {4}, 2000, seed);
        CHECK(r.max_ratio <= 1.0 + 1e-6);
      }
    }
  }

  TEST_CASE("frozen weights respect their constraint") {
    Gen gen(3);
    Network spectral(dense_spec({5, 7, 3}, ActivationKind::Relu, Constraint::Spectral, 4));
    Network ortho(dense_spec({5, 7, 3}, ActivationKind::Relu, Constraint::Orthonormal, 4));
    for (auto* net : {&spectral, &ortho}) {
      for (std::size_t l = 0; l < 2; ++l) {
        net->set_parameter(weight_name(l), gen.tensor(net->parameter(weight_name(l)).shape(), 3.0));
      }
    }
    const FrozenNetwork fs = spectral.freeze();
    const FrozenNetwork fo = ortho.freeze();
    for (const auto& layer : fs.layers()) {
      CHECK(lipspline::testing::svd_norm(lipspline::testing::to_matrix(layer.weight)) <= 1.0 + 1e-12);
    }
    for (const auto& layer : fo.layers()) {
      CHECK(lipspline::testing::qr_defect(lipspline::testing::to_matrix(layer.weight)) <= 1e-6);
    }
  }

  TEST_CASE("graph forward agrees with the frozen network once the constraints converge") {
    Gen gen(4);
    for (ActivationKind kind : {ActivationKind::Lls, ActivationKind::PRelu, ActivationKind::Householder}) {
      Network net(dense_spec({3, 6, 6, 2}, kind, Constraint::Spectral, 5));
      net.refresh_constraints(500);
      const Tensor x = gen.tensor({7, 3});
      Graph g;
      const Var y = net.forward(g, g.input("x")).y;
      g.evaluate({{"x", x}});
      CHECK(max_abs_diff(g.value(y).data(), net.freeze().apply(x).data()) <= 1e-8);
    }
  }

  TEST_CASE("objective values") {
    SUBCASE("perfect fit without regularization is zero") {
      Network net(dense_spec({1, 4, 1}, ActivationKind::Relu));
      const Tensor x = column(20, -1, 1);
      net.refresh_constraints(200);
      Graph g;
      const Var y = net.forward(g, g.input("x")).y;
      g.evaluate({{"x", x}});
      CHECK(objective(net, x, g.value(y), 0.0) == doctest::Approx(0.0).epsilon(1e-20));
    }
    SUBCASE("identity splines contribute no TV(2)") {
      NetworkSpec spec = dense_spec({1, 3, 1}, ActivationKind::Lls);
      spec.activation.spline_init = SplineInit::Identity;
      Network net(spec);
      const Tensor x = column(10, -1, 1);
      const Tensor t = column(10, 0, 1);
      CHECK(std::abs(objective(net, x, t, 0.7) - objective(net, x, t, 0.0)) <= 1e-12);
    }
    SUBCASE("single ReLU spline on the grid {-1, 0, 1}") {
      NetworkSpec spec = dense_spec({1, 1, 1}, ActivationKind::Lls);
      spec.activation.spline_size = 3;
      spec.activation.spline_range = 1.0;
      Network net(spec);
      CHECK(net.total_tv2() == doctest::Approx(1.0));
      const Tensor x = column(5, -1, 1);
      net.refresh_constraints(50);
      Graph g;
      const Var y = net.forward(g, g.input("x")).y;
      g.evaluate({{"x", x}});
      CHECK(objective(net, x, g.value(y), 0.5) == doctest::Approx(0.5).epsilon(1e-12));
    }
  }

  TEST_CASE("first Adam step moves every entry by about eta") {
    Gen gen(5);
    TrainConfig cfg;
    cfg.eta = 1e-2;
    std::map<std::string, Tensor> params{{weight_name(0), gen.tensor({4, 3})}};
    const auto before = params;
    Gradients grads{{weight_name(0), gen.tensor({4, 3})}};
    Adam opt;
    opt.step(params, grads, cfg);
    for (std::size_t i = 0; i < 12; ++i) {
      const double moved = before.at(weight_name(0))[i] - params.at(weight_name(0))[i];
      const double g = grads.at(weight_name(0))[i];
      CHECK(moved == doctest::Approx(cfg.eta * g / (std::abs(g) + Adam::kEps)).epsilon(1e-12));
    }
    CHECK(opt.steps() == 1);
  }

  TEST_CASE("zero gradient leaves parameters unchanged") {
    TrainConfig cfg;
    std::map<std::string, Tensor> params{{weight_name(0), Tensor::vector({1, 2})}};
    Adam opt;
    opt.step(params, {{weight_name(0), Tensor({2})}}, cfg);
    CHECK(params.at(weight_name(0)).storage() == std::vector<double>{1, 2});
  }

  TEST_CASE("parameter groups move at their own learning rates") {
    TrainConfig cfg;
    cfg.eta = 1e-3;
    CHECK(learning_rate(weight_name(0), cfg) == 1e-3);
    CHECK(learning_rate(coeffs_name(0), cfg) == doctest::Approx(1e-3 / 40));
    CHECK(learning_rate(alpha_name(0), cfg) == doctest::Approx(1e-3 * cfg.alpha_ratio));
    std::map<std::string, Tensor> params{{weight_name(0), Tensor::vector({0})}, {coeffs_name(0), Tensor::vector({0})}};
    Gradients grads{{weight_name(0), Tensor::vector({0.3})}, {coeffs_name(0), Tensor::vector({0.3})}};
    Adam opt;
    opt.step(params, grads, cfg);
    CHECK(params.at(coeffs_name(0))[0] / params.at(weight_name(0))[0] == doctest::Approx(1.0 / 40).epsilon(1e-9));
  }

  TEST_CASE("non-finite gradients raise and leave the state untouched") {
    TrainConfig cfg;
    std::map<std::string, Tensor> params{{weight_name(0), Tensor::vector({1, 2})}};
    Adam opt;
    CHECK_THROWS_AS(opt.step(params, {{weight_name(0), Tensor::vector({1, NAN})}}, cfg), NumericError);
    CHECK(params.at(weight_name(0)).storage() == std::vector<double>{1, 2});
    CHECK(opt.steps() == 0);
  }

  TEST_CASE("training steps reduce the loss") {
    NetworkSpec spec = dense_spec({1, 8, 8, 1}, ActivationKind::Lls);
    spec.activation.spline_size = 21;
    Network net(spec);
    const Tensor x = column(64, -1, 1);
    Tensor y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = target_value(Target::F3, x[i]);
    TrainConfig cfg;
    cfg.eta = 5e-3;
    Adam opt;
    const double start = objective(net, x, y, 0.0);
    for (int i = 0; i < 200; ++i) train_step(net, opt, x, y, cfg);
    CHECK(objective(net, x, y, 0.0) < 0.5 * start);
  }

  TEST_CASE("target functions") {
    CHECK(target_value(Target::F3, 1.0 / 14.0) == doctest::Approx(1.0 / (7.0 * std::numbers::pi)).epsilon(1e-14));
    for (Target t : {Target::F1, Target::F2, Target::F3}) {
      const std::size_t n = 100001;
      double sum = 0.0, ratio = 0.0, prev = target_value(t, -1.0);
      for (std::size_t i = 1; i < n; ++i) {
        const double x = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1);
        const double v = target_value(t, x);
        ratio = std::max(ratio, std::abs(v - prev) / (2.0 / static_cast<double>(n - 1)));
        sum += v;
        prev = v;
      }
      CHECK(ratio <= 1.0 + 1e-9);
      CHECK(std::abs(sum / static_cast<double>(n)) <= 1e-4);
      CHECK(parse_target(to_string(t)) == t);
    }
  }

  TEST_CASE("fit_1d records the schedule") {
    Fit1dConfig cfg;
    cfg.spec = dense_spec({1, 6, 1}, ActivationKind::Lls);
    cfg.spec.activation.spline_size = 11;
    cfg.train.epochs = 4;
    cfg.train_points = 50;
    cfg.test_points = 200;
    cfg.audit_pairs = 200;
    const Fit1dResult r = fit_1d(cfg);
    REQUIRE(r.history.size() == 4);
    CHECK(r.history.back().test_mse == r.test_mse);
    for (const auto& e : r.history) CHECK(e.lipschitz_audit <= 1.0 + 1e-6);
    const std::string csv = metrics_csv(r.history);
    CHECK(csv.rfind("epoch,train_mse,test_mse,mean_aelr,lipschitz_audit\n", 0) == 0);
  }

  TEST_CASE("checkpoints round-trip bit-exactly") {
    NetworkSpec spec = dense_spec({2, 6, 6, 1}, ActivationKind::Lls, Constraint::Orthonormal, 7);
    Network net(spec);
    Gen gen(6);
    const Tensor x = gen.tensor({16, 2});
    Tensor y({16, 1});
    TrainConfig cfg;
    Adam opt;
    for (int i = 0; i < 5; ++i) train_step(net, opt, x, y, cfg);
    CheckpointMeta meta{{"note", "hello world"}};
    const std::string text = serialize_checkpoint(net, meta);
    CheckpointMeta back_meta;
    const Network back = deserialize_checkpoint(text, &back_meta);
    CHECK(back_meta == meta);
    CHECK(back.parameters() == net.parameters());
    CHECK(back.power_state() == net.power_state());
    CHECK(serialize_checkpoint(back, meta) == text);
    CHECK(back.freeze().apply(x) == net.freeze().apply(x));
  }

  TEST_CASE("malformed checkpoints are rejected") {
    CHECK_THROWS_AS(deserialize_checkpoint("not a checkpoint\n"), ConfigError);
    const std::string text = serialize_checkpoint(Network(dense_spec({1, 2, 1}, ActivationKind::Relu)));
    CHECK_THROWS_AS(deserialize_checkpoint(text.substr(0, text.size() / 2)), ConfigError);
  }
}
