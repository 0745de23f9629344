#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "generators.hpp"
#include "lipspline/activation.hpp"
#include "lipspline/error.hpp"
#include "lipspline/fragments.hpp"
#include "lipspline/ops.hpp"

using namespace lipspline;
using lipspline::testing::Gen;

namespace {

const double kInvSqrt2 = 1.0 / std::sqrt(2.0);

Tensor pair(double a, double b) { return Tensor({1, 2}, {a, b}); }

double sup_error(const FragmentSource& from, ActivationKind to, double bound, std::size_t points) {
  const Network net = build_equivalence_fragment(from, to, bound);
  const FrozenNetwork frozen = net.freeze();
  const std::size_t width = fragment_width(from);
  Tensor x({points, width});
  Gen gen(77);
  for (std::size_t i = 0; i < points; ++i) {
    if (width == 1) {
      x[i] = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(points - 1);
    } else {
      x[2 * i] = gen.uniform(-1, 1);
      x[2 * i + 1] = gen.uniform(-1, 1);
    }
  }
  return max_abs_diff(frozen.apply(x).data(), apply_source(from, x).data());
}

}  // namespace

TEST_SUITE("activations") {
  TEST_CASE("MaxMin emits (max, min)") {
    const Tensor y = ops::group_sort(pair(1, 3), 2, true, nullptr);
    CHECK(y[0] == 3.0);
    CHECK(y[1] == 1.0);
    ActivationParams p;
    p.kind = ActivationKind::GroupSort;
    p.group_size = 2;
    const Tensor z = apply_activation(p, pair(1, 3));
    CHECK(z.storage() == std::vector<double>{3, 1});
  }

  TEST_CASE("larger groups sort ascending and preserve the multiset") {
    Gen gen(1);
    ActivationParams p;
    p.kind = ActivationKind::GroupSort;
    p.group_size = 4;
    for (int trial = 0; trial < 50; ++trial) {
      const Tensor x = gen.tensor({3, 8});
      const Tensor y = apply_activation(p, x);
      for (std::size_t b = 0; b < 3; ++b) {
        for (std::size_t g = 0; g < 2; ++g) {
          std::vector<double> in(x.data().begin() + static_cast<long>(b * 8 + g * 4),
                                 x.data().begin() + static_cast<long>(b * 8 + g * 4 + 4));
          std::sort(in.begin(), in.end());
          for (std::size_t j = 0; j < 4; ++j) CHECK(y[b * 8 + g * 4 + j] == in[j]);
        }
      }
    }
  }

  TEST_CASE("Householder reflects only when v^T x <= 0") {
    const Tensor v({1, 2}, {0, 1});
    const Tensor y = ops::householder(pair(1, -1), v);
    CHECK(y[0] == doctest::Approx(1.0));
    CHECK(y[1] == doctest::Approx(1.0));
    const Tensor z = ops::householder(pair(1, 2), v);
    CHECK(z.storage() == std::vector<double>{1, 2});
  }

  TEST_CASE("PReLU with slope -1 is the absolute value") {
    const Tensor y = ops::prelu(Tensor({1, 1}, {-2.0}), Tensor::vector({-1.0}));
    CHECK(y[0] == 2.0);
    Gen gen(2);
    const Tensor x = gen.tensor({20, 1});
    const Tensor p = ops::prelu(x, Tensor::vector({-1.0}));
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(p[i] == std::abs(x[i]));
  }

  TEST_CASE("absolute value through MaxMin") {
    Gen gen(3);
    for (int i = 0; i < 200; ++i) {
      const double x = gen.uniform(-5, 5);
      const Tensor mm = ops::group_sort(pair(kInvSqrt2 * x, -kInvSqrt2 * x), 2, true, nullptr);
      CHECK(kInvSqrt2 * mm[0] - kInvSqrt2 * mm[1] == doctest::Approx(std::abs(x)).epsilon(1e-14));
    }
  }

  TEST_CASE("Householder with v = (1, -1)/sqrt(2) is MaxMin") {
    Gen gen(4);
    const Tensor v({1, 2}, {kInvSqrt2, -kInvSqrt2});
    for (int i = 0; i < 200; ++i) {
      const Tensor x = pair(gen.normal(), gen.normal());
      const Tensor h = ops::householder(x, v);
      const Tensor m = ops::group_sort(x, 2, true, nullptr);
      CHECK(h[0] == doctest::Approx(m[0]).epsilon(1e-14));
      CHECK(h[1] == doctest::Approx(m[1]).epsilon(1e-14));
    }
  }

  TEST_CASE("norm-preserving activations preserve norms and are 1-Lipschitz") {
    Gen gen(5);
    ActivationParams gs;
    gs.kind = ActivationKind::GroupSort;
    ActivationParams hh;
    hh.kind = ActivationKind::Householder;
    hh.reflections = Tensor({2, 2}, {0.6, 0.8, -kInvSqrt2, kInvSqrt2});
    for (int trial = 0; trial < 100; ++trial) {
      const Tensor x = gen.tensor({1, 4});
      const Tensor y = gen.tensor({1, 4});
      for (const ActivationParams* p : {&gs, &hh}) {
        const Tensor fx = apply_activation(*p, x);
        const Tensor fy = apply_activation(*p, y);
        CHECK(norm2(fx.data()) == doctest::Approx(norm2(x.data())).epsilon(1e-13));
        Tensor dx = x, df = fx;
        for (std::size_t i = 0; i < 4; ++i) {
          dx[i] -= y[i];
          df[i] -= fy[i];
        }
        CHECK(norm2(df.data()) <= norm2(dx.data()) * (1 + 1e-12));
      }
    }
  }

  TEST_CASE("PReLU with |a| <= 1 is 1-Lipschitz") {
    Gen gen(6);
    for (int trial = 0; trial < 200; ++trial) {
      const double a = gen.uniform(-1, 1);
      const double x = gen.normal(), y = gen.normal();
      const Tensor s = Tensor::vector({a});
      const double fx = ops::prelu(Tensor({1, 1}, {x}), s)[0];
      const double fy = ops::prelu(Tensor({1, 1}, {y}), s)[0];
      CHECK(std::abs(fx - fy) <= std::abs(x - y) * (1 + 1e-15));
    }
  }

  TEST_CASE("equivalence fragments reproduce their source activation") {
    FragmentSource prelu;
    prelu.kind = ActivationKind::PRelu;
    prelu.prelu_slope = 0.5;
    CHECK(sup_error(prelu, ActivationKind::AbsoluteValue, 10.0, 2001) <= 1e-9);

    FragmentSource av;
    av.kind = ActivationKind::AbsoluteValue;
    CHECK(sup_error(av, ActivationKind::PRelu, 1.0, 2001) <= 1e-9);
    CHECK(sup_error(av, ActivationKind::GroupSort, 1.0, 2001) <= 1e-9);

    FragmentSource maxmin;
    maxmin.kind = ActivationKind::GroupSort;
    CHECK(sup_error(maxmin, ActivationKind::AbsoluteValue, 2.0, 2001) <= 1e-9);
    CHECK(sup_error(maxmin, ActivationKind::Householder, 1.0, 2001) <= 1e-9);

    FragmentSource hh;
    hh.kind = ActivationKind::Householder;
    hh.reflection = {0.6, -0.8};
    CHECK(sup_error(hh, ActivationKind::GroupSort, 1.0, 2001) <= 1e-9);
  }

  TEST_CASE("fragment construction rejects unsupported requests") {
    FragmentSource av;
    CHECK_THROWS_AS(build_equivalence_fragment(av, ActivationKind::Householder, 1.0), ConfigError);
    FragmentSource prelu;
    prelu.kind = ActivationKind::PRelu;
    prelu.prelu_slope = 1.5;
    CHECK_THROWS_AS(build_equivalence_fragment(prelu, ActivationKind::AbsoluteValue, 1.0), ConfigError);
  }

  TEST_CASE("activation names round-trip") {
    for (auto k : {ActivationKind::Identity, ActivationKind::Lls, ActivationKind::Relu, ActivationKind::AbsoluteValue,
                   ActivationKind::PRelu, ActivationKind::GroupSort, ActivationKind::Householder}) {
      CHECK(parse_activation(to_string(k)) == k);
    }
    CHECK_THROWS_AS(parse_activation("swish"), ConfigError);
  }

  TEST_CASE("spline activation applies one spline per channel") {
    Gen gen(8);
    ActivationParams p;
    p.kind = ActivationKind::Lls;
    p.grid = {0.5, -2};
    p.coeffs = Tensor({2, 7});
    const Spline s0 = init_spline(SplineInit::Relu, 7, 1.0);
    const Spline s1 = init_spline(SplineInit::AbsoluteValue, 7, 1.0);
    for (std::size_t j = 0; j < 7; ++j) {
      p.coeffs.at(0, j) = s0.coeffs[j];
      p.coeffs.at(1, j) = s1.coeffs[j];
    }
    p.alpha = Tensor::vector({1.0, 1.0});
    const Tensor x = gen.tensor({10, 2}, 2.0);
    const Tensor y = apply_activation(p, x);
    for (std::size_t b = 0; b < 10; ++b) {
      CHECK(y.at(b, 0) == doctest::Approx(std::max(0.0, x.at(b, 0))).epsilon(1e-13));
      CHECK(y.at(b, 1) == doctest::Approx(std::abs(x.at(b, 1))).epsilon(1e-13));
    }
  }
}
