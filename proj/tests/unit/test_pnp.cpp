#include <doctest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>

#include "generators.hpp"
#include "lipspline/error.hpp"
#include "lipspline/forward_model.hpp"
#include "lipspline/image.hpp"
#include "lipspline/pnp.hpp"
#include "oracles.hpp"

using namespace lipspline;
using lipspline::testing::Gen;

namespace {

double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double distance(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

std::complex<double> naive_dft(const Tensor& x, std::size_t u, std::size_t v) {
  const std::size_t h = x.dim(0), w = x.dim(1);
  std::complex<double> s = 0.0;
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j) {
      const double phase = -2.0 * std::numbers::pi *
                           (static_cast<double>(u * i) / static_cast<double>(h) + static_cast<double>(v * j) / static_cast<double>(w));
      s += x.at(i, j) * std::polar(1.0, phase);
    }
  return s / std::sqrt(static_cast<double>(h * w));
}

const ImageMap kZero = [](const Tensor& x) { return Tensor(x.shape()); };
const ImageMap kIdentity = [](const Tensor& x) { return x; };

PnPConfig tight() {
  PnPConfig cfg;
  cfg.tol = 1e-12;
  cfg.max_iter = 5000;
  return cfg;
}

}  // namespace

TEST_SUITE("pnp") {
  TEST_CASE("data gradient") {
    Gen gen(1);
    const IdentityModel id(4, 5);
    const Tensor x = gen.tensor({4, 5});
    const Tensor g = data_gradient(id, x, x);
    for (double v : g.data()) CHECK(v == 0.0);
    const Tensor one({4, 5}, 1.0);
    const Tensor g1 = data_gradient(id, Tensor({4, 5}), one);
    for (double v : g1.data()) CHECK(v == -1.0);

    const CircularBlur blur(mild_blur_kernel(), 6, 6);
    const Tensor z = gen.tensor({6, 6});
    const Tensor gz = data_gradient(blur, z, blur.apply(z));
    for (double v : gz.data()) CHECK(std::abs(v) <= 1e-14);
  }

  TEST_CASE("dft2 matches the naive unitary sum") {
    Gen gen(2);
    const Tensor x = gen.tensor({5, 6});
    const auto f = dft2(x);
    for (std::size_t u = 0; u < 5; ++u)
      for (std::size_t v = 0; v < 6; ++v) CHECK(std::abs(f[u * 6 + v] - naive_dft(x, u, v)) <= 1e-12);
  }

  TEST_CASE("masked DFT samples only the chosen columns") {
    Gen gen(3);
    const std::size_t h = 6, w = 8;
    const MaskedDft model({0, 3, 5}, h, w);
    const Tensor x = gen.tensor({h, w});
    const Tensor y = model.apply(x);
    REQUIRE(y.shape() == Shape{2, h, w});
    for (std::size_t u = 0; u < h; ++u)
      for (std::size_t v = 0; v < w; ++v) {
        const std::complex<double> got(y[u * w + v], y[h * w + u * w + v]);
        const std::complex<double> want = model.sampled(v) ? naive_dft(x, u, v) : 0.0;
        CHECK(std::abs(got - want) <= 1e-12);
      }
    CHECK(model.operator_norm() == 1.0);
    CHECK(model.min_singular_value() == 0.0);
    const MaskedDft full({0, 1, 2, 3, 4, 5, 6, 7}, h, w);
    CHECK(distance(full.adjoint(full.apply(x)), x) <= 1e-12);
  }

  TEST_CASE("adjoints satisfy <Hx, y> = <x, H^T y>") {
    Gen gen(4);
    for (int trial = 0; trial < 10; ++trial) {
      const std::size_t h = gen.index(3, 9), w = gen.index(3, 9);
      const CircularBlur blur(gen.tensor({3, 3}), h, w);
      const Tensor x = gen.tensor({h, w}), y = gen.tensor({h, w});
      CHECK(dot(blur.apply(x), y) == doctest::Approx(dot(x, blur.adjoint(y))).epsilon(1e-12));

      std::vector<std::size_t> cols;
      for (std::size_t c = 0; c < w; ++c)
        if (gen.coin()) cols.push_back(c);
      const MaskedDft dft(cols, h, w);
      const Tensor yd = dft.apply(gen.tensor({h, w}));
      CHECK(dot(dft.apply(x), yd) == doctest::Approx(dot(x, dft.adjoint(yd))).epsilon(1e-12));
    }
  }

  TEST_CASE("circular blur matches direct circular correlation") {
    Gen gen(5);
    const std::size_t h = 5, w = 7;
    const Tensor k = gen.tensor({3, 3});
    const CircularBlur blur(k, h, w);
    const Tensor x = gen.tensor({h, w});
    const Tensor y = blur.apply(x);
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j) {
        double s = 0.0;
        for (std::size_t a = 0; a < 3; ++a)
          for (std::size_t b = 0; b < 3; ++b) s += k.at(a, b) * x.at((i + a + h - 1) % h, (j + b + w - 1) % w);
        CHECK(y.at(i, j) == doctest::Approx(s).epsilon(1e-13));
      }
  }

  TEST_CASE("mild blur singular values lie in [0.2, 1]") {
    const std::size_t n = 6;
    const CircularBlur blur(mild_blur_kernel(), n, n);
    lipspline::testing::Matrix m(n * n, n * n);
    for (std::size_t j = 0; j < n * n; ++j) {
      Tensor e({n, n});
      e[j] = 1.0;
      const Tensor col = blur.apply(e);
      for (std::size_t i = 0; i < n * n; ++i) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = col[i];
    }
    const Eigen::VectorXd sv = Eigen::JacobiSVD<lipspline::testing::Matrix>(m).singularValues();
    CHECK(sv.maxCoeff() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(sv.minCoeff() >= 0.2 - 1e-12);
    CHECK(blur.operator_norm() == doctest::Approx(sv.maxCoeff()).epsilon(1e-12));
    CHECK(blur.min_singular_value() == doctest::Approx(sv.minCoeff()).epsilon(1e-12));
  }

  TEST_CASE("mask parsing") {
    CHECK(parse_mask_columns("3, 1 1\n# note\n0", 4) == std::vector<std::size_t>{0, 1, 3});
    CHECK_THROWS_AS(parse_mask_columns("4", 4), ConfigError);
    CHECK_THROWS_AS(parse_mask_columns("1 x", 4), ConfigError);
    CHECK_THROWS_AS(parse_mask_columns("-1", 4), ConfigError);
    const auto m = random_column_mask(64, 0.3, 7);
    CHECK(m.size() >= 19);
    CHECK(m.size() <= 20);
    CHECK(std::find(m.begin(), m.end(), 0) != m.end());
    CHECK(random_column_mask(64, 0.3, 7) == m);
  }

  TEST_CASE("closed-form fixed points") {
    Gen gen(6);
    const IdentityModel id(4, 4);
    const Tensor y = gen.tensor({4, 4});
    PnPConfig cfg = tight();
    cfg.alpha = 1.0;
    const PnPRun half = pnp_fbs(y, id, AveragedDenoiser(kZero, 0.5), cfg);
    CHECK(half.converged);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(half.x[i] == doctest::Approx(0.5 * y[i]).epsilon(1e-12));

    const PnPRun scaled = pnp_fbs(y, id, AveragedDenoiser(kIdentity, 0.3, 0.7), cfg);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(scaled.x[i] == doctest::Approx(0.7 * y[i]).epsilon(1e-12));

    const CircularBlur blur(mild_blur_kernel(), 8, 8);
    const Tensor x0 = gen.tensor({8, 8});
    PnPConfig c2 = tight();
    c2.max_iter = 20000;
    const PnPRun inv = pnp_fbs(blur.apply(x0), blur, AveragedDenoiser(kIdentity, 0.5), c2);
    CHECK(inv.converged);
    CHECK(distance(inv.x, x0) <= 1e-8);
  }

  TEST_CASE("diverging iterations raise NumericError") {
    const IdentityModel id(3, 3);
    const ImageMap blowup = [](const Tensor& x) {
      Tensor y = x;
      for (auto& v : y.data()) v = 3.0 * v + 1.0;
      return y;
    };
    PnPConfig cfg = tight();
    cfg.alpha = 0.5;
    CHECK_THROWS_AS(pnp_fbs(Tensor({3, 3}, 1.0), id, AveragedDenoiser(blowup, 0.9), cfg), NumericError);
  }

  TEST_CASE("stability certificate with an averaged denoiser") {
    Gen gen(7);
    const IdentityModel id(4, 4);
    const Tensor y1 = gen.tensor({4, 4}), y2 = gen.tensor({4, 4});
    PnPConfig cfg = tight();
    cfg.alpha = 1.0;
    const Prop3Report r = stability_certificate_prop3(id, AveragedDenoiser(kZero, 0.5), y1, y2, cfg);
    CHECK(r.pass);
    CHECK(r.invertible);
    CHECK(r.measurement_distance == doctest::Approx(distance(y1, y2)));
    CHECK(r.image_distance == doctest::Approx(0.5 * distance(y1, y2)).epsilon(1e-10));
    CHECK(r.lhs <= r.rhs);
    CHECK(r.corollary_pass);
    CHECK(r.sharp_pass);
  }

  TEST_CASE("certificate refusal gates") {
    const IdentityModel id(3, 3);
    const Tensor y1({3, 3}, 0.0), y2({3, 3}, 1.0);
    const PnPConfig cfg = tight();
    CHECK_THROWS_AS(stability_certificate_prop3(id, AveragedDenoiser(kZero, 0.6), y1, y2, cfg), CertificateRefused);
    CHECK_THROWS_AS(stability_certificate_prop3(id, AveragedDenoiser(kZero, 0.5, 0.9), y1, y2, cfg), CertificateRefused);
    PnPConfig loose = cfg;
    loose.tol = 1e-8;
    CHECK_THROWS_AS(stability_certificate_prop3(id, AveragedDenoiser(kZero, 0.5), y1, y2, loose), CertificateRefused);
    try {
      stability_certificate_prop3(id, AveragedDenoiser(kZero, 0.6), y1, y2, cfg);
    } catch (const CertificateRefused& e) {
      CHECK(std::string(e.what()).find("beta <= 1/2") != std::string::npos);
    }
    CHECK_THROWS_AS(stability_certificate_prop4(id, AveragedDenoiser(kZero, 0.5, 1.0), y1, y2, cfg), ConfigError);
  }

  TEST_CASE("contractive denoiser certificate") {
    Gen gen(8);
    const IdentityModel id(4, 4);
    const Tensor y1 = gen.tensor({4, 4}), y2 = gen.tensor({4, 4});
    PnPConfig cfg = tight();
    cfg.alpha = 1.0;
    for (double k : {0.5, 0.9}) {
      const Prop4Report r = stability_certificate_prop4(id, AveragedDenoiser(kIdentity, 0.0, k), y1, y2, cfg);
      CHECK(r.pass);
      CHECK(r.lipschitz == k);
      CHECK(r.image_distance == doctest::Approx(k * distance(y1, y2)).epsilon(1e-10));
      CHECK(r.bound == doctest::Approx(k / (1 - k) * distance(y1, y2)).epsilon(1e-12));
    }
  }

  TEST_CASE("PSNR") {
    const Tensor ref({10, 10}, 0.5);
    Tensor x = ref;
    for (auto& v : x.data()) v += 0.01;
    CHECK(psnr(x, ref) == doctest::Approx(40.0).epsilon(1e-10));
    CHECK(psnr(ref, ref) == kPsnrCap);
    CHECK_THROWS_AS(psnr(Tensor({3, 3}), ref), ShapeError);
  }

  TEST_CASE("SSIM terms") {
    const Tensor p = phantom(32, 3);
    CHECK(ssim(p, p) == doctest::Approx(1.0).epsilon(1e-12));
    Tensor shifted = p;
    for (auto& v : shifted.data()) v += 0.2;
    const SsimTerms t = ssim_terms(shifted, p);
    CHECK(t.luminance < 1.0);
    CHECK(t.structure == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(t.contrast == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(ssim(add_noise(p, 0.1, 4), p) < 0.9);
  }

  TEST_CASE("phantoms are deterministic and in range") {
    const Tensor a = phantom(64, 5);
    for (double v : a.data()) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    CHECK(phantom(64, 5) == a);
    CHECK(distance(phantom(64, 6), a) / 64.0 > 0.01);
  }

  TEST_CASE("noise statistics") {
    const Tensor z = add_noise(Tensor({100, 100}), 0.5, 9);
    double s = 0.0, s2 = 0.0;
    for (double v : z.data()) {
      s += v;
      s2 += v * v;
    }
    CHECK(std::abs(s / 1e4) <= 3 * 0.5 / 100);
    CHECK(std::sqrt(s2 / 1e4) == doctest::Approx(0.5).epsilon(0.03));
  }

  TEST_CASE("PGM round-trip") {
    Gen gen(10);
    Tensor img({7, 9});
    for (auto& v : img.data()) v = static_cast<double>(gen.index(0, 255)) / 255.0;
    for (bool binary : {true, false}) {
      const Tensor back = parse_pgm(encode_pgm(img, 255, binary));
      CHECK(max_abs_diff(back.data(), img.data()) <= 1e-15);
    }
    const Tensor fine = parse_pgm(encode_pgm(img, 65535));
    CHECK(max_abs_diff(fine.data(), img.data()) <= 0.5 / 65535 + 1e-15);
    const auto dir = std::filesystem::temp_directory_path() / "lipspline_pgm_test";
    std::filesystem::create_directories(dir);
    write_pgm(dir / "b.pgm", img);
    write_pgm(dir / "a.pgm", Tensor({7, 9}));
    const auto all = read_pgm_directory(dir);
    REQUIRE(all.size() == 2);
    CHECK(all[1] == read_pgm(dir / "b.pgm"));
    std::filesystem::remove_all(dir);
    CHECK_THROWS_AS(parse_pgm("P3\n1 1\n255\n0 0 0"), ConfigError);
  }
}
