#include "lipspline/image.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <numbers>
#include <random>

#include "lipspline/error.hpp"
#include "lipspline/io.hpp"

namespace lipspline {

namespace {

class PgmReader {
 public:
  explicit PgmReader(const std::string& bytes) : s_(bytes) {}

  unsigned long header_value() {
    skip_space_and_comments();
    std::size_t start = pos_;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_])) != 0) ++pos_;
    if (start == pos_) throw ConfigError("PGM: expected a number in the header");
    return std::stoul(s_.substr(start, pos_ - start));
  }

  void skip_space_and_comments() {
    while (pos_ < s_.size()) {
      if (s_[pos_] == '#') {
        while (pos_ < s_.size() && s_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(s_[pos_])) != 0) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  unsigned binary_value(bool wide) {
    const std::size_t need = wide ? 2 : 1;
    if (pos_ + need > s_.size()) throw ConfigError("PGM: truncated pixel data");
    unsigned v = static_cast<unsigned char>(s_[pos_++]);
    if (wide) v = (v << 8) | static_cast<unsigned char>(s_[pos_++]);
    return v;
  }

  std::string magic() {
    if (s_.size() < 2) throw ConfigError("PGM: file too short");
    pos_ = 2;
    return s_.substr(0, 2);
  }

  void single_whitespace() {
    if (pos_ >= s_.size() || std::isspace(static_cast<unsigned char>(s_[pos_])) == 0) {
      throw ConfigError("PGM: missing whitespace after header");
    }
    ++pos_;
  }

 private:
  const std::string& s_;
  std::size_t pos_ = 0;
};

void check_same(const Tensor& x, const Tensor& ref, const char* what) {
  if (x.shape() != ref.shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_string(x.shape()) + " vs " +
                     shape_string(ref.shape()));
  }
}

}  // namespace

Tensor parse_pgm(const std::string& bytes) {
  PgmReader r(bytes);
  const std::string magic = r.magic();
  if (magic != "P2" && magic != "P5") throw ConfigError("PGM: unsupported magic '" + magic + "'");
  const auto w = r.header_value();
  const auto h = r.header_value();
  const auto maxval = r.header_value();
  if (w == 0 || h == 0) throw ConfigError("PGM: empty image");
  if (maxval == 0 || maxval > 65535) throw ConfigError("PGM: max value must lie in [1, 65535]");
  Tensor img({h, w});
  if (magic == "P5") {
    r.single_whitespace();
    const bool wide = maxval > 255;
    for (auto& v : img.data()) v = static_cast<double>(r.binary_value(wide)) / static_cast<double>(maxval);
  } else {
    for (auto& v : img.data()) {
      const auto p = r.header_value();
      if (p > maxval) throw ConfigError("PGM: pixel exceeds max value");
      v = static_cast<double>(p) / static_cast<double>(maxval);
    }
  }
  return img;
}

Tensor read_pgm(const std::filesystem::path& path) { return parse_pgm(read_file(path)); }

std::string encode_pgm(const Tensor& image, unsigned max_value, bool binary) {
  if (image.rank() != 2) throw ShapeError("PGM output needs an [H, W] image");
  if (max_value != 255 && max_value != 65535) throw ConfigError("PGM max value must be 255 or 65535");
  std::string out = (binary ? "P5\n" : "P2\n") + std::to_string(image.dim(1)) + " " + std::to_string(image.dim(0)) +
                    "\n" + std::to_string(max_value) + "\n";
  const std::size_t w = image.dim(1);
  for (std::size_t i = 0; i < image.size(); ++i) {
    const double v = std::isfinite(image[i]) ? std::clamp(image[i], 0.0, 1.0) : 0.0;
    const auto q = static_cast<unsigned>(std::lround(v * max_value));
    if (binary) {
      if (max_value > 255) out.push_back(static_cast<char>(q >> 8));
      out.push_back(static_cast<char>(q & 0xffU));
    } else {
      out += std::to_string(q);
      out.push_back((i + 1) % w == 0 ? '\n' : ' ');
    }
  }
  return out;
}

void write_pgm(const std::filesystem::path& path, const Tensor& image, unsigned max_value) {
  write_file_atomic(path, encode_pgm(image, max_value));
}

std::vector<Tensor> read_pgm_directory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ConfigError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".pgm") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Tensor> out;
  out.reserve(files.size());
  for (const auto& f : files) out.push_back(read_pgm(f));
  return out;
}

double psnr(const Tensor& x, const Tensor& ref) {
  check_same(x, ref, "psnr");
  if (x.empty()) throw ShapeError("psnr: empty image");
  double se = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) se += (x[i] - ref[i]) * (x[i] - ref[i]);
  const double mse = se / static_cast<double>(x.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

SsimTerms ssim_terms(const Tensor& x, const Tensor& ref) {
  check_same(x, ref, "ssim");
  constexpr int kWin = 11;
  constexpr double kSigma = 1.5;
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03, c3 = c2 / 2.0;
  if (x.rank() != 2 || x.dim(0) < kWin || x.dim(1) < kWin) throw ShapeError("ssim needs an image of at least 11x11");
  std::array<double, kWin * kWin> g{};
  double gs = 0.0;
  for (int i = 0; i < kWin; ++i) {
    for (int j = 0; j < kWin; ++j) {
      const double di = i - kWin / 2, dj = j - kWin / 2;
      g[i * kWin + j] = std::exp(-(di * di + dj * dj) / (2.0 * kSigma * kSigma));
      gs += g[i * kWin + j];
    }
  }
  for (auto& v : g) v /= gs;

  const std::size_t h = x.dim(0), w = x.dim(1);
  SsimTerms t;
  std::size_t count = 0;
  for (std::size_t r = 0; r + kWin <= h; ++r) {
    for (std::size_t c = 0; c + kWin <= w; ++c) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (int i = 0; i < kWin; ++i) {
        for (int j = 0; j < kWin; ++j) {
          const double wgt = g[i * kWin + j];
          const double a = x[(r + i) * w + c + j], b = ref[(r + i) * w + c + j];
          mx += wgt * a;
          my += wgt * b;
          sxx += wgt * a * a;
          syy += wgt * b * b;
          sxy += wgt * a * b;
        }
      }
      const double vx = std::max(0.0, sxx - mx * mx), vy = std::max(0.0, syy - my * my);
      const double cov = sxy - mx * my;
      const double sx = std::sqrt(vx), sy = std::sqrt(vy);
      const double lum = (2 * mx * my + c1) / (mx * mx + my * my + c1);
      const double con = (2 * sx * sy + c2) / (vx + vy + c2);
      const double str = (cov + c3) / (sx * sy + c3);
      const double cs = (2 * cov + c2) / (vx + vy + c2);
      t.luminance += lum;
      t.contrast += con;
      t.structure += str;
      t.ssim += lum * cs;
      ++count;
    }
  }
  const double n = static_cast<double>(count);
  t.luminance /= n;
  t.contrast /= n;
  t.structure /= n;
  t.ssim /= n;
  return t;
}

double ssim(const Tensor& x, const Tensor& ref) { return ssim_terms(x, ref).ssim; }

Tensor phantom(std::size_t size, std::uint64_t seed) {
  if (size < 32) throw ConfigError("phantom size must be at least 32");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double gx = u(rng) - 0.5, gy = u(rng) - 0.5, fx = 1.0 + 2.0 * u(rng), fy = 1.0 + 2.0 * u(rng);
  struct Ellipse {
    double cx, cy, a, b, cos_t, sin_t, value;
  };
  std::vector<Ellipse> ellipses;
  const int count = 6 + static_cast<int>(rng() % 7);
  for (int k = 0; k < count; ++k) {
    const double theta = std::numbers::pi * u(rng);
    ellipses.push_back({-0.6 + 1.2 * u(rng), -0.6 + 1.2 * u(rng), 0.08 + 0.35 * u(rng), 0.05 + 0.25 * u(rng),
                        std::cos(theta), std::sin(theta), -0.35 + 0.8 * u(rng)});
  }
  Tensor img({size, size});
  const double n = static_cast<double>(size);
  for (std::size_t r = 0; r < size; ++r) {
    for (std::size_t c = 0; c < size; ++c) {
      const double px = 2.0 * (static_cast<double>(c) + 0.5) / n - 1.0;
      const double py = 2.0 * (static_cast<double>(r) + 0.5) / n - 1.0;
      double v = 0.35 + 0.1 * gx * std::sin(fx * px * std::numbers::pi) + 0.1 * gy * std::cos(fy * py * std::numbers::pi);
      for (const auto& e : ellipses) {
        const double dx = px - e.cx, dy = py - e.cy;
        const double xr = e.cos_t * dx + e.sin_t * dy, yr = -e.sin_t * dx + e.cos_t * dy;
        if ((xr * xr) / (e.a * e.a) + (yr * yr) / (e.b * e.b) <= 1.0) v += e.value;
      }
      img.at(r, c) = std::clamp(v, 0.0, 1.0);
    }
  }
  return img;
}

Tensor add_noise(const Tensor& image, double sigma, std::uint64_t seed) {
  if (sigma < 0.0) throw ConfigError("noise level must be non-negative");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  Tensor out = image;
  if (sigma == 0.0) return out;
  for (auto& v : out.data()) v += normal(rng);
  return out;
}

}  // namespace lipspline
