#include "lipspline/forward_model.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <random>
#include <sstream>

#include <fftw3.h>

#include "lipspline/error.hpp"
#include "lipspline/io.hpp"
#include "lipspline/ops.hpp"

namespace lipspline {

namespace {

// plan creation in FFTW is not thread-safe; execution with new-array calls is
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

fftw_plan make_plan(std::size_t h, std::size_t w, int sign) {
  std::vector<std::complex<double>> a(h * w), b(h * w);
  std::lock_guard lock(planner_mutex());
  fftw_plan p = fftw_plan_dft_2d(static_cast<int>(h), static_cast<int>(w), reinterpret_cast<fftw_complex*>(a.data()),
                                 reinterpret_cast<fftw_complex*>(b.data()), sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (p == nullptr) throw NumericError("FFTW could not create a plan");
  return p;
}

void destroy_plan(fftw_plan p) {
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(p);
}

void execute(fftw_plan p, std::vector<std::complex<double>>& in, std::vector<std::complex<double>>& out) {
  fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(in.data()), reinterpret_cast<fftw_complex*>(out.data()));
}

void check_image(const Tensor& x, std::size_t h, std::size_t w, const char* what) {
  if (x.size() != h * w) {
    throw ShapeError(std::string(what) + ": expected " + std::to_string(h) + "x" + std::to_string(w) + " image, got " +
                     shape_string(x.shape()));
  }
}

}  // namespace

std::vector<std::complex<double>> dft2(const Tensor& image) {
  if (image.rank() != 2) throw ShapeError("dft2 needs an [H, W] image");
  const std::size_t h = image.dim(0), w = image.dim(1);
  std::vector<std::complex<double>> in(h * w), out(h * w);
  for (std::size_t i = 0; i < h * w; ++i) in[i] = image[i];
  fftw_plan p = make_plan(h, w, FFTW_FORWARD);
  execute(p, in, out);
  destroy_plan(p);
  const double scale = 1.0 / std::sqrt(static_cast<double>(h * w));
  for (auto& c : out) c *= scale;
  return out;
}

// --- blur --------------------------------------------------------------------

CircularBlur::CircularBlur(Tensor kernel, std::size_t height, std::size_t width) : height_(height), width_(width) {
  if (kernel.rank() != 2 || kernel.dim(0) % 2 == 0 || kernel.dim(1) % 2 == 0) {
    throw ShapeError("blur kernel must be an odd-sized [kh, kw] matrix");
  }
  if (kernel.dim(0) > height || kernel.dim(1) > width) throw ShapeError("blur kernel larger than the image");
  kernel_ = kernel.reshaped({1, 1, kernel.dim(0), kernel.dim(1)});
  // H is circulant: its singular values are the DFT magnitudes of the impulse response
  Tensor delta({height, width});
  delta[0] = 1.0;
  const auto symbol = dft2(apply(delta));
  const double n = std::sqrt(static_cast<double>(height * width));
  sigma_min_ = std::abs(symbol[0]) * n;
  for (const auto& c : symbol) {
    sigma_max_ = std::max(sigma_max_, std::abs(c) * n);
    sigma_min_ = std::min(sigma_min_, std::abs(c) * n);
  }
}

Tensor CircularBlur::apply(const Tensor& x) const {
  check_image(x, height_, width_, "blur");
  return ops::conv2d(x.reshaped({1, 1, height_, width_}), kernel_).reshaped({height_, width_});
}

Tensor CircularBlur::adjoint(const Tensor& y) const {
  check_image(y, height_, width_, "blur adjoint");
  return ops::conv2d_adjoint(y.reshaped({1, 1, height_, width_}), kernel_).reshaped({height_, width_});
}

Tensor mild_blur_kernel() { return Tensor::matrix({{0.0, 0.1, 0.0}, {0.1, 0.6, 0.1}, {0.0, 0.1, 0.0}}); }

// --- masked DFT --------------------------------------------------------------------

struct MaskedDft::Plans {
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
  ~Plans() {
    if (forward != nullptr) destroy_plan(forward);
    if (backward != nullptr) destroy_plan(backward);
  }
};

MaskedDft::MaskedDft(std::vector<std::size_t> columns, std::size_t height, std::size_t width)
    : mask_(width, 0), height_(height), width_(width), plans_(std::make_unique<Plans>()) {
  if (height == 0 || width == 0) throw ShapeError("masked DFT needs a non-empty image size");
  for (std::size_t c : columns) {
    if (c >= width) throw ConfigError("mask column " + std::to_string(c) + " outside image width");
    mask_[c] = 1;
  }
  for (std::size_t c = 0; c < width; ++c) {
    if (mask_[c] != 0) columns_.push_back(c);
  }
  plans_->forward = make_plan(height, width, FFTW_FORWARD);
  plans_->backward = make_plan(height, width, FFTW_BACKWARD);
}

MaskedDft::~MaskedDft() = default;

Tensor MaskedDft::apply(const Tensor& x) const {
  check_image(x, height_, width_, "masked DFT");
  const std::size_t n = height_ * width_;
  std::vector<std::complex<double>> in(n), out(n);
  for (std::size_t i = 0; i < n; ++i) in[i] = x[i];
  execute(plans_->forward, in, out);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  Tensor y({2, height_, width_});
  for (std::size_t r = 0; r < height_; ++r) {
    for (std::size_t c = 0; c < width_; ++c) {
      if (mask_[c] == 0) continue;
      const std::size_t i = r * width_ + c;
      y[i] = out[i].real() * scale;
      y[n + i] = out[i].imag() * scale;
    }
  }
  return y;
}

Tensor MaskedDft::adjoint(const Tensor& y) const {
  const std::size_t n = height_ * width_;
  if (y.size() != 2 * n) throw ShapeError("masked DFT adjoint: expected [2, H, W], got " + shape_string(y.shape()));
  std::vector<std::complex<double>> in(n), out(n);
  for (std::size_t r = 0; r < height_; ++r) {
    for (std::size_t c = 0; c < width_; ++c) {
      if (mask_[c] == 0) continue;
      const std::size_t i = r * width_ + c;
      in[i] = {y[i], y[n + i]};
    }
  }
  execute(plans_->backward, in, out);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  Tensor x({height_, width_});
  for (std::size_t i = 0; i < n; ++i) x[i] = out[i].real() * scale;
  return x;
}

std::vector<std::size_t> parse_mask_columns(const std::string& text, std::size_t width) {
  std::vector<std::size_t> cols;
  std::istringstream lines(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    line = line.substr(0, line.find('#'));
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream tokens(line);
    std::string tok;
    while (tokens >> tok) {
      std::size_t pos = 0;
      long long v = 0;
      try {
        v = std::stoll(tok, &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (pos != tok.size() || v < 0 || static_cast<std::size_t>(v) >= width) {
        throw ConfigError("mask line " + std::to_string(lineno) + ": invalid column '" + tok + "'");
      }
      cols.push_back(static_cast<std::size_t>(v));
    }
  }
  std::sort(cols.begin(), cols.end());
  cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
  if (cols.empty()) throw ConfigError("mask lists no columns");
  return cols;
}

std::vector<std::size_t> read_mask_columns(const std::filesystem::path& path, std::size_t width) {
  return parse_mask_columns(read_file(path), width);
}

std::vector<std::size_t> random_column_mask(std::size_t width, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("mask fraction must lie in (0, 1]");
  const auto target = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(fraction * static_cast<double>(width))));
  const auto band = std::min(target, std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(0.08 * static_cast<double>(width)))));
  std::vector<unsigned char> used(width, 0);
  // DFT index 0 is DC; the band wraps around it
  for (std::size_t k = 0; k < band; ++k) {
    const long off = (k % 2 == 0) ? static_cast<long>(k / 2) : -static_cast<long>(k / 2 + 1);
    used[static_cast<std::size_t>((off + static_cast<long>(width)) % static_cast<long>(width))] = 1;
  }
  std::vector<std::size_t> rest;
  for (std::size_t c = 0; c < width; ++c) {
    if (used[c] == 0) rest.push_back(c);
  }
  std::mt19937_64 rng(seed);
  for (std::size_t k = band; k < target && !rest.empty(); ++k) {
    const std::size_t j = static_cast<std::size_t>(rng() % rest.size());
    used[rest[j]] = 1;
    rest.erase(rest.begin() + static_cast<long>(j));
  }
  std::vector<std::size_t> cols;
  for (std::size_t c = 0; c < width; ++c) {
    if (used[c] != 0) cols.push_back(c);
  }
  return cols;
}

}  // namespace lipspline
