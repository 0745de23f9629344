#include "lipspline/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Core>

#include "lipspline/error.hpp"

namespace lipspline::ops {

ChannelLayout channel_layout(const Shape& shape) {
  ChannelLayout l;
  if (shape.empty()) throw ShapeError("channel_layout of empty shape");
  if (shape.size() == 1) {
    l.channels = shape[0];
    return l;
  }
  l.outer = shape[0];
  l.channels = shape[1];
  for (std::size_t i = 2; i < shape.size(); ++i) l.inner *= shape[i];
  return l;
}

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

inline Eigen::Index ix(std::size_t v) { return static_cast<Eigen::Index>(v); }

}  // namespace

void gemm(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c,
          bool accumulate) {
  MapMat cm(c, ix(m), ix(n));
  const ConstMapMat am(a, ix(m), ix(k)), bm(b, ix(k), ix(n));
  if (accumulate) {
    cm.noalias() += am * bm;
  } else {
    cm.noalias() = am * bm;
  }
}

void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c,
             bool accumulate) {
  MapMat cm(c, ix(m), ix(n));
  const ConstMapMat am(a, ix(m), ix(k)), bm(b, ix(n), ix(k));
  if (accumulate) {
    cm.noalias() += am * bm.transpose();
  } else {
    cm.noalias() = am * bm.transpose();
  }
}

void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c,
             bool accumulate) {
  MapMat cm(c, ix(k), ix(n));
  const ConstMapMat am(a, ix(m), ix(k)), bm(b, ix(m), ix(n));
  if (accumulate) {
    cm.noalias() += am.transpose() * bm;
  } else {
    cm.noalias() = am.transpose() * bm;
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() == 2 && b.rank() == 2) {
    if (a.dim(1) != b.dim(0)) {
      throw ShapeError("matmul: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
    }
    Tensor c({a.dim(0), b.dim(1)});
    gemm(a.dim(0), a.dim(1), b.dim(1), a.data().data(), b.data().data(), c.data().data());
    return c;
  }
  if (a.rank() == 2 && b.rank() == 1) {
    if (a.dim(1) != b.dim(0)) {
      throw ShapeError("matmul: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
    }
    Tensor c({a.dim(0)});
    gemm(a.dim(0), a.dim(1), 1, a.data().data(), b.data().data(), c.data().data());
    return c;
  }
  if (a.rank() == 1 && b.rank() == 2) {
    if (a.dim(0) != b.dim(0)) {
      throw ShapeError("matmul: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
    }
    Tensor c({b.dim(1)});
    gemm(1, a.dim(0), b.dim(1), a.data().data(), b.data().data(), c.data().data());
    return c;
  }
  throw ShapeError("matmul: unsupported ranks " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw ShapeError("transpose needs a matrix, got " + shape_string(a.shape()));
  const std::size_t r = a.dim(0), c = a.dim(1);
  Tensor t({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) t[j * r + i] = a[i * c + j];
  return t;
}

Tensor dense_forward(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (x.rank() != 2 || weight.rank() != 2 || x.dim(1) != weight.dim(1)) {
    throw ShapeError("dense: input " + shape_string(x.shape()) + " weight " + shape_string(weight.shape()));
  }
  const std::size_t batch = x.dim(0), in = x.dim(1), out = weight.dim(0);
  Tensor y({batch, out});
  gemm_nt(batch, in, out, x.data().data(), weight.data().data(), y.data().data());
  if (!bias.empty()) {
    if (bias.size() != out) throw ShapeError("dense: bias length mismatch");
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t o = 0; o < out; ++o) y[b * out + o] += bias[o];
  }
  return y;
}

namespace {

struct ConvDims {
  std::size_t batch, cin, cout, h, w, kh, kw;
};

ConvDims conv_dims(const Shape& in, const Shape& k) {
  if (in.size() != 4 || k.size() != 4) {
    throw ShapeError("conv2d expects [B,C,H,W] input and [Co,Ci,kh,kw] kernel, got " + shape_string(in) +
                     " and " + shape_string(k));
  }
  if (in[1] != k[1]) throw ShapeError("conv2d: channel mismatch " + shape_string(in) + " vs " + shape_string(k));
  if (k[2] % 2 == 0 || k[3] % 2 == 0) throw ShapeError("conv2d: kernel sizes must be odd");
  return {in[0], k[1], k[0], in[2], in[3], k[2], k[3]};
}

inline std::size_t wrap(long v, std::size_t n) {
  long m = v % static_cast<long>(n);
  return static_cast<std::size_t>(m < 0 ? m + static_cast<long>(n) : m);
}

// col[(ci, dy, dx), (y, x)] = in[ci, y + dy - cy, x + dx - cx] with circular wrap
void im2col(const double* in, const ConvDims& d, double* col) {
  const long cy = static_cast<long>(d.kh / 2), cx = static_cast<long>(d.kw / 2);
  const std::size_t plane = d.h * d.w;
  for (std::size_t ci = 0; ci < d.cin; ++ci) {
    for (std::size_t dy = 0; dy < d.kh; ++dy) {
      for (std::size_t dx = 0; dx < d.kw; ++dx) {
        double* row = col + ((ci * d.kh + dy) * d.kw + dx) * plane;
        const std::size_t s = wrap(static_cast<long>(dx) - cx, d.w);
        for (std::size_t y = 0; y < d.h; ++y) {
          const double* src = in + ci * plane + wrap(static_cast<long>(y + dy) - cy, d.h) * d.w;
          double* dst = row + y * d.w;
          std::copy(src + s, src + d.w, dst);
          std::copy(src, src + s, dst + (d.w - s));
        }
      }
    }
  }
}

// adjoint of im2col: accumulates columns back into the image
void col2im(const double* col, const ConvDims& d, double* in) {
  const long cy = static_cast<long>(d.kh / 2), cx = static_cast<long>(d.kw / 2);
  const std::size_t plane = d.h * d.w;
  for (std::size_t ci = 0; ci < d.cin; ++ci) {
    for (std::size_t dy = 0; dy < d.kh; ++dy) {
      for (std::size_t dx = 0; dx < d.kw; ++dx) {
        const double* row = col + ((ci * d.kh + dy) * d.kw + dx) * plane;
        const std::size_t s = wrap(static_cast<long>(dx) - cx, d.w);
        for (std::size_t y = 0; y < d.h; ++y) {
          double* dst = in + ci * plane + wrap(static_cast<long>(y + dy) - cy, d.h) * d.w;
          const double* src = row + y * d.w;
          const std::size_t head = d.w - s;
          for (std::size_t x = 0; x < head; ++x) dst[x + s] += src[x];
          for (std::size_t x = head; x < d.w; ++x) dst[x + s - d.w] += src[x];
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel) {
  const auto d = conv_dims(input.shape(), kernel.shape());
  Tensor out({d.batch, d.cout, d.h, d.w});
  const std::size_t plane = d.h * d.w, taps = d.cin * d.kh * d.kw;
  std::vector<double> col(taps * plane);
  for (std::size_t b = 0; b < d.batch; ++b) {
    im2col(input.data().data() + b * d.cin * plane, d, col.data());
    gemm(d.cout, taps, plane, kernel.data().data(), col.data(), out.data().data() + b * d.cout * plane);
  }
  return out;
}

Tensor conv2d_adjoint(const Tensor& grad_output, const Tensor& kernel) {
  const Shape& gs = grad_output.shape();
  const Shape& ks = kernel.shape();
  if (gs.size() != 4 || ks.size() != 4 || gs[1] != ks[0]) {
    throw ShapeError("conv2d_adjoint: " + shape_string(gs) + " vs kernel " + shape_string(ks));
  }
  const auto d = conv_dims({gs[0], ks[1], gs[2], gs[3]}, ks);
  Tensor out({d.batch, d.cin, d.h, d.w});
  const std::size_t plane = d.h * d.w, taps = d.cin * d.kh * d.kw;
  std::vector<double> col(taps * plane);
  for (std::size_t b = 0; b < d.batch; ++b) {
    gemm_tn(d.cout, taps, plane, kernel.data().data(), grad_output.data().data() + b * d.cout * plane, col.data());
    col2im(col.data(), d, out.data().data() + b * d.cin * plane);
  }
  return out;
}

Tensor conv2d_kernel_grad(const Tensor& input, const Tensor& grad_output, std::size_t kh, std::size_t kw) {
  const Shape& is = input.shape();
  const Shape& gs = grad_output.shape();
  if (is.size() != 4 || gs.size() != 4 || is[0] != gs[0] || is[2] != gs[2] || is[3] != gs[3]) {
    throw ShapeError("conv2d_kernel_grad: " + shape_string(is) + " vs " + shape_string(gs));
  }
  const auto d = conv_dims(is, {gs[1], is[1], kh, kw});
  Tensor gk({d.cout, d.cin, kh, kw});
  const std::size_t plane = d.h * d.w, taps = d.cin * kh * kw;
  std::vector<double> col(taps * plane);
  for (std::size_t b = 0; b < d.batch; ++b) {
    im2col(input.data().data() + b * d.cin * plane, d, col.data());
    gemm_nt(d.cout, plane, taps, grad_output.data().data() + b * d.cout * plane, col.data(), gk.data().data(), true);
  }
  return gk;
}

void add_channel_bias(Tensor& x, const Tensor& bias) {
  const auto l = channel_layout(x.shape());
  if (bias.size() != l.channels) throw ShapeError("channel bias length mismatch");
  double* p = x.data().data();
  for (std::size_t o = 0; o < l.outer; ++o)
    for (std::size_t c = 0; c < l.channels; ++c) {
      const double bv = bias[c];
      double* q = p + (o * l.channels + c) * l.inner;
      for (std::size_t s = 0; s < l.inner; ++s) q[s] += bv;
    }
}

// --- splines -------------------------------------------------------------------

namespace {

struct SplineSegment {
  std::size_t index;  // left coefficient of the active segment
  double frac;        // position inside the segment, outside [0,1] when extrapolating
};

inline SplineSegment locate(std::size_t k, const SplineGrid& grid, double alpha, double x) {
  const double u = alpha * x / grid.step - static_cast<double>(grid.k_min - 1);
  double fl = std::floor(u);
  const double hi = static_cast<double>(k - 2);
  if (fl < 0.0) fl = 0.0;
  if (fl > hi) fl = hi;
  return {static_cast<std::size_t>(fl), u - fl};
}

void check_spline_shapes(const Tensor& x, const Tensor& coeffs, const Tensor& alpha, ChannelLayout& l,
                         std::size_t& k) {
  l = channel_layout(x.shape());
  if (coeffs.rank() != 2 || coeffs.dim(0) != l.channels) {
    throw ShapeError("spline: coefficients " + shape_string(coeffs.shape()) + " do not match input " +
                     shape_string(x.shape()));
  }
  if (alpha.size() != l.channels) throw ShapeError("spline: alpha length mismatch");
  k = coeffs.dim(1);
  if (k < 2) throw ShapeError("spline: at least two coefficients required");
}

}  // namespace

double spline_value(std::span<const double> c, const SplineGrid& grid, double alpha, double x) {
  const auto seg = locate(c.size(), grid, alpha, x);
  const double lo = c[seg.index], hi = c[seg.index + 1];
  return (lo + (hi - lo) * seg.frac) / alpha;
}

double spline_slope(std::span<const double> c, const SplineGrid& grid, double alpha, double x) {
  const auto seg = locate(c.size(), grid, alpha, x);
  return (c[seg.index + 1] - c[seg.index]) / grid.step;
}

Tensor spline_forward(const Tensor& x, const Tensor& coeffs, const Tensor& alpha, const SplineGrid& grid) {
  ChannelLayout l;
  std::size_t k = 0;
  check_spline_shapes(x, coeffs, alpha, l, k);
  Tensor y(x.shape());
  for (std::size_t o = 0; o < l.outer; ++o)
    for (std::size_t c = 0; c < l.channels; ++c) {
      const double a = alpha[c];
      if (a == 0.0) throw NumericError("spline: alpha must be nonzero");
      const double* cc = coeffs.data().data() + c * k;
      const std::size_t base = (o * l.channels + c) * l.inner;
      for (std::size_t s = 0; s < l.inner; ++s) {
        const auto seg = locate(k, grid, a, x[base + s]);
        const double lo = cc[seg.index], hi = cc[seg.index + 1];
        y[base + s] = (lo + (hi - lo) * seg.frac) / a;
      }
    }
  return y;
}

void spline_backward(const Tensor& x, const Tensor& coeffs, const Tensor& alpha, const SplineGrid& grid,
                     const Tensor& grad_out, Tensor* grad_x, Tensor* grad_coeffs, Tensor* grad_alpha) {
  ChannelLayout l;
  std::size_t k = 0;
  check_spline_shapes(x, coeffs, alpha, l, k);
  for (std::size_t o = 0; o < l.outer; ++o)
    for (std::size_t c = 0; c < l.channels; ++c) {
      const double a = alpha[c];
      const double* cc = coeffs.data().data() + c * k;
      const std::size_t base = (o * l.channels + c) * l.inner;
      double ga = 0.0;
      for (std::size_t s = 0; s < l.inner; ++s) {
        const double xv = x[base + s];
        const double g = grad_out[base + s];
        const auto seg = locate(k, grid, a, xv);
        const double lo = cc[seg.index], hi = cc[seg.index + 1];
        const double slope = (hi - lo) / grid.step;
        if (grad_x) (*grad_x)[base + s] += g * slope;
        if (grad_coeffs) {
          (*grad_coeffs)[c * k + seg.index] += g * (1.0 - seg.frac) / a;
          (*grad_coeffs)[c * k + seg.index + 1] += g * seg.frac / a;
        }
        if (grad_alpha) {
          const double val = (lo + (hi - lo) * seg.frac) / a;
          ga += g * (slope * xv - val) / a;
        }
      }
      if (grad_alpha) (*grad_alpha)[c] += ga;
    }
}

double spline_kink_margin(const Tensor& x, const Tensor& coeffs, const Tensor& alpha, const SplineGrid& grid) {
  ChannelLayout l;
  std::size_t k = 0;
  check_spline_shapes(x, coeffs, alpha, l, k);
  double margin = std::numeric_limits<double>::infinity();
  if (k < 3) return margin;  // no interior knot
  const double first = 1.0, last = static_cast<double>(k - 2);
  for (std::size_t o = 0; o < l.outer; ++o)
    for (std::size_t c = 0; c < l.channels; ++c) {
      const double a = alpha[c];
      const std::size_t base = (o * l.channels + c) * l.inner;
      for (std::size_t s = 0; s < l.inner; ++s) {
        const double u = a * x[base + s] / grid.step - static_cast<double>(grid.k_min - 1);
        const double knot = std::clamp(std::round(u), first, last);
        margin = std::min(margin, std::abs(u - knot) * grid.step / std::abs(a));
      }
    }
  return margin;
}

// --- baseline activations --------------------------------------------------------

Tensor group_sort(const Tensor& x, std::size_t group, bool descending, std::vector<std::uint32_t>* perm) {
  const auto l = channel_layout(x.shape());
  if (group == 0 || l.channels % group != 0) {
    throw ShapeError("group_sort: group size " + std::to_string(group) + " does not divide width " +
                     std::to_string(l.channels));
  }
  Tensor y(x.shape());
  if (perm) perm->assign(x.size(), 0);
  std::vector<std::uint32_t> idx(group);
  for (std::size_t o = 0; o < l.outer; ++o)
    for (std::size_t g0 = 0; g0 < l.channels; g0 += group)
      for (std::size_t s = 0; s < l.inner; ++s) {
        for (std::size_t j = 0; j < group; ++j) {
          idx[j] = static_cast<std::uint32_t>((o * l.channels + g0 + j) * l.inner + s);
        }
        std::vector<std::uint32_t> sorted = idx;
        if (descending) {
          std::stable_sort(sorted.begin(), sorted.end(), [&](auto a, auto b) { return x[a] > x[b]; });
        } else {
          std::stable_sort(sorted.begin(), sorted.end(), [&](auto a, auto b) { return x[a] < x[b]; });
        }
        for (std::size_t j = 0; j < group; ++j) {
          y[idx[j]] = x[sorted[j]];
          if (perm) (*perm)[idx[j]] = sorted[j];
        }
      }
  return y;
}

Tensor prelu(const Tensor& x, const Tensor& slopes) {
  const auto l = channel_layout(x.shape());
  if (slopes.size() != l.channels) throw ShapeError("prelu: slope count does not match width");
  Tensor y(x.shape());
  for (std::size_t o = 0; o < l.outer; ++o)
    for (std::size_t c = 0; c < l.channels; ++c) {
      const std::size_t base = (o * l.channels + c) * l.inner;
      const double a = slopes[c];
      for (std::size_t s = 0; s < l.inner; ++s) {
        const double v = x[base + s];
        y[base + s] = std::max(a * v, v);
      }
    }
  return y;
}

Tensor householder(const Tensor& x, const Tensor& v) {
  const auto l = channel_layout(x.shape());
  if (l.channels % 2 != 0) throw ShapeError("householder: width must be even");
  if (v.rank() != 2 || v.dim(0) != l.channels / 2 || v.dim(1) != 2) {
    throw ShapeError("householder: reflection vectors " + shape_string(v.shape()) + " do not match width " +
                     std::to_string(l.channels));
  }
  Tensor y(x.shape());
  for (std::size_t o = 0; o < l.outer; ++o)
    for (std::size_t p = 0; p < l.channels / 2; ++p) {
      const double v0 = v[2 * p], v1 = v[2 * p + 1];
      const std::size_t b0 = (o * l.channels + 2 * p) * l.inner;
      const std::size_t b1 = b0 + l.inner;
      for (std::size_t s = 0; s < l.inner; ++s) {
        const double x0 = x[b0 + s], x1 = x[b1 + s];
        const double proj = v0 * x0 + v1 * x1;
        if (proj > 0.0) {
          y[b0 + s] = x0;
          y[b1 + s] = x1;
        } else {
          y[b0 + s] = x0 - 2.0 * proj * v0;
          y[b1 + s] = x1 - 2.0 * proj * v1;
        }
      }
    }
  return y;
}

Tensor diff_last(const Tensor& x) {
  if (x.empty()) throw ShapeError("diff of empty tensor");
  const std::size_t n = x.shape().back();
  if (n < 2) throw ShapeError("diff needs at least two entries along the last axis");
  Shape s = x.shape();
  s.back() = n - 1;
  Tensor y(s);
  const std::size_t rows = x.size() / n;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j + 1 < n; ++j) y[r * (n - 1) + j] = x[r * n + j + 1] - x[r * n + j];
  return y;
}

Tensor cumsum_last(const Tensor& x, bool prepend_zero) {
  if (x.empty()) throw ShapeError("cumsum of empty tensor");
  const std::size_t n = x.shape().back();
  const std::size_t m = prepend_zero ? n + 1 : n;
  Shape s = x.shape();
  s.back() = m;
  Tensor y(s);
  const std::size_t rows = x.size() / n;
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    std::size_t j0 = 0;
    if (prepend_zero) {
      y[r * m] = 0.0;
      j0 = 1;
    }
    for (std::size_t j = 0; j < n; ++j) {
      acc += x[r * n + j];
      y[r * m + j + j0] = acc;
    }
  }
  return y;
}

}  // namespace lipspline::ops
