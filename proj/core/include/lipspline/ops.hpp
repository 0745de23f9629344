#pragma once

// Eager kernels shared by the autodiff graph and the inference-only network.
// Forward and backward routines live side by side so the two execution paths
// cannot drift apart.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lipspline/tensor.hpp"

namespace lipspline::ops {

/// View of a tensor as [outer, channels, inner], channel axis 1.
/// Rank-1 tensors are treated as a single sample: [1, n, 1].
struct ChannelLayout {
  std::size_t outer = 1;
  std::size_t channels = 1;
  std::size_t inner = 1;
};
ChannelLayout channel_layout(const Shape& shape);

// --- dense linear algebra -------------------------------------------------

/// C[m,n] = A[m,k] * B[k,n] (row-major, raw buffers).
void gemm(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c,
          bool accumulate = false);
/// C[m,n] = A[m,k] * B[n,k]^T
void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c,
             bool accumulate = false);
/// C[k,n] = A[m,k]^T * B[m,n]
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c,
             bool accumulate = false);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

/// y[B,out] = x[B,in] W[out,in]^T + b[out]
Tensor dense_forward(const Tensor& x, const Tensor& weight, const Tensor& bias);

// --- circular 2-D convolution ---------------------------------------------
// Cross-correlation with odd kernels centred on the output pixel and periodic
// boundary handling: out[b,o,y,x] = sum_{i,dy,dx} k[o,i,dy,dx] *
// in[b,i,(y+dy-cy) mod H,(x+dx-cx) mod W].

Tensor conv2d(const Tensor& input, const Tensor& kernel);
/// Adjoint of conv2d with respect to its input.
Tensor conv2d_adjoint(const Tensor& grad_output, const Tensor& kernel);
/// Gradient of <grad_output, conv2d(input, k)> with respect to k.
Tensor conv2d_kernel_grad(const Tensor& input, const Tensor& grad_output, std::size_t kh, std::size_t kw);

void add_channel_bias(Tensor& x, const Tensor& bias);

// --- linear spline ---------------------------------------------------------
// Coefficients are stored per channel as rows of a [C, K] tensor; entry j of a
// row sits at grid position (k_min - 1 + j) * step.

struct SplineGrid {
  double step = 1.0;
  long k_min = 0;
};

/// sigma~(x) = sigma(alpha x) / alpha, with sigma the piecewise-linear
/// interpolant of `coeffs` on the grid, extrapolated linearly.
double spline_value(std::span<const double> coeffs, const SplineGrid& grid, double alpha, double x);
/// Slope d sigma~/dx at x (right derivative at knots).
double spline_slope(std::span<const double> coeffs, const SplineGrid& grid, double alpha, double x);

Tensor spline_forward(const Tensor& x, const Tensor& coeffs, const Tensor& alpha, const SplineGrid& grid);
void spline_backward(const Tensor& x, const Tensor& coeffs, const Tensor& alpha, const SplineGrid& grid,
                     const Tensor& grad_out, Tensor* grad_x, Tensor* grad_coeffs, Tensor* grad_alpha);
/// Smallest distance (in input units) from any entry of x to a knot of its spline.
double spline_kink_margin(const Tensor& x, const Tensor& coeffs, const Tensor& alpha, const SplineGrid& grid);

// --- baseline activations ----------------------------------------------------

/// Sorts groups of `group` consecutive channels. Ascending unless `descending`.
/// `perm` (optional) receives, for each output entry, the flat index of the input entry it came from.
Tensor group_sort(const Tensor& x, std::size_t group, bool descending, std::vector<std::uint32_t>* perm);

/// max(a x, x) per channel.
Tensor prelu(const Tensor& x, const Tensor& slopes);

/// Householder reflection per channel pair; `v` is [C/2, 2] with unit rows.
Tensor householder(const Tensor& x, const Tensor& v);

// --- spline coefficient maps --------------------------------------------------

/// First differences along the last axis.
Tensor diff_last(const Tensor& x);
/// Cumulative sum along the last axis; with `prepend_zero` the result is one longer and starts at 0.
Tensor cumsum_last(const Tensor& x, bool prepend_zero);

}  // namespace lipspline::ops
