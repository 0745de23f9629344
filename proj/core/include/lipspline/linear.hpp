#pragma once

#include <cstdint>
#include <random>

#include "lipspline/tensor.hpp"

namespace lipspline {

/// Real linear map between tensor spaces.
class LinearOperator {
 public:
  virtual ~LinearOperator() = default;
  virtual Shape input_shape() const = 0;
  virtual Shape output_shape() const = 0;
  virtual Tensor apply(const Tensor& x) const = 0;
  virtual Tensor adjoint(const Tensor& y) const = 0;
};

/// x -> W x for W[out, in].
class DenseOperator final : public LinearOperator {
 public:
  explicit DenseOperator(Tensor weight);
  Shape input_shape() const override { return {weight_.dim(1)}; }
  Shape output_shape() const override { return {weight_.dim(0)}; }
  Tensor apply(const Tensor& x) const override;
  Tensor adjoint(const Tensor& y) const override;

 private:
  Tensor weight_;
};

/// Circular convolution of a single [1, Ci, H, W] image with a [Co, Ci, kh, kw] kernel.
class ConvOperator final : public LinearOperator {
 public:
  ConvOperator(Tensor kernel, std::size_t height, std::size_t width);
  Shape input_shape() const override { return {1, kernel_.dim(1), height_, width_}; }
  Shape output_shape() const override { return {1, kernel_.dim(0), height_, width_}; }
  Tensor apply(const Tensor& x) const override;
  Tensor adjoint(const Tensor& y) const override;

 private:
  Tensor kernel_;
  std::size_t height_;
  std::size_t width_;
};

struct PowerIteration {
  double sigma = 0.0;
  /// Unit right singular vector estimate (input space); persist it to warm-start the next call.
  Tensor v;
  /// Unit left singular vector estimate (output space), A v / sigma.
  Tensor u;
  int iterations = 0;
};

/// Power iteration on A^T A from the start vector `v`. Runs `iters` steps, or
/// stops earlier once the relative change of sigma drops to `tol` (tol > 0).
/// A zero operator yields sigma = 0.
PowerIteration power_iteration(const LinearOperator& op, int iters, Tensor v, double tol = 0.0);

/// Random unit start vector for `op`.
Tensor random_unit(const Shape& shape, std::mt19937_64& rng);

/// Largest singular value of W[out, in] from the eigenvalues of its smaller Gram matrix.
double dense_spectral_norm(const Tensor& weight);

/// Largest singular value of circular conv2d with a [Co, Ci, kh, kw] kernel on
/// h x w images: the maximum over DFT frequencies of the symbol's top singular value.
double conv_spectral_norm(const Tensor& kernel, std::size_t height, std::size_t width);

struct SingularPair {
  double sigma = 0.0;
  Tensor v;  // unit right singular vector, [1, Ci, H, W]
};

/// Exact top singular value and a real right singular vector of circular conv2d.
SingularPair conv_top_singular(const Tensor& kernel, std::size_t height, std::size_t width);

/// W / max(sigma, 1).
Tensor spectral_normalize(const Tensor& weight, double sigma);

/// `iters` steps of W <- W (I + (I - W^T W) / 2), or (I + (I - W W^T) / 2) W
/// for wide matrices. Throws NumericError when the iterate blows up.
Tensor bjorck_orthonormalize(const Tensor& weight, int iters);

/// Runs the Björck recurrence until |W^T W - I|_F <= tol (Gram side of the smaller dimension).
Tensor bjorck_to_convergence(const Tensor& weight, double tol = 1e-13, int max_iters = 500);

/// |W^T W - I|_F for tall/square W, |W W^T - I|_F for wide W.
double orthonormality_defect(const Tensor& weight);

}  // namespace lipspline
