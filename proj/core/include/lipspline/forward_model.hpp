#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "lipspline/linear.hpp"

namespace lipspline {

/// Measurement operator H acting on [H, W] images.
class ForwardModel : public LinearOperator {
 public:
  /// Largest singular value of H.
  virtual double operator_norm() const = 0;
  /// Smallest singular value of H (0 when H is not injective).
  virtual double min_singular_value() const = 0;
  std::size_t height() const { return input_shape()[0]; }
  std::size_t width() const { return input_shape()[1]; }
};

/// H = Id on [H, W] images.
class IdentityModel final : public ForwardModel {
 public:
  IdentityModel(std::size_t height, std::size_t width) : height_(height), width_(width) {}
  Shape input_shape() const override { return {height_, width_}; }
  Shape output_shape() const override { return {height_, width_}; }
  Tensor apply(const Tensor& x) const override { return x.reshaped({height_, width_}); }
  Tensor adjoint(const Tensor& y) const override { return y.reshaped({height_, width_}); }
  double operator_norm() const override { return 1.0; }
  double min_singular_value() const override { return 1.0; }

 private:
  std::size_t height_, width_;
};

/// Circular convolution with a small odd-sized [kh, kw] kernel, centred.
class CircularBlur final : public ForwardModel {
 public:
  CircularBlur(Tensor kernel, std::size_t height, std::size_t width);
  Shape input_shape() const override { return {height_, width_}; }
  Shape output_shape() const override { return {height_, width_}; }
  Tensor apply(const Tensor& x) const override;
  Tensor adjoint(const Tensor& y) const override;
  double operator_norm() const override { return sigma_max_; }
  double min_singular_value() const override { return sigma_min_; }
  const Tensor& kernel() const noexcept { return kernel_; }

 private:
  Tensor kernel_;  // [1, 1, kh, kw]
  std::size_t height_, width_;
  double sigma_max_ = 0.0, sigma_min_ = 0.0;
};

/// 3x3 kernel with centre 0.6 and 0.1 on the four neighbours; invertible with singular values in [0.2, 1].
Tensor mild_blur_kernel();

/// y = M F x with the unitary 2-D DFT F and a column mask M. Measurements are
/// stored as [2, H, W] (real and imaginary parts), zero on unsampled columns.
class MaskedDft final : public ForwardModel {
 public:
  MaskedDft(std::vector<std::size_t> columns, std::size_t height, std::size_t width);
  ~MaskedDft() override;
  MaskedDft(const MaskedDft&) = delete;
  MaskedDft& operator=(const MaskedDft&) = delete;

  Shape input_shape() const override { return {height_, width_}; }
  Shape output_shape() const override { return {2, height_, width_}; }
  Tensor apply(const Tensor& x) const override;
  Tensor adjoint(const Tensor& y) const override;
  double operator_norm() const override { return columns_.empty() ? 0.0 : 1.0; }
  double min_singular_value() const override { return columns_.size() == width_ ? 1.0 : 0.0; }
  const std::vector<std::size_t>& columns() const noexcept { return columns_; }
  bool sampled(std::size_t column) const { return mask_[column] != 0; }

 private:
  struct Plans;
  std::vector<std::size_t> columns_;
  std::vector<unsigned char> mask_;
  std::size_t height_, width_;
  std::unique_ptr<Plans> plans_;
};

/// Sorted unique column indices, whitespace or comma separated; '#' starts a comment.
std::vector<std::size_t> parse_mask_columns(const std::string& text, std::size_t width);
std::vector<std::size_t> read_mask_columns(const std::filesystem::path& path, std::size_t width);

/// Low-frequency band (8% of the width, around DC) plus uniformly drawn columns up to `fraction`.
std::vector<std::size_t> random_column_mask(std::size_t width, double fraction, std::uint64_t seed);

/// Unitary 2-D DFT of a real [H, W] image (row-major complex output).
std::vector<std::complex<double>> dft2(const Tensor& image);

}  // namespace lipspline
