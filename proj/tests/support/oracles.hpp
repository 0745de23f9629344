#pragma once

#include <Eigen/Dense>

#include "lipspline/ops.hpp"
#include "lipspline/tensor.hpp"

namespace lipspline::testing {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Matrix to_matrix(const Tensor& t) {
  return Eigen::Map<const Matrix>(t.data().data(), static_cast<Eigen::Index>(t.dim(0)),
                                  static_cast<Eigen::Index>(t.dim(1)));
}

inline double svd_norm(const Matrix& m) {
  return Eigen::JacobiSVD<Matrix>(m).singularValues()(0);
}

/// Explicit matrix of circular conv2d on [1, Ci, h, w] inputs, built column by column from unit impulses.
inline Matrix conv_matrix(const Tensor& kernel, std::size_t h, std::size_t w) {
  const std::size_t ci = kernel.dim(1);
  const std::size_t co = kernel.dim(0);
  const std::size_t n = ci * h * w;
  Matrix m(static_cast<Eigen::Index>(co * h * w), static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j) {
    Tensor e({1, ci, h, w});
    e[j] = 1.0;
    const Tensor col = ops::conv2d(e, kernel);
    for (std::size_t i = 0; i < col.size(); ++i) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = col[i];
  }
  return m;
}

/// Orthonormality of the columns (tall) or rows (wide) via QR: the R factor of an
/// orthonormal matrix is diagonal with entries +-1.
inline double qr_defect(const Matrix& w) {
  const Matrix a = w.rows() >= w.cols() ? w : Matrix(w.transpose());
  Eigen::HouseholderQR<Matrix> qr(a);
  const Matrix r = qr.matrixQR().topRows(a.cols()).triangularView<Eigen::Upper>();
  double defect = 0.0;
  for (Eigen::Index i = 0; i < r.rows(); ++i) {
    for (Eigen::Index j = 0; j < r.cols(); ++j) {
      const double target = i == j ? 1.0 : 0.0;
      defect = std::max(defect, std::abs(std::abs(r(i, j)) - target));
    }
  }
  return defect;
}

}  // namespace lipspline::testing
