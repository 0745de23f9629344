#include "lipspline/linear.hpp"

#include <cmath>
#include <complex>
#include <numbers>

#include <Eigen/Dense>

#include "lipspline/error.hpp"
#include "lipspline/ops.hpp"

namespace lipspline {

DenseOperator::DenseOperator(Tensor weight) : weight_(std::move(weight)) {
  if (weight_.rank() != 2) throw ShapeError("dense operator needs a matrix, got " + shape_string(weight_.shape()));
}

Tensor DenseOperator::apply(const Tensor& x) const { return ops::matmul(weight_, x.reshaped({x.size()})); }

Tensor DenseOperator::adjoint(const Tensor& y) const {
  const std::size_t m = weight_.dim(0), n = weight_.dim(1);
  if (y.size() != m) throw ShapeError("dense adjoint: length mismatch");
  Tensor x({n});
  ops::gemm_tn(m, n, 1, weight_.data().data(), y.data().data(), x.data().data());
  return x;
}

ConvOperator::ConvOperator(Tensor kernel, std::size_t height, std::size_t width)
    : kernel_(std::move(kernel)), height_(height), width_(width) {
  if (kernel_.rank() != 4) throw ShapeError("conv operator needs a [Co,Ci,kh,kw] kernel");
}

Tensor ConvOperator::apply(const Tensor& x) const { return ops::conv2d(x.reshaped(input_shape()), kernel_); }

Tensor ConvOperator::adjoint(const Tensor& y) const {
  return ops::conv2d_adjoint(y.reshaped(output_shape()), kernel_);
}

double dense_spectral_norm(const Tensor& weight) {
  if (weight.rank() != 2) throw ShapeError("dense_spectral_norm needs a matrix");
  const auto m = static_cast<Eigen::Index>(weight.dim(0)), n = static_cast<Eigen::Index>(weight.dim(1));
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> w(
      weight.data().data(), m, n);
  const Eigen::MatrixXd gram = m < n ? Eigen::MatrixXd(w * w.transpose()) : Eigen::MatrixXd(w.transpose() * w);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, eig.eigenvalues().maxCoeff()));
}

namespace {

// Visits the DFT symbol of the kernel (a Co x Ci complex matrix) at every frequency (u, v).
template <class F>
void for_each_symbol(const Tensor& kernel, std::size_t height, std::size_t width, F&& visit) {
  if (kernel.rank() != 4) throw ShapeError("conv spectral norm needs a [Co,Ci,kh,kw] kernel");
  if (height == 0 || width == 0) throw ShapeError("conv spectral norm needs a non-empty image size");
  const std::size_t co = kernel.dim(0), ci = kernel.dim(1), kh = kernel.dim(2), kw = kernel.dim(3);
  const long cy = static_cast<long>(kh / 2), cx = static_cast<long>(kw / 2);
  std::vector<std::complex<double>> phase_y(kh), phase_x(kw);
  Eigen::MatrixXcd symbol(static_cast<Eigen::Index>(co), static_cast<Eigen::Index>(ci));
  for (std::size_t u = 0; u < height; ++u) {
    for (std::size_t dy = 0; dy < kh; ++dy) {
      const double t = 2.0 * std::numbers::pi * static_cast<double>(u) * static_cast<double>(static_cast<long>(dy) - cy) /
                       static_cast<double>(height);
      phase_y[dy] = std::polar(1.0, t);
    }
    for (std::size_t v = 0; v < width; ++v) {
      for (std::size_t dx = 0; dx < kw; ++dx) {
        const double t = 2.0 * std::numbers::pi * static_cast<double>(v) *
                         static_cast<double>(static_cast<long>(dx) - cx) / static_cast<double>(width);
        phase_x[dx] = std::polar(1.0, t);
      }
      for (std::size_t o = 0; o < co; ++o) {
        for (std::size_t i = 0; i < ci; ++i) {
          const double* k = kernel.data().data() + (o * ci + i) * kh * kw;
          std::complex<double> acc = 0.0;
          for (std::size_t dy = 0; dy < kh; ++dy) {
            for (std::size_t dx = 0; dx < kw; ++dx) acc += k[dy * kw + dx] * phase_y[dy] * phase_x[dx];
          }
          symbol(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(i)) = acc;
        }
      }
      visit(u, v, symbol);
    }
  }
}

double top_eigenvalue(const Eigen::MatrixXcd& symbol, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>& eig) {
  if (symbol.rows() >= symbol.cols()) {
    eig.compute(symbol.adjoint() * symbol, Eigen::EigenvaluesOnly);
  } else {
    eig.compute(symbol * symbol.adjoint(), Eigen::EigenvaluesOnly);
  }
  return eig.eigenvalues().maxCoeff();
}

}  // namespace

double conv_spectral_norm(const Tensor& kernel, std::size_t height, std::size_t width) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig;
  double best = 0.0;
  for_each_symbol(kernel, height, width, [&](std::size_t, std::size_t, const Eigen::MatrixXcd& symbol) {
    best = std::max(best, top_eigenvalue(symbol, eig));
  });
  return std::sqrt(best);
}

SingularPair conv_top_singular(const Tensor& kernel, std::size_t height, std::size_t width) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig;
  double best = -1.0;
  std::size_t bu = 0, bv = 0;
  Eigen::MatrixXcd best_symbol;
  for_each_symbol(kernel, height, width, [&](std::size_t u, std::size_t v, const Eigen::MatrixXcd& symbol) {
    const double lam = top_eigenvalue(symbol, eig);
    if (lam > best) {
      best = lam;
      bu = u;
      bv = v;
      best_symbol = symbol;
    }
  });
  const std::size_t ci = kernel.dim(1);
  Eigen::VectorXcd z;
  if (best_symbol.rows() >= best_symbol.cols()) {
    eig.compute(best_symbol.adjoint() * best_symbol);
    z = eig.eigenvectors().col(eig.eigenvalues().size() - 1);
  } else {
    eig.compute(best_symbol * best_symbol.adjoint());
    z = best_symbol.adjoint() * eig.eigenvectors().col(eig.eigenvalues().size() - 1);
  }
  // A maps z e^{i w.n} to (K z) e^{i w.n}; A is real, so the real and imaginary
  // parts are right singular vectors whenever they are non-zero
  SingularPair out;
  out.sigma = std::sqrt(std::max(0.0, best));
  Tensor re({1, ci, height, width}), im({1, ci, height, width});
  for (std::size_t c = 0; c < ci; ++c) {
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        const double t = 2.0 * std::numbers::pi *
                         (static_cast<double>(bu * y) / static_cast<double>(height) +
                          static_cast<double>(bv * x) / static_cast<double>(width));
        const std::complex<double> e = z(static_cast<Eigen::Index>(c)) * std::polar(1.0, t);
        re[(c * height + y) * width + x] = e.real();
        im[(c * height + y) * width + x] = e.imag();
      }
    }
  }
  const double nr = norm2(re.data()), ni = norm2(im.data());
  out.v = nr >= ni ? std::move(re) : std::move(im);
  const double n = std::max(nr, ni);
  if (n == 0.0) throw NumericError("conv_top_singular: degenerate singular vector");
  for (auto& e : out.v.data()) e /= n;
  return out;
}

Tensor random_unit(const Shape& shape, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Tensor v(shape);
  for (auto& e : v.data()) e = normal(rng);
  const double n = norm2(v.data());
  for (auto& e : v.data()) e /= n;
  return v;
}

PowerIteration power_iteration(const LinearOperator& op, int iters, Tensor v, double tol) {
  if (iters < 1) throw ConfigError("power_iteration: at least one iteration required");
  if (v.size() != shape_size(op.input_shape())) throw ShapeError("power_iteration: start vector has wrong size");
  double nv = norm2(v.data());
  if (nv == 0.0) throw NumericError("power_iteration: start vector is zero");
  v = v.reshaped(op.input_shape());
  for (auto& e : v.data()) e /= nv;

  PowerIteration r;
  double prev = 0.0;
  Tensor u = op.apply(v);
  for (int k = 0; k < iters; ++k) {
    Tensor w = op.adjoint(u);
    nv = norm2(w.data());
    ++r.iterations;
    if (nv == 0.0) break;
    for (auto& e : w.data()) e /= nv;
    v = std::move(w);
    u = op.apply(v);
    const double sigma = norm2(u.data());
    const bool done = tol > 0.0 && std::abs(sigma - prev) <= tol * sigma;
    prev = sigma;
    if (done) break;
  }
  r.sigma = norm2(u.data());
  if (r.sigma > 0.0) {
    for (auto& e : u.data()) e /= r.sigma;
  }
  r.u = std::move(u);
  r.v = std::move(v);
  return r;
}

Tensor spectral_normalize(const Tensor& weight, double sigma) {
  Tensor w = weight;
  if (sigma > 1.0) {
    for (auto& e : w.data()) e /= sigma;
  }
  return w;
}

namespace {

// One step of the Björck recurrence, Gram matrix taken on the smaller side.
Tensor bjorck_step(const Tensor& w) {
  const std::size_t m = w.dim(0), n = w.dim(1);
  Tensor out({m, n});
  if (m >= n) {
    Tensor gram({n, n});
    ops::gemm_tn(m, n, n, w.data().data(), w.data().data(), gram.data().data());
    ops::gemm(m, n, n, w.data().data(), gram.data().data(), out.data().data());
  } else {
    Tensor gram({m, m});
    ops::gemm_nt(m, n, m, w.data().data(), w.data().data(), gram.data().data());
    ops::gemm(m, m, n, gram.data().data(), w.data().data(), out.data().data());
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.5 * w[i] - 0.5 * out[i];
  return out;
}

}  // namespace

double orthonormality_defect(const Tensor& w) {
  if (w.rank() != 2) throw ShapeError("orthonormality_defect needs a matrix");
  const std::size_t m = w.dim(0), n = w.dim(1);
  const std::size_t p = std::min(m, n);
  Tensor gram({p, p});
  if (m >= n) {
    ops::gemm_tn(m, n, n, w.data().data(), w.data().data(), gram.data().data());
  } else {
    ops::gemm_nt(m, n, m, w.data().data(), w.data().data(), gram.data().data());
  }
  for (std::size_t i = 0; i < p; ++i) gram[i * p + i] -= 1.0;
  return norm2(gram.data());
}

Tensor bjorck_orthonormalize(const Tensor& weight, int iters) {
  if (weight.rank() != 2) throw ShapeError("bjorck_orthonormalize needs a matrix");
  const double limit = 4.0 * std::sqrt(static_cast<double>(std::min(weight.dim(0), weight.dim(1)))) + 4.0;
  Tensor w = weight;
  for (int k = 0; k < iters; ++k) {
    w = bjorck_step(w);
    const double f = norm2(w.data());
    if (!std::isfinite(f) || f > limit) {
      throw NumericError("bjorck_orthonormalize diverged; pre-scale the weight so its spectral norm is at most 1");
    }
  }
  return w;
}

Tensor bjorck_to_convergence(const Tensor& weight, double tol, int max_iters) {
  Tensor w = weight;
  for (int k = 0; k < max_iters; ++k) {
    if (orthonormality_defect(w) <= tol) return w;
    w = bjorck_orthonormalize(w, 1);
  }
  return w;
}

}  // namespace lipspline
