#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lipspline/forward_model.hpp"
#include "lipspline/network.hpp"
#include "lipspline/training.hpp"

namespace lipspline {

using ImageMap = std::function<Tensor(const Tensor&)>;

/// H^T (H x - y).
Tensor data_gradient(const LinearOperator& model, const Tensor& x, const Tensor& y);

/// D = K (beta R + (1 - beta) Id). With K = 1 and a 1-Lipschitz R this is
/// averaged; with K < 1 it is K-Lipschitz.
class AveragedDenoiser {
 public:
  AveragedDenoiser(ImageMap base, double beta, double scale = 1.0);
  /// Wraps a single-channel conv network frozen at the image size.
  static AveragedDenoiser from_network(FrozenNetwork net, double beta, double scale = 1.0);

  Tensor operator()(const Tensor& x) const;
  double beta() const noexcept { return beta_; }
  double scale() const noexcept { return scale_; }
  const ImageMap& base() const noexcept { return base_; }

 private:
  ImageMap base_;
  double beta_;
  double scale_;
};

struct PnPConfig {
  /// Step size; 0 selects 1 / |H|^2.
  double alpha = 0.0;
  double tol = 1e-7;
  std::size_t max_iter = 1000;
  /// Keep every n-th iterate (0 keeps none).
  std::size_t keep_every = 0;
};

struct PnPRun {
  std::vector<Tensor> iterates;
  std::vector<double> residuals;  // |x^{k+1} - x^k| per iteration
  std::vector<double> psnr;       // per iteration when a reference is given
  Tensor x;
  std::size_t iterations = 0;
  bool converged = false;
  double alpha = 0.0;
};

/// x^{k+1} = D(x^k - alpha H^T (H x^k - y)) from x^0 = H^T y until
/// |x^{k+1} - x^k| <= tol |x^k| or max_iter. Throws NumericError when the
/// residual grows 10x above its running minimum or turns non-finite.
PnPRun pnp_fbs(const Tensor& y, const ForwardModel& model, const AveragedDenoiser& denoiser, const PnPConfig& cfg,
               const Tensor* reference = nullptr);

/// iter,residual[,psnr]
std::string run_report_csv(const PnPRun& run);

struct Prop3Report {
  double measurement_distance = 0.0;  // |y1 - y2|
  double image_distance = 0.0;        // |x1* - x2*|
  double lhs = 0.0;                   // |H x1* - H x2*|
  double rhs = 0.0;                   // |y1 - y2|
  double slack = 0.0;                 // rhs - lhs
  bool pass = false;
  bool invertible = false;
  /// Invertible H only: |x1* - x2*| <= |y1 - y2| / sigma_min(H^T H).
  double corollary_bound = 0.0;
  bool corollary_pass = true;
  /// Invertible H only: |x1* - x2*| <= |y1 - y2| / sigma_min(H).
  double sharp_bound = 0.0;
  bool sharp_pass = true;
  std::size_t iterations1 = 0;
  std::size_t iterations2 = 0;
};

/// Relative slack granted to certificate inequalities for the fixed-point error.
constexpr double kCertificateSlack = 1e-6;

/// Throws CertificateRefused when beta > 1/2, the denoiser is scaled, cfg.tol > 1e-9
/// or either fixed point fails to converge.
Prop3Report stability_certificate_prop3(const ForwardModel& model, const AveragedDenoiser& denoiser, const Tensor& y1,
                                        const Tensor& y2, const PnPConfig& cfg);

struct Prop4Report {
  double lipschitz = 0.0;  // K
  double alpha = 0.0;
  double measurement_distance = 0.0;
  double image_distance = 0.0;
  double bound = 0.0;  // alpha K |H| / (1 - K) |y1 - y2|
  bool pass = false;
  std::size_t iterations1 = 0;
  std::size_t iterations2 = 0;
};

/// K is the denoiser scale. Throws ConfigError for K >= 1 and CertificateRefused
/// when a fixed point fails to converge.
Prop4Report stability_certificate_prop4(const ForwardModel& model, const AveragedDenoiser& denoiser, const Tensor& y1,
                                        const Tensor& y2, const PnPConfig& cfg);

struct DenoiserConfig {
  NetworkSpec spec;  // single-channel conv net; spec.image_size is the patch size
  TrainConfig train;
  double sigma = 10.0 / 255.0;
  std::size_t patches_per_epoch = 1024;
};

struct DenoiserEpoch {
  std::size_t epoch = 0;
  double train_mse = 0.0;
  double mean_aelr = 0.0;
};

struct DenoiserTraining {
  Network net;
  std::vector<DenoiserEpoch> history;
};

/// MSE training on random noisy patches (fresh noise and flips every epoch).
DenoiserTraining train_denoiser(const std::vector<Tensor>& images, const DenoiserConfig& cfg);

/// Aggregate PSNR (pooled MSE) of denoised noisy copies of `clean`.
double denoising_psnr(const FrozenNetwork& net, const std::vector<Tensor>& clean, double sigma, std::uint64_t seed);

/// Pooled-MSE PSNR of a set of images.
double aggregate_psnr(const std::vector<Tensor>& images, const std::vector<Tensor>& refs);

struct GridPoint {
  double sigma = 0.0;
  double beta = 0.0;
  double psnr = 0.0;  // -inf when a run diverged
};

struct GridSearch {
  GridPoint best;
  std::vector<GridPoint> points;
};

/// Reconstructs every measurement with each (sigma, beta) and picks the best aggregate PSNR.
GridSearch grid_search(const ForwardModel& model, const std::vector<std::pair<double, ImageMap>>& denoisers,
                       const std::vector<double>& betas, const std::vector<Tensor>& measurements,
                       const std::vector<Tensor>& references, const PnPConfig& cfg);

}  // namespace lipspline
