#include <algorithm>
#include <cmath>

#include "criteria.hpp"
#include "lipspline/forward_model.hpp"
#include "lipspline/image.hpp"
#include "lipspline/pnp.hpp"

namespace lipspline::acceptance {
namespace {

constexpr double kSigma = 10.0 / 255.0;

std::vector<Tensor> phantoms(std::size_t count, std::uint64_t first_seed) {
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(phantom(64, first_seed + i));
  return out;
}

DenoiserConfig denoiser_config(ActivationKind kind, std::uint64_t seed, double lambda, std::size_t epochs) {
  DenoiserConfig cfg;
  cfg.spec.layer_kind = LayerKind::Conv;
  cfg.spec.widths = {1, 16, 16, 16, 1};
  cfg.spec.image_size = 32;
  cfg.spec.init = InitScheme::Orthogonal;
  cfg.spec.seed = seed;
  cfg.spec.activation.kind = kind;
  if (kind == ActivationKind::Lls) {
    cfg.spec.activation.spline_init = SplineInit::Identity;
    cfg.spec.activation.spline_size = 53;
    cfg.spec.activation.spline_range = 1.0;
  }
  cfg.train.eta = 3e-3;
  cfg.train.batch_size = 16;
  cfg.train.epochs = epochs;
  cfg.train.lambda = lambda;
  cfg.train.seed = seed;
  cfg.sigma = kSigma;
  cfg.patches_per_epoch = 256;
  return cfg;
}

struct Measurements {
  Tensor y1, y2;
};

std::vector<Measurements> measurement_pairs(const ForwardModel& model, std::size_t count, std::uint64_t seed) {
  std::vector<Measurements> out;
  for (std::size_t k = 0; k < count; ++k) {
    const std::uint64_t s = seed + 10 * k;
    const Tensor x1 = phantom(64, s);
    const Tensor x2 = k % 2 == 0 ? phantom(64, s + 1) : x1;
    out.push_back({model.apply(add_noise(x1, kSigma, s + 2)), model.apply(add_noise(x2, kSigma, s + 3))});
  }
  return out;
}

Verdict pnp_certificates() {
  const std::vector<Tensor> train = phantoms(16, 1000);
  const DenoiserTraining trained = train_denoiser(train, denoiser_config(ActivationKind::Lls, 1, 0.0, 10));
  const FrozenNetwork frozen = trained.net.freeze(64, 64);

  const CircularBlur blur(mild_blur_kernel(), 64, 64);
  const MaskedDft dft(random_column_mask(64, 0.3, 3), 64, 64);
  PnPConfig cfg;
  cfg.tol = 1e-9;
  cfg.max_iter = 50000;

  Detail detail;
  std::size_t prop3_checks = 0, prop3_failures = 0;
  double min_slack = 1e300;
  for (const ForwardModel* model : {static_cast<const ForwardModel*>(&blur), static_cast<const ForwardModel*>(&dft)}) {
    const AveragedDenoiser denoiser = AveragedDenoiser::from_network(frozen, 0.5);
    for (const Measurements& m : measurement_pairs(*model, 20, 9000)) {
      const Prop3Report r = stability_certificate_prop3(*model, denoiser, m.y1, m.y2, cfg);
      ++prop3_checks;
      prop3_failures += r.pass && r.corollary_pass ? 0 : 1;
      min_slack = std::min(min_slack, r.slack / std::max(r.rhs, 1e-300));
    }
  }
  detail.add("prop3_pairs", prop3_checks).add("prop3_failures", prop3_failures).add("min_relative_slack", min_slack);

  std::size_t prop4_checks = 0, prop4_failures = 0;
  double max_usage = 0.0;
  for (double k : {0.5, 0.9}) {
    for (const ForwardModel* model : {static_cast<const ForwardModel*>(&blur), static_cast<const ForwardModel*>(&dft)}) {
      const AveragedDenoiser denoiser = AveragedDenoiser::from_network(frozen, 0.5, k);
      for (const Measurements& m : measurement_pairs(*model, 5, 9500)) {
        const Prop4Report r = stability_certificate_prop4(*model, denoiser, m.y1, m.y2, cfg);
        ++prop4_checks;
        prop4_failures += r.pass ? 0 : 1;
        max_usage = std::max(max_usage, r.image_distance / std::max(r.bound, 1e-300));
      }
    }
  }
  detail.add("prop4_pairs", prop4_checks).add("prop4_failures", prop4_failures).add("max_distance_over_bound", max_usage);
  return {prop3_failures == 0 && prop4_failures == 0, detail.str()};
}

Verdict sparsification() {
  const std::vector<Tensor> train = phantoms(16, 1000);
  const std::vector<double> lambdas{0.0, 1e-6, 1e-4, 1e-2};
  std::vector<double> aelr;
  Detail detail;
  for (double lambda : lambdas) {
    const DenoiserTraining t = train_denoiser(train, denoiser_config(ActivationKind::Lls, 1, lambda, 30));
    aelr.push_back(t.net.mean_aelr());
    std::ostringstream key;
    key << "aelr@" << lambda;
    detail.add(key.str(), aelr.back());
  }
  std::size_t inversions = 0;
  bool small_inversions = true;
  for (std::size_t i = 1; i < aelr.size(); ++i) {
    if (aelr[i] > aelr[i - 1]) {
      ++inversions;
      small_inversions = small_inversions && aelr[i] <= 1.05 * aelr[i - 1];
    }
  }
  const bool pass = inversions <= 1 && small_inversions && aelr.front() >= 3.0 && aelr[2] <= 1.5;
  detail.add("inversions", inversions);
  return {pass, detail.str()};
}

Verdict denoiser_ordering() {
  const std::vector<Tensor> train = phantoms(16, 1000);
  const std::vector<Tensor> test = phantoms(4, 5000);
  std::vector<double> lls, relu;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    for (ActivationKind kind : {ActivationKind::Relu, ActivationKind::Lls}) {
      const DenoiserTraining t = train_denoiser(train, denoiser_config(kind, seed, 0.0, 30));
      const double p = denoising_psnr(t.net.freeze(64, 64), test, kSigma, 77);
      (kind == ActivationKind::Lls ? lls : relu).push_back(p);
    }
  }
  const double ml = median(lls), mr = median(relu);
  return {ml >= mr + 0.1, Detail().add("lls_median_psnr", ml).add("relu_median_psnr", mr).add("margin_db", ml - mr).str()};
}

}  // namespace

std::vector<Criterion> imaging_criteria() {
  return {
      {9, "pnp_certificates", 1200.0, pnp_certificates},
      {10, "sparsification_trend", 0.0, sparsification},
      {11, "denoiser_ordering", 0.0, denoiser_ordering},
  };
}

}  // namespace lipspline::acceptance
