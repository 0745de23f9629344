#include "lipspline/pnp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "lipspline/error.hpp"
#include "lipspline/image.hpp"
#include "lipspline/io.hpp"
#include "lipspline/parallel.hpp"

namespace lipspline {

Tensor data_gradient(const LinearOperator& model, const Tensor& x, const Tensor& y) {
  if (y.size() != shape_size(model.output_shape())) {
    throw ShapeError("data_gradient: measurement " + shape_string(y.shape()) + " vs model output " +
                     shape_string(model.output_shape()));
  }
  Tensor r = model.apply(x);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= y[i];
  return model.adjoint(r);
}

AveragedDenoiser::AveragedDenoiser(ImageMap base, double beta, double scale)
    : base_(std::move(base)), beta_(beta), scale_(scale) {
  if (!base_) throw ConfigError("denoiser needs a base map");
  if (!(beta >= 0.0 && beta < 1.0)) throw ConfigError("beta must lie in [0, 1)");
  if (!(scale >= 0.0 && scale <= 1.0)) throw ConfigError("denoiser scale must lie in [0, 1]");
}

AveragedDenoiser AveragedDenoiser::from_network(FrozenNetwork net, double beta, double scale) {
  if (net.layers().empty() || net.layers().front().kind != LayerKind::Conv) {
    throw ConfigError("image denoiser must be a convolutional network");
  }
  if (net.layers().front().weight.dim(1) != 1 || net.layers().back().weight.dim(0) != 1) {
    throw ConfigError("image denoiser must map one channel to one channel");
  }
  auto map = [net = std::move(net)](const Tensor& x) {
    const Shape s = x.shape();
    return net.apply(x.reshaped({1, 1, x.dim(0), x.dim(1)})).reshaped(s);
  };
  return AveragedDenoiser(std::move(map), beta, scale);
}

Tensor AveragedDenoiser::operator()(const Tensor& x) const {
  Tensor out = beta_ == 0.0 ? Tensor(x.shape()) : base_(x);
  if (out.size() != x.size()) throw ShapeError("denoiser changed the image size");
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = scale_ * (beta_ * out[i] + (1.0 - beta_) * x[i]);
  return out;
}

PnPRun pnp_fbs(const Tensor& y, const ForwardModel& model, const AveragedDenoiser& denoiser, const PnPConfig& cfg,
               const Tensor* reference) {
  const double lip = model.operator_norm() * model.operator_norm();
  if (lip == 0.0) throw ConfigError("forward model is zero");
  PnPRun run;
  run.alpha = cfg.alpha == 0.0 ? 1.0 / lip : cfg.alpha;
  if (!(run.alpha > 0.0 && run.alpha < 2.0 / lip)) throw ConfigError("step size must lie in (0, 2 / |H|^2)");
  if (!(cfg.tol >= 0.0) || cfg.max_iter == 0) throw ConfigError("pnp needs tol >= 0 and max_iter >= 1");
  if (!y.all_finite()) throw NumericError("measurements contain non-finite values");

  Tensor x = model.adjoint(y);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k <= cfg.max_iter; ++k) {
    Tensor step = data_gradient(model, x, y);
    for (std::size_t i = 0; i < step.size(); ++i) step[i] = x[i] - run.alpha * step[i];
    Tensor next = denoiser(step);
    double res = 0.0;
    for (std::size_t i = 0; i < next.size(); ++i) res += (next[i] - x[i]) * (next[i] - x[i]);
    res = std::sqrt(res);
    const double scale = norm2(x.data());
    run.residuals.push_back(res);
    run.iterations = k;
    if (!std::isfinite(res)) throw NumericError("pnp diverged: non-finite residual at iteration " + std::to_string(k));
    x = std::move(next);
    if (reference != nullptr) run.psnr.push_back(psnr(x, *reference));
    if (cfg.keep_every > 0 && k % cfg.keep_every == 0) run.iterates.push_back(x);
    if (res <= cfg.tol * scale) {
      run.converged = true;
      break;
    }
    best = std::min(best, res);
    if (res > 10.0 * best) {
      throw NumericError("pnp diverged: residual " + format_double(res) + " at iteration " + std::to_string(k) +
                         " exceeds 10x its minimum " + format_double(best));
    }
  }
  run.x = std::move(x);
  return run;
}

std::string run_report_csv(const PnPRun& run) {
  const bool with_psnr = run.psnr.size() == run.residuals.size() && !run.psnr.empty();
  CsvWriter csv(with_psnr ? std::vector<std::string>{"iter", "residual", "psnr"}
                          : std::vector<std::string>{"iter", "residual"});
  for (std::size_t k = 0; k < run.residuals.size(); ++k) {
    csv.cell(k + 1).cell(run.residuals[k]);
    if (with_psnr) csv.cell(run.psnr[k]);
    csv.end_row();
  }
  return csv.str();
}

namespace {

double distance(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) throw ShapeError("distance: size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(acc);
}

bool within(double lhs, double bound) { return lhs <= bound * (1.0 + kCertificateSlack) + 1e-12; }

std::pair<PnPRun, PnPRun> solve_pair(const ForwardModel& model, const AveragedDenoiser& denoiser, const Tensor& y1,
                                     const Tensor& y2, const PnPConfig& cfg) {
  PnPRun r1 = pnp_fbs(y1, model, denoiser, cfg);
  PnPRun r2 = pnp_fbs(y2, model, denoiser, cfg);
  if (!r1.converged || !r2.converged) {
    throw CertificateRefused("fixed point not reached within " + std::to_string(cfg.max_iter) +
                             " iterations at tol " + format_double(cfg.tol));
  }
  return {std::move(r1), std::move(r2)};
}

}  // namespace

Prop3Report stability_certificate_prop3(const ForwardModel& model, const AveragedDenoiser& denoiser, const Tensor& y1,
                                        const Tensor& y2, const PnPConfig& cfg) {
  if (denoiser.beta() > 0.5) {
    throw CertificateRefused("certificate requires beta <= 1/2, got beta = " + format_double(denoiser.beta()));
  }
  if (denoiser.scale() != 1.0) throw CertificateRefused("certificate requires an unscaled averaged denoiser");
  if (cfg.tol > 1e-9) throw CertificateRefused("certificate requires fixed-point tol <= 1e-9");
  const auto [r1, r2] = solve_pair(model, denoiser, y1, y2, cfg);

  Prop3Report rep;
  rep.iterations1 = r1.iterations;
  rep.iterations2 = r2.iterations;
  rep.measurement_distance = distance(y1, y2);
  rep.image_distance = distance(r1.x, r2.x);
  rep.lhs = distance(model.apply(r1.x), model.apply(r2.x));
  rep.rhs = rep.measurement_distance;
  rep.slack = rep.rhs - rep.lhs;
  rep.pass = within(rep.lhs, rep.rhs);
  const double smin = model.min_singular_value();
  rep.invertible = smin > 0.0;
  if (rep.invertible) {
    rep.corollary_bound = rep.rhs / (smin * smin);
    rep.corollary_pass = within(rep.image_distance, rep.corollary_bound);
    rep.sharp_bound = rep.rhs / smin;
    rep.sharp_pass = within(rep.image_distance, rep.sharp_bound);
  }
  return rep;
}

Prop4Report stability_certificate_prop4(const ForwardModel& model, const AveragedDenoiser& denoiser, const Tensor& y1,
                                        const Tensor& y2, const PnPConfig& cfg) {
  const double k = denoiser.scale();
  if (k >= 1.0) throw ConfigError("certificate requires a K-Lipschitz denoiser with K < 1");
  const auto [r1, r2] = solve_pair(model, denoiser, y1, y2, cfg);
  Prop4Report rep;
  rep.lipschitz = k;
  rep.alpha = r1.alpha;
  rep.iterations1 = r1.iterations;
  rep.iterations2 = r2.iterations;
  rep.measurement_distance = distance(y1, y2);
  rep.image_distance = distance(r1.x, r2.x);
  rep.bound = rep.alpha * k * model.operator_norm() / (1.0 - k) * rep.measurement_distance;
  rep.pass = within(rep.image_distance, rep.bound);
  return rep;
}

DenoiserTraining train_denoiser(const std::vector<Tensor>& images, const DenoiserConfig& cfg) {
  validate(cfg.train);
  if (images.empty()) throw ConfigError("denoiser training set is empty");
  const NetworkSpec& spec = cfg.spec;
  if (spec.layer_kind != LayerKind::Conv || spec.widths.front() != 1 || spec.widths.back() != 1) {
    throw ConfigError("denoiser must be a single-channel conv network");
  }
  const std::size_t p = spec.image_size;
  for (const auto& img : images) {
    if (img.rank() != 2 || img.dim(0) < p || img.dim(1) < p) {
      throw ConfigError("training image smaller than the patch size " + std::to_string(p));
    }
  }
  if (cfg.patches_per_epoch == 0) throw ConfigError("patches_per_epoch must be positive");
  if (cfg.sigma < 0.0) throw ConfigError("noise level must be non-negative");

  DenoiserTraining result{Network(spec), {}};
  Network& net = result.net;
  std::mt19937_64 rng(cfg.train.seed);
  std::normal_distribution<double> noise(0.0, cfg.sigma);
  Adam opt;
  const std::size_t b = cfg.train.batch_size;
  for (std::size_t epoch = 1; epoch <= cfg.train.epochs; ++epoch) {
    double loss_acc = 0.0;
    std::size_t batches = 0;
    for (std::size_t done = 0; done < cfg.patches_per_epoch; done += b) {
      const std::size_t m = std::min(b, cfg.patches_per_epoch - done);
      Tensor clean({m, 1, p, p});
      Tensor noisy({m, 1, p, p});
      for (std::size_t s = 0; s < m; ++s) {
        const Tensor& img = images[rng() % images.size()];
        const std::size_t r0 = rng() % (img.dim(0) - p + 1), c0 = rng() % (img.dim(1) - p + 1);
        const unsigned flips = static_cast<unsigned>(rng() & 3U);
        for (std::size_t r = 0; r < p; ++r) {
          for (std::size_t c = 0; c < p; ++c) {
            const std::size_t rr = (flips & 1U) != 0 ? p - 1 - r : r;
            const std::size_t cc = (flips & 2U) != 0 ? p - 1 - c : c;
            const double v = img.at(r0 + rr, c0 + cc);
            const std::size_t i = (s * p + r) * p + c;
            clean[i] = v;
            noisy[i] = v + (cfg.sigma > 0.0 ? noise(rng) : 0.0);
          }
        }
      }
      loss_acc += train_step(net, opt, noisy, clean, cfg.train).data;
      ++batches;
    }
    result.history.push_back({epoch, loss_acc / static_cast<double>(batches), net.mean_aelr()});
  }
  return result;
}

double aggregate_psnr(const std::vector<Tensor>& images, const std::vector<Tensor>& refs) {
  if (images.size() != refs.size() || images.empty()) throw ShapeError("aggregate_psnr: set size mismatch");
  double se = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < images.size(); ++k) {
    if (images[k].size() != refs[k].size()) throw ShapeError("aggregate_psnr: image size mismatch");
    for (std::size_t i = 0; i < images[k].size(); ++i) se += (images[k][i] - refs[k][i]) * (images[k][i] - refs[k][i]);
    n += images[k].size();
  }
  const double mse = se / static_cast<double>(n);
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

double denoising_psnr(const FrozenNetwork& net, const std::vector<Tensor>& clean, double sigma, std::uint64_t seed) {
  std::vector<Tensor> out;
  out.reserve(clean.size());
  for (std::size_t k = 0; k < clean.size(); ++k) {
    const Tensor& img = clean[k];
    const Tensor noisy = add_noise(img, sigma, seed + k);
    out.push_back(net.apply(noisy.reshaped({1, 1, img.dim(0), img.dim(1)})).reshaped(img.shape()));
  }
  return aggregate_psnr(out, clean);
}

GridSearch grid_search(const ForwardModel& model, const std::vector<std::pair<double, ImageMap>>& denoisers,
                       const std::vector<double>& betas, const std::vector<Tensor>& measurements,
                       const std::vector<Tensor>& references, const PnPConfig& cfg) {
  if (denoisers.empty() || betas.empty()) throw ConfigError("grid search needs denoisers and betas");
  if (measurements.size() != references.size() || measurements.empty()) {
    throw ConfigError("grid search needs matching measurements and references");
  }
  GridSearch out;
  for (const auto& [sigma, map] : denoisers) {
    for (double beta : betas) out.points.push_back({sigma, beta, 0.0});
  }
  parallel_for(out.points.size(), [&](std::size_t i) {
    GridPoint& pt = out.points[i];
    const auto& map = denoisers[i / betas.size()].second;
    const AveragedDenoiser d(map, pt.beta);
    std::vector<Tensor> recon;
    try {
      for (const auto& y : measurements) recon.push_back(pnp_fbs(y, model, d, cfg).x);
      pt.psnr = aggregate_psnr(recon, references);
    } catch (const NumericError&) {
      pt.psnr = -std::numeric_limits<double>::infinity();
    }
  });
  out.best = out.points.front();
  for (const auto& pt : out.points) {
    if (pt.psnr > out.best.psnr) out.best = pt;
  }
  return out;
}

}  // namespace lipspline
