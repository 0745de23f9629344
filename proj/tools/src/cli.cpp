#include "lipspline_cli/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <sstream>

#include "lipspline/checkpoint.hpp"
#include "lipspline/config.hpp"
#include "lipspline/error.hpp"
#include "lipspline/fit1d.hpp"
#include "lipspline/forward_model.hpp"
#include "lipspline/image.hpp"
#include "lipspline/io.hpp"
#include "lipspline/pnp.hpp"
#include "lipspline/w1.hpp"
#include "settings.hpp"

namespace lipspline::cli {

namespace fs = std::filesystem;

namespace {

struct Context {
  Config config;
  fs::path out_dir;
  std::ostream& out;
  std::uint64_t seed = 0;

  /// Rejects unread keys, then records the resolved settings in the output directory.
  void commit() {
    config.reject_unused();
    fs::create_directories(out_dir);
    write_file_atomic(out_dir / "config.resolved", config.resolved());
  }

  void write(const std::string& name, const std::string& content) const { write_file_atomic(out_dir / name, content); }
};

std::size_t get_size(Config& config, const std::string& key, std::size_t fallback) {
  const long long v = config.get_int(key, static_cast<long long>(fallback));
  if (v < 0) throw ConfigError("key '" + key + "' must be non-negative");
  return static_cast<std::size_t>(v);
}

int cmd_fit1d(Context& ctx) {
  Config& c = ctx.config;
  Fit1dConfig cfg;
  cfg.target = parse_target(c.get_string("target", "f3"));
  NetworkSpec net;
  net.widths = {1, 10, 10, 10, 1};
  cfg.spec = read_network_spec(c, net, ctx.seed);
  cfg.train = read_train_config(c, TrainConfig{}, ctx.seed);
  cfg.train_points = get_size(c, "train_points", cfg.train_points);
  cfg.test_points = get_size(c, "test_points", cfg.test_points);
  cfg.audit_pairs = get_size(c, "audit_pairs", cfg.audit_pairs);
  cfg.log_every = get_size(c, "log_every", cfg.log_every);
  ctx.commit();

  const Fit1dResult result = fit_1d(cfg);
  ctx.write("metrics.csv", metrics_csv(result.history));
  save_checkpoint(ctx.out_dir / "checkpoint.ckpt", result.net, {{"command", "fit1d"}, {"target", to_string(cfg.target)}});
  ctx.out << "test_mse = " << format_double(result.test_mse) << "\n";
  return kOk;
}

MixtureParams read_gaussian(Config& c, const std::string& prefix, double mean, double stddev) {
  const std::vector<double> m = c.get_doubles(prefix + ".mean", {mean});
  const double s = c.get_double(prefix + ".std", stddev);
  if (m.empty()) throw ConfigError("key '" + prefix + ".mean' is empty");
  if (s < 0.0) throw ConfigError("key '" + prefix + ".std' must be non-negative");
  Tensor factor({m.size(), m.size()});
  for (std::size_t i = 0; i < m.size(); ++i) factor.at(i, i) = s;
  return gaussian_params(m, factor);
}

int cmd_w1(Context& ctx) {
  Config& c = ctx.config;
  const std::string problem = c.get_string("problem", "gaussians");
  MixtureParams p1, p2;
  std::optional<double> oracle;
  if (problem == "gaussians") {
    p1 = read_gaussian(c, "p1", 0.0, 1.0);
    p2 = read_gaussian(c, "p2", 3.0, 1.0);
    if (p1.dim() != p2.dim()) throw ConfigError("p1 and p2 have different dimensions");
  } else if (problem == "mixture") {
    const std::size_t dim = get_size(c, "mixture.dim", 1);
    if (dim == 0) throw ConfigError("mixture.dim must be positive");
    std::mt19937_64 rng(c.get_seed("mixture.seed", 12345));
    p1 = random_mixture(dim, rng);
    p2 = random_mixture(dim, rng);
  } else {
    throw ConfigError("unknown problem '" + problem + "' (expected gaussians or mixture)");
  }
  const std::size_t dim = p1.dim();

  NetworkSpec net;
  net.widths = {dim, 32, 32, 32, 1};
  net.constraint = Constraint::Orthonormal;
  TrainConfig train;
  train.eta = 5e-3;
  train.batch_size = 512;
  CriticConfig cfg;
  cfg.train = read_train_config(c, train, ctx.seed);
  NetworkSpec spec = read_network_spec(c, net, ctx.seed);
  if (spec.layer_kind != LayerKind::Dense || spec.widths.front() != dim || spec.widths.back() != 1)
    throw ConfigError("critic must be a dense " + std::to_string(dim) + " -> 1 network");
  cfg.steps = get_size(c, "critic.steps", cfg.steps);
  cfg.log_every = get_size(c, "critic.log_every", cfg.log_every);
  cfg.log_samples = get_size(c, "critic.log_samples", cfg.log_samples);
  const std::size_t n_mc = get_size(c, "estimate.samples", 100000);
  const std::size_t repeats = get_size(c, "estimate.repeats", 10);
  ctx.commit();

  if (dim == 1) oracle = w1_1d_oracle(Distribution1d::from_mixture(p1), Distribution1d::from_mixture(p2));

  const CriticTraining trained = train_critic(spec, p1, p2, cfg);
  const W1Estimate est = estimate_w1(trained.critic.freeze(), p1, p2, n_mc, repeats, ctx.seed + 1);

  CsvWriter curve({"step", "estimate"});
  for (std::size_t i = 0; i < trained.train_estimates.size(); ++i) {
    curve.cell(std::min((i + 1) * cfg.log_every, cfg.steps)).cell(trained.train_estimates[i]);
    curve.end_row();
  }
  ctx.write("curve.csv", curve.str());

  CsvWriter results(
      {"activation", "depth", "width", "seed", "estimate_mean", "estimate_std", "standard_error", "oracle"});
  results.cell(std::string(to_string(spec.activation.kind)))
      .cell(spec.depth())
      .cell(spec.widths[1])
      .cell(std::to_string(ctx.seed))
      .cell(est.mean)
      .cell(est.std)
      .cell(est.standard_error);
  if (oracle) {
    results.cell(*oracle);
  } else {
    results.blank();
  }
  results.end_row();
  ctx.write("results.csv", results.str());
  save_checkpoint(ctx.out_dir / "checkpoint.ckpt", trained.critic, {{"command", "w1"}});

  ctx.out << "estimate = " << format_double(est.mean) << " +- " << format_double(est.std) << "\n";
  if (oracle) ctx.out << "oracle = " << format_double(*oracle) << "\n";
  return kOk;
}

std::vector<Tensor> read_images(Config& c, const std::string& prefix, std::size_t count, std::uint64_t seed) {
  const std::string dir = c.get_string(prefix + ".dir", "");
  if (!dir.empty()) {
    auto images = read_pgm_directory(dir);
    if (images.empty()) throw ConfigError("no .pgm files in '" + dir + "'");
    return images;
  }
  const std::size_t n = get_size(c, prefix + ".phantoms", count);
  const std::size_t size = get_size(c, prefix + ".size", 64);
  const std::uint64_t first = c.get_seed(prefix + ".seed", seed);
  if (n == 0) throw ConfigError("key '" + prefix + ".phantoms' must be positive");
  std::vector<Tensor> images;
  for (std::size_t i = 0; i < n; ++i) images.push_back(phantom(size, first + i));
  return images;
}

int cmd_train_denoiser(Context& ctx) {
  Config& c = ctx.config;
  NetworkSpec net;
  net.layer_kind = LayerKind::Conv;
  net.widths = {1, 16, 16, 16, 1};
  net.init = InitScheme::Orthogonal;
  net.image_size = 32;
  TrainConfig train;
  train.eta = 3e-3;
  train.batch_size = 16;
  train.epochs = 30;
  DenoiserConfig cfg;
  cfg.spec = read_network_spec(c, net, ctx.seed);
  cfg.train = read_train_config(c, train, ctx.seed);
  cfg.sigma = c.get_double("sigma", cfg.sigma);
  cfg.patches_per_epoch = get_size(c, "patches_per_epoch", 256);
  const std::vector<Tensor> images = read_images(c, "data", 16, 1000);
  const std::vector<Tensor> test = read_images(c, "test", 4, 5000);
  const std::uint64_t noise_seed = c.get_seed("test.noise_seed", 77);
  ctx.commit();

  const Shape test_shape = test.front().shape();
  for (const auto& t : test) {
    if (t.shape() != test_shape) throw ConfigError("test images must share one size");
  }

  const DenoiserTraining trained = train_denoiser(images, cfg);
  CsvWriter history({"epoch", "train_mse", "mean_aelr"});
  for (const auto& e : trained.history) {
    history.cell(e.epoch).cell(e.train_mse).cell(e.mean_aelr);
    history.end_row();
  }
  ctx.write("history.csv", history.str());
  save_checkpoint(ctx.out_dir / "checkpoint.ckpt", trained.net, {{"command", "train-denoiser"}});

  CsvWriter splines({"layer", "channel", "tv2", "aelr"});
  if (cfg.spec.activation.kind == ActivationKind::Lls) {
    for (std::size_t a = 0; a + 1 < cfg.spec.depth(); ++a) {
      const auto layer = trained.net.splines(a);
      for (std::size_t ch = 0; ch < layer.size(); ++ch) {
        splines.cell(a).cell(ch).cell(tv2(layer[ch])).cell(aelr(layer[ch]));
        splines.end_row();
      }
    }
  }
  ctx.write("splines.csv", splines.str());

  const FrozenNetwork frozen = trained.net.freeze(test_shape[0], test_shape[1]);
  const double test_psnr = denoising_psnr(frozen, test, cfg.sigma, noise_seed);
  std::vector<Tensor> noisy;
  for (std::size_t k = 0; k < test.size(); ++k) noisy.push_back(add_noise(test[k], cfg.sigma, noise_seed + k));
  const double noisy_psnr = aggregate_psnr(noisy, test);

  CsvWriter summary({"test_psnr", "noisy_psnr", "mean_aelr", "total_tv2"});
  summary.cell(test_psnr).cell(noisy_psnr).cell(trained.net.mean_aelr()).cell(trained.net.total_tv2());
  summary.end_row();
  ctx.write("summary.csv", summary.str());
  ctx.out << "test_psnr = " << format_double(test_psnr) << " (noisy " << format_double(noisy_psnr) << ")\n"
          << "mean_aelr = " << format_double(trained.net.mean_aelr()) << "\n";
  return kOk;
}

AveragedDenoiser make_denoiser(const std::string& name, double beta, double scale, std::size_t h, std::size_t w) {
  if (name == "zero") return AveragedDenoiser([](const Tensor& x) { return Tensor(x.shape()); }, beta, scale);
  if (name == "identity") return AveragedDenoiser([](const Tensor& x) { return x; }, beta, scale);
  return AveragedDenoiser::from_network(load_checkpoint(name).freeze(h, w), beta, scale);
}

Tensor masked(const ForwardModel& model, const Tensor& y) {
  if (dynamic_cast<const MaskedDft*>(&model) == nullptr) return y;
  return model.apply(model.adjoint(y));
}

void add(Tensor& a, const Tensor& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

int cmd_pnp(Context& ctx) {
  Config& c = ctx.config;
  const std::string image_path = c.get_string("image", "");
  Tensor truth;
  if (image_path.empty()) {
    truth = phantom(get_size(c, "phantom.size", 64), c.get_seed("phantom.seed", 5000));
  } else {
    truth = read_pgm(image_path);
  }
  const std::size_t h = truth.shape()[0];
  const std::size_t w = truth.shape()[1];

  const std::string model_name = c.get_string("model", "blur");
  std::unique_ptr<ForwardModel> model;
  if (model_name == "blur") {
    model = std::make_unique<CircularBlur>(mild_blur_kernel(), h, w);
  } else if (model_name == "dft") {
    const std::string mask_path = c.get_string("mask", "");
    std::vector<std::size_t> columns;
    if (mask_path.empty()) {
      columns = random_column_mask(w, c.get_double("mask.fraction", 0.3), c.get_seed("mask.seed", ctx.seed));
    } else {
      columns = read_mask_columns(mask_path, w);
    }
    model = std::make_unique<MaskedDft>(std::move(columns), h, w);
  } else if (model_name == "identity") {
    model = std::make_unique<IdentityModel>(h, w);
  } else {
    throw ConfigError("unknown model '" + model_name + "' (expected blur, dft or identity)");
  }

  const double noise_sigma = c.get_double("noise.sigma", 0.0);
  const std::string denoiser_name = c.get_string("denoiser", "zero");
  const double beta = c.get_double("beta", 0.5);
  const double scale = c.get_double("scale", 1.0);
  PnPConfig cfg;
  cfg.alpha = c.get_double("alpha", 0.0);
  cfg.tol = c.get_double("tol", cfg.tol);
  cfg.max_iter = get_size(c, "max_iter", cfg.max_iter);

  const std::string certify = c.get_string("certify", "none");
  if (certify != "none" && certify != "prop3" && certify != "prop4")
    throw ConfigError("unknown certificate '" + certify + "' (expected prop3 or prop4)");
  PnPConfig cert_cfg = cfg;
  double cert_delta = 0.0;
  if (certify != "none") {
    cert_cfg.tol = c.get_double("cert.tol", 1e-10);
    cert_cfg.max_iter = get_size(c, "cert.max_iter", 20000);
    cert_delta = c.get_double("cert.delta", 0.01);
  }
  ctx.commit();

  const AveragedDenoiser denoiser = make_denoiser(denoiser_name, beta, scale, h, w);
  Tensor y = model->apply(truth);
  if (noise_sigma > 0.0) add(y, masked(*model, add_noise(Tensor(y.shape()), noise_sigma, ctx.seed)));

  if (certify != "none") {
    Tensor y2 = y;
    add(y2, masked(*model, add_noise(Tensor(y.shape()), cert_delta, ctx.seed + 1)));
    std::ostringstream verdict;
    if (certify == "prop3") {
      const Prop3Report r = stability_certificate_prop3(*model, denoiser, y, y2, cert_cfg);
      CsvWriter csv({"certificate", "measurement_distance", "image_distance", "lhs", "rhs", "slack", "pass",
                     "invertible", "corollary_bound", "corollary_pass", "sharp_bound", "sharp_pass", "iterations1",
                     "iterations2"});
      csv.cell(std::string("prop3")).cell(r.measurement_distance).cell(r.image_distance).cell(r.lhs).cell(r.rhs);
      csv.cell(r.slack).cell(r.pass ? 1 : 0).cell(r.invertible ? 1 : 0).cell(r.corollary_bound);
      csv.cell(r.corollary_pass ? 1 : 0).cell(r.sharp_bound).cell(r.sharp_pass ? 1 : 0);
      csv.cell(r.iterations1).cell(r.iterations2);
      csv.end_row();
      ctx.write("certificate.csv", csv.str());
      verdict << "prop3 " << (r.pass && r.corollary_pass ? "pass" : "FAIL") << ": |H dx| = " << format_double(r.lhs)
              << " <= |dy| = " << format_double(r.rhs);
    } else {
      const Prop4Report r = stability_certificate_prop4(*model, denoiser, y, y2, cert_cfg);
      CsvWriter csv({"certificate", "lipschitz", "alpha", "measurement_distance", "image_distance", "bound", "pass",
                     "iterations1", "iterations2"});
      csv.cell(std::string("prop4")).cell(r.lipschitz).cell(r.alpha).cell(r.measurement_distance);
      csv.cell(r.image_distance).cell(r.bound).cell(r.pass ? 1 : 0).cell(r.iterations1).cell(r.iterations2);
      csv.end_row();
      ctx.write("certificate.csv", csv.str());
      verdict << "prop4 " << (r.pass ? "pass" : "FAIL") << ": |dx| = " << format_double(r.image_distance)
              << " <= " << format_double(r.bound);
    }
    ctx.out << verdict.str() << "\n";
  }

  const PnPRun run = pnp_fbs(y, *model, denoiser, cfg, &truth);
  ctx.write("report.csv", run_report_csv(run));
  write_pgm(ctx.out_dir / "recon.pgm", run.x);
  ctx.out << "iterations = " << run.iterations << (run.converged ? "" : " (not converged)") << "\n"
          << "psnr = " << format_double(psnr(run.x, truth)) << "\n";
  return kOk;
}

int cmd_audit(Context& ctx) {
  Config& c = ctx.config;
  const std::string path = c.get_string("checkpoint", "");
  std::optional<Network> loaded;
  if (path.empty()) {
    NetworkSpec net;
    net.widths = {1, 10, 10, 10, 1};
    loaded.emplace(read_network_spec(c, net, ctx.seed));
  } else {
    loaded.emplace(load_checkpoint(path));
  }
  const Network& net = *loaded;
  const std::size_t pairs = get_size(c, "audit.pairs", 10000);
  const double scale = c.get_double("audit.scale", 1.0);
  const std::size_t size = get_size(c, "audit.image_size", net.spec().image_size);
  ctx.commit();

  Shape sample_shape{net.spec().widths.front()};
  FrozenNetwork frozen;
  if (net.spec().layer_kind == LayerKind::Conv) {
    sample_shape = {net.spec().widths.front(), size, size};
    frozen = net.freeze(size, size);
  } else {
    frozen = net.freeze();
  }
  const AuditResult r = lipschitz_audit(frozen, sample_shape, pairs, ctx.seed, scale);
  CsvWriter csv({"max_ratio", "pairs"});
  csv.cell(r.max_ratio).cell(r.pairs);
  csv.end_row();
  ctx.write("audit.csv", csv.str());
  ctx.out << "max_ratio = " << format_double(r.max_ratio) << "\n";
  return kOk;
}

int cmd_inspect_spline(Context& ctx) {
  Config& c = ctx.config;
  const Network net = load_checkpoint(c.require_string("checkpoint"));
  const long long layer = c.get_int("layer", 0);
  const long long neuron = c.get_int("neuron", 0);
  ctx.commit();

  if (net.spec().activation.kind != ActivationKind::Lls) throw ConfigError("checkpoint has no spline activations");
  const long long layers = static_cast<long long>(net.spec().depth()) - 1;
  if (layer < 0 || layer >= layers)
    throw ConfigError("layer " + std::to_string(layer) + " out of range [0, " + std::to_string(layers) + ")");
  const auto splines = net.splines(static_cast<std::size_t>(layer));
  if (neuron < 0 || neuron >= static_cast<long long>(splines.size()))
    throw ConfigError("neuron " + std::to_string(neuron) + " out of range [0, " + std::to_string(splines.size()) +
                      ")");
  const Spline& s = splines[static_cast<std::size_t>(neuron)];
  std::ostringstream csv;
  write_spline_csv(csv, s);
  ctx.write("spline.csv", csv.str());
  ctx.out << "tv2 = " << format_double(tv2(s)) << "\n"
          << "aelr = " << format_double(aelr(s)) << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Lipschitz spline networks and stable plug-and-play reconstruction"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "Settings file (key = value lines)")->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--seed", seed, "Run seed (overrides the 'seed' key)");

  std::optional<std::string> certify;
  std::optional<std::string> checkpoint;
  std::optional<long long> layer;
  std::optional<long long> neuron;

  auto* fit1d = app.add_subcommand("fit1d", "Fit a 1-D target function");
  auto* w1 = app.add_subcommand("w1", "Estimate a Wasserstein-1 distance with a trained critic");
  auto* denoise = app.add_subcommand("train-denoiser", "Train a convolutional denoiser");
  auto* pnp = app.add_subcommand("pnp", "Plug-and-play forward-backward reconstruction");
  pnp->add_option("--certify", certify, "Stability certificate")->check(CLI::IsMember({"prop3", "prop4"}));
  auto* audit = app.add_subcommand("audit", "Empirical Lipschitz audit of a network");
  audit->add_option("--checkpoint", checkpoint, "Checkpoint to audit (default: fresh network from net.* keys)");
  auto* inspect = app.add_subcommand("inspect-spline", "Dump one learned spline as CSV");
  inspect->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  inspect->add_option("--layer", layer, "Activation layer index");
  inspect->add_option("--neuron", neuron, "Channel index");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) reversed.pop_back();  // program name
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kConfigError;
  }

  try {
    Config config = config_path.empty() ? Config{} : Config::parse(read_file(config_path), config_path);
    if (seed) config.set("seed", std::to_string(*seed));
    if (certify) config.set("certify", *certify);
    if (checkpoint) config.set("checkpoint", *checkpoint);
    if (layer) config.set("layer", std::to_string(*layer));
    if (neuron) config.set("neuron", std::to_string(*neuron));

    Context ctx{std::move(config), out_dir, out};
    ctx.seed = ctx.config.get_seed("seed", 0);

    if (fit1d->parsed()) return cmd_fit1d(ctx);
    if (w1->parsed()) return cmd_w1(ctx);
    if (denoise->parsed()) return cmd_train_denoiser(ctx);
    if (pnp->parsed()) return cmd_pnp(ctx);
    if (audit->parsed()) return cmd_audit(ctx);
    if (inspect->parsed()) return cmd_inspect_spline(ctx);
    return kConfigError;
  } catch (const CertificateRefused& e) {
    err << "certificate refused: " << e.what() << "\n";
    return kCertificateRefused;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kNumericError;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ShapeError& e) {
    err << "shape error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }
}

int run(int argc, char** argv) {
  return run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}

}  // namespace lipspline::cli
