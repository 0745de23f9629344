#include "settings.hpp"

#include "lipspline/error.hpp"

namespace lipspline::cli {

namespace {

std::size_t get_size(Config& config, const std::string& key, std::size_t fallback) {
  const long long v = config.get_int(key, static_cast<long long>(fallback));
  if (v < 0) throw ConfigError("key '" + key + "' must be non-negative");
  return static_cast<std::size_t>(v);
}

}  // namespace

NetworkSpec read_network_spec(Config& config, const NetworkSpec& defaults, std::uint64_t seed) {
  NetworkSpec spec = defaults;
  spec.layer_kind = parse_layer_kind(config.get_string("net.layer", to_string(defaults.layer_kind)));
  spec.widths = config.get_sizes("net.widths", defaults.widths);
  spec.constraint = parse_constraint(config.get_string("net.constraint", to_string(defaults.constraint)));
  spec.init = parse_init_scheme(config.get_string("net.init", to_string(defaults.init)));
  spec.kernel_size = get_size(config, "net.kernel_size", defaults.kernel_size);
  spec.bias = config.get_bool("net.bias", defaults.bias);
  spec.bjorck_iters = static_cast<int>(config.get_int("net.bjorck_iters", defaults.bjorck_iters));
  spec.image_size = get_size(config, "net.image_size", defaults.image_size);

  ActivationSpec& act = spec.activation;
  const ActivationSpec& def = defaults.activation;
  act.kind = parse_activation(config.get_string("net.activation", to_string(def.kind)));
  act.group_size = get_size(config, "net.group_size", def.group_size);
  act.shared = config.get_bool("net.shared", def.shared);
  act.spline_init = parse_spline_init(config.get_string("net.spline_init", to_string(def.spline_init)));
  act.spline_size = get_size(config, "net.spline_size", def.spline_size);
  act.spline_range = config.get_double("net.spline_range", def.spline_range);
  act.leaky_slope = config.get_double("net.leaky_slope", def.leaky_slope);
  act.prelu_init = config.get_double("net.prelu_init", def.prelu_init);

  spec.seed = seed;
  validate(spec);
  return spec;
}

TrainConfig read_train_config(Config& config, const TrainConfig& defaults, std::uint64_t seed) {
  TrainConfig cfg = defaults;
  cfg.eta = config.get_double("train.eta", defaults.eta);
  cfg.alpha_ratio = config.get_double("train.alpha_ratio", defaults.alpha_ratio);
  cfg.coeff_ratio = config.get_double("train.coeff_ratio", defaults.coeff_ratio);
  cfg.batch_size = get_size(config, "train.batch_size", defaults.batch_size);
  cfg.epochs = get_size(config, "train.epochs", defaults.epochs);
  cfg.lambda = config.get_double("train.lambda", defaults.lambda);
  cfg.power_iters = static_cast<int>(config.get_int("train.power_iters", defaults.power_iters));
  cfg.seed = seed;
  validate(cfg);
  return cfg;
}

}  // namespace lipspline::cli
