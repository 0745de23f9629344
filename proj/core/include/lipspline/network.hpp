#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "lipspline/activation.hpp"
#include "lipspline/graph.hpp"
#include "lipspline/tensor.hpp"

namespace lipspline {

enum class LayerKind { Dense, Conv };
enum class Constraint { None, Spectral, Orthonormal };
enum class InitScheme { Kaiming, Orthogonal };

const char* to_string(LayerKind kind);
const char* to_string(Constraint c);
const char* to_string(InitScheme s);
LayerKind parse_layer_kind(const std::string& name);
Constraint parse_constraint(const std::string& name);
InitScheme parse_init_scheme(const std::string& name);

/// Feedforward architecture: widths N_0 ... N_L (channels for conv nets), one
/// activation type between consecutive layers, none after the last.
struct NetworkSpec {
  LayerKind layer_kind = LayerKind::Dense;
  std::vector<std::size_t> widths;
  Constraint constraint = Constraint::Spectral;
  ActivationSpec activation;
  InitScheme init = InitScheme::Kaiming;
  std::size_t kernel_size = 3;
  bool bias = true;
  int bjorck_iters = 20;
  /// Side length of the images the conv power-iteration state is kept for.
  std::size_t image_size = 32;
  std::uint64_t seed = 0;

  std::size_t depth() const noexcept { return widths.empty() ? 0 : widths.size() - 1; }
};

/// Throws ConfigError when the spec cannot describe a network.
void validate(const NetworkSpec& spec);

/// Closed-form parameter count of build_network(spec).
std::size_t parameter_count(const NetworkSpec& spec);

enum class ParamGroup { Weight, SplineScale, SplineCoeffs };
ParamGroup param_group(const std::string& name);

std::string weight_name(std::size_t layer);
std::string bias_name(std::size_t layer);
std::string coeffs_name(std::size_t act);
std::string alpha_name(std::size_t act);
std::string slopes_name(std::size_t act);
std::string reflections_name(std::size_t act);

class FrozenNetwork;

/// Trainable network: raw parameters, persistent power-iteration vectors and
/// the graph construction of the constrained forward pass.
class Network {
 public:
  struct Output {
    Var y;
    Var tv2;  // sum of TV(2) over spline activations; invalid when there are none
  };

  /// Random initialization from spec.seed.
  explicit Network(NetworkSpec spec);

  const NetworkSpec& spec() const noexcept { return spec_; }
  std::map<std::string, Tensor>& parameters() noexcept { return params_; }
  const std::map<std::string, Tensor>& parameters() const noexcept { return params_; }
  const Tensor& parameter(const std::string& name) const;
  void set_parameter(const std::string& name, Tensor value);

  /// Power-iteration vectors (input side) per layer; empty for unconstrained layers.
  const std::vector<Tensor>& power_state() const noexcept { return state_v_; }
  void set_power_state(std::size_t layer, Tensor v);

  /// Warm-started power iterations on dense weights, the exact DFT singular pair
  /// for conv weights; the forward pass then divides by the (differentiable) u^T W v.
  void refresh_constraints(int iters = 1);

  /// Replaces raw spline coefficients by SplineProj(c). The network function is
  /// unchanged; slopes pushed past the clip threshold become trainable again.
  void project_splines();

  /// Records the constrained forward pass for an input batch node
  /// ([B, N_0] dense, [B, C, H, W] conv).
  Output forward(Graph& g, Var x) const;

  /// Grid of the spline activation after layer `act`.
  ops::SplineGrid spline_grid() const noexcept { return grid_; }

  /// Effective (projected) splines of activation layer `act`, one per channel
  /// (or a single one when shared).
  std::vector<Spline> splines(std::size_t act) const;
  double mean_aelr(double threshold = 0.01) const;
  double total_tv2() const;

  /// Inference copy with converged constraints. Conv networks are frozen for
  /// images of the given size.
  FrozenNetwork freeze(std::size_t height = 0, std::size_t width = 0) const;

 private:
  void init_parameters();
  void init_power_state(std::size_t layer, std::size_t height, std::size_t width);
  std::size_t hidden_width(std::size_t act) const { return spec_.widths[act + 1]; }

  NetworkSpec spec_;
  std::map<std::string, Tensor> params_;
  std::vector<Tensor> state_v_;
  std::vector<Tensor> state_u_;
  ops::SplineGrid grid_;
};

/// Inference-only network with effective weights: converged spectral norms,
/// Björck run to convergence, projected splines, clipped slopes, unit reflections.
class FrozenNetwork {
 public:
  struct Layer {
    LayerKind kind = LayerKind::Dense;
    Tensor weight;
    Tensor bias;
    double sigma = 0.0;  // spectral norm of the raw weight, 0 when unconstrained
  };

  FrozenNetwork() = default;
  FrozenNetwork(std::vector<Layer> layers, std::vector<ActivationParams> acts, std::size_t height = 0,
                std::size_t width = 0);

  Tensor apply(const Tensor& x) const;
  const std::vector<Layer>& layers() const noexcept { return layers_; }
  const std::vector<ActivationParams>& activations() const noexcept { return acts_; }
  std::size_t input_width() const;

 private:
  std::vector<Layer> layers_;
  std::vector<ActivationParams> acts_;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
};

/// Dense: W x + b for a single vector or [B, in] batch. Conv: circular conv plus channel bias.
Tensor layer_forward(const FrozenNetwork::Layer& layer, const Tensor& x);

struct AuditResult {
  double max_ratio = 0.0;
  std::size_t pairs = 0;
};

/// Empirical Lipschitz ratio max |f(x1) - f(x2)| / |x1 - x2| over random pairs:
/// half independent N(0, scale^2) draws, half nearby pairs at distance ~1e-3 scale.
/// `f` maps a [B, sample_shape...] batch to a batch.
AuditResult lipschitz_audit(const std::function<Tensor(const Tensor&)>& f, const Shape& sample_shape,
                            std::size_t pairs, std::uint64_t seed, double scale = 1.0, std::size_t batch = 256);

AuditResult lipschitz_audit(const FrozenNetwork& net, const Shape& sample_shape, std::size_t pairs,
                            std::uint64_t seed, double scale = 1.0);

}  // namespace lipspline
