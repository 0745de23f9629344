#include "lipspline/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "lipspline/error.hpp"
#include "lipspline/linear.hpp"
#include "lipspline/ops.hpp"
#include "lipspline/spline.hpp"

namespace lipspline {

const char* to_string(LayerKind kind) { return kind == LayerKind::Dense ? "dense" : "conv"; }

const char* to_string(Constraint c) {
  switch (c) {
    case Constraint::None: return "none";
    case Constraint::Spectral: return "spectral";
    case Constraint::Orthonormal: return "orthonormal";
  }
  return "?";
}

const char* to_string(InitScheme s) { return s == InitScheme::Kaiming ? "kaiming" : "orthogonal"; }

LayerKind parse_layer_kind(const std::string& name) {
  if (name == "dense") return LayerKind::Dense;
  if (name == "conv") return LayerKind::Conv;
  throw ConfigError("unknown layer kind '" + name + "'");
}

Constraint parse_constraint(const std::string& name) {
  for (auto c : {Constraint::None, Constraint::Spectral, Constraint::Orthonormal}) {
    if (name == to_string(c)) return c;
  }
  throw ConfigError("unknown constraint '" + name + "'");
}

InitScheme parse_init_scheme(const std::string& name) {
  if (name == "kaiming") return InitScheme::Kaiming;
  if (name == "orthogonal") return InitScheme::Orthogonal;
  throw ConfigError("unknown initialization '" + name + "'");
}

std::string weight_name(std::size_t layer) { return "layer" + std::to_string(layer) + ".weight"; }
std::string bias_name(std::size_t layer) { return "layer" + std::to_string(layer) + ".bias"; }
std::string coeffs_name(std::size_t act) { return "act" + std::to_string(act) + ".coeffs"; }
std::string alpha_name(std::size_t act) { return "act" + std::to_string(act) + ".alpha"; }
std::string slopes_name(std::size_t act) { return "act" + std::to_string(act) + ".prelu"; }
std::string reflections_name(std::size_t act) { return "act" + std::to_string(act) + ".householder"; }

ParamGroup param_group(const std::string& name) {
  auto ends_with = [&](const std::string& suffix) {
    return name.size() >= suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  if (ends_with(".coeffs")) return ParamGroup::SplineCoeffs;
  if (ends_with(".alpha")) return ParamGroup::SplineScale;
  return ParamGroup::Weight;
}

void validate(const NetworkSpec& spec) {
  if (spec.widths.size() < 2) throw ConfigError("network needs at least an input and an output width");
  for (auto w : spec.widths) {
    if (w == 0) throw ConfigError("network widths must be positive");
  }
  if (spec.layer_kind == LayerKind::Conv) {
    if (spec.kernel_size % 2 == 0) throw ConfigError("conv kernel size must be odd");
    if (spec.constraint == Constraint::Orthonormal) {
      throw ConfigError("orthonormal constraint is only available for dense layers");
    }
    if (spec.image_size == 0) throw ConfigError("image_size must be positive");
  }
  if (spec.constraint == Constraint::Orthonormal && spec.bjorck_iters < 1) {
    throw ConfigError("bjorck_iters must be at least 1");
  }
  const auto& a = spec.activation;
  for (std::size_t l = 1; l + 1 < spec.widths.size(); ++l) {
    const std::size_t c = spec.widths[l];
    if (a.kind == ActivationKind::GroupSort && (a.group_size < 2 || c % a.group_size != 0)) {
      throw ConfigError("groupsort group size " + std::to_string(a.group_size) + " does not divide width " +
                        std::to_string(c));
    }
    if (a.kind == ActivationKind::Householder && c % 2 != 0) {
      throw ConfigError("householder activation needs even widths");
    }
  }
  if (a.kind == ActivationKind::PRelu && std::abs(a.prelu_init) > 1.0) {
    throw ConfigError("prelu_init must lie in [-1, 1]");
  }
  if (a.kind == ActivationKind::Lls) {
    // validates size, range and slope
    (void)init_spline(a.spline_init, a.spline_size, a.spline_range, 0, a.leaky_slope);
  }
}

std::size_t parameter_count(const NetworkSpec& spec) {
  validate(spec);
  const std::size_t taps = spec.layer_kind == LayerKind::Conv ? spec.kernel_size * spec.kernel_size : 1;
  std::size_t n = 0;
  for (std::size_t l = 0; l < spec.depth(); ++l) {
    n += spec.widths[l + 1] * spec.widths[l] * taps;
    if (spec.bias) n += spec.widths[l + 1];
  }
  const auto& a = spec.activation;
  for (std::size_t l = 1; l + 1 < spec.widths.size(); ++l) {
    const std::size_t units = a.shared ? 1 : spec.widths[l];
    switch (a.kind) {
      case ActivationKind::Lls: n += units * (a.spline_size + 1); break;
      case ActivationKind::PRelu: n += units; break;
      case ActivationKind::Householder: n += spec.widths[l]; break;
      default: break;
    }
  }
  return n;
}

namespace {

// Rows (or columns, for tall matrices) made orthonormal by modified Gram-Schmidt.
Tensor orthogonal_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  const bool tall = rows > cols;
  const std::size_t n = tall ? cols : rows;  // vectors to orthonormalize
  const std::size_t d = tall ? rows : cols;  // their length
  std::normal_distribution<double> normal;
  std::vector<double> q(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    double nrm = 0.0;
    do {
      for (std::size_t j = 0; j < d; ++j) q[i * d + j] = normal(rng);
      for (std::size_t p = 0; p < i; ++p) {
        double proj = 0.0;
        for (std::size_t j = 0; j < d; ++j) proj += q[p * d + j] * q[i * d + j];
        for (std::size_t j = 0; j < d; ++j) q[i * d + j] -= proj * q[p * d + j];
      }
      nrm = 0.0;
      for (std::size_t j = 0; j < d; ++j) nrm += q[i * d + j] * q[i * d + j];
      nrm = std::sqrt(nrm);
    } while (nrm < 1e-8);
    for (std::size_t j = 0; j < d; ++j) q[i * d + j] /= nrm;
  }
  Tensor w({rows, cols});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      if (tall) w.at(j, i) = q[i * d + j];
      else w.at(i, j) = q[i * d + j];
    }
  return w;
}

Tensor ones(Shape shape) { return Tensor(std::move(shape), 1.0); }

}  // namespace

Network::Network(NetworkSpec spec) : spec_(std::move(spec)) {
  validate(spec_);
  if (spec_.activation.kind == ActivationKind::Lls) {
    const Spline s = init_spline(SplineInit::Identity, spec_.activation.spline_size, spec_.activation.spline_range);
    grid_ = s.grid();
  }
  init_parameters();
  state_v_.resize(spec_.depth());
  state_u_.resize(spec_.depth());
  for (std::size_t l = 0; l < spec_.depth(); ++l) init_power_state(l, spec_.image_size, spec_.image_size);
  refresh_constraints(1);
}

void Network::init_parameters() {
  std::mt19937_64 rng(spec_.seed);
  const std::size_t k = spec_.kernel_size;
  for (std::size_t l = 0; l < spec_.depth(); ++l) {
    const std::size_t in = spec_.widths[l], out = spec_.widths[l + 1];
    Tensor w;
    if (spec_.layer_kind == LayerKind::Dense) {
      if (spec_.init == InitScheme::Orthogonal) {
        w = orthogonal_matrix(out, in, rng);
      } else {
        w = Tensor({out, in});
        std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(in)));
        for (auto& e : w.data()) e = normal(rng);
      }
    } else {
      w = Tensor({out, in, k, k});
      if (spec_.init == InitScheme::Orthogonal) {
        const Tensor centre = orthogonal_matrix(out, in, rng);
        for (std::size_t o = 0; o < out; ++o)
          for (std::size_t i = 0; i < in; ++i) w[((o * in + i) * k + k / 2) * k + k / 2] = centre.at(o, i);
      } else {
        std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(in * k * k)));
        for (auto& e : w.data()) e = normal(rng);
      }
    }
    params_[weight_name(l)] = std::move(w);
    if (spec_.bias) params_[bias_name(l)] = Tensor({out});
  }

  const auto& a = spec_.activation;
  for (std::size_t act = 0; act + 1 < spec_.depth(); ++act) {
    const std::size_t c = hidden_width(act);
    const std::size_t units = a.shared ? 1 : c;
    switch (a.kind) {
      case ActivationKind::Lls: {
        Tensor coeffs({units, a.spline_size});
        for (std::size_t n = 0; n < units; ++n) {
          const Spline s = init_spline(a.spline_init, a.spline_size, a.spline_range, n, a.leaky_slope);
          std::copy(s.coeffs.begin(), s.coeffs.end(), coeffs.data().begin() + static_cast<long>(n * a.spline_size));
        }
        params_[coeffs_name(act)] = std::move(coeffs);
        params_[alpha_name(act)] = ones({units});
        break;
      }
      case ActivationKind::PRelu:
        params_[slopes_name(act)] = Tensor({units}, a.prelu_init);
        break;
      case ActivationKind::Householder: {
        Tensor v({c / 2, 2});
        for (std::size_t p = 0; p < c / 2; ++p) {
          v[2 * p] = 1.0 / std::sqrt(2.0);
          v[2 * p + 1] = -1.0 / std::sqrt(2.0);
        }
        params_[reflections_name(act)] = std::move(v);
        break;
      }
      default:
        break;
    }
  }
}

void Network::init_power_state(std::size_t layer, std::size_t height, std::size_t width) {
  if (spec_.constraint == Constraint::None) {
    state_v_[layer] = Tensor();
    state_u_[layer] = Tensor();
    return;
  }
  std::mt19937_64 rng(spec_.seed ^ (0x9e3779b97f4a7c15ULL * (layer + 1)));
  const std::size_t in = spec_.widths[layer];
  const Shape shape = spec_.layer_kind == LayerKind::Dense ? Shape{in} : Shape{1, in, height, width};
  state_v_[layer] = random_unit(shape, rng);
}

const Tensor& Network::parameter(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("network has no parameter '" + name + "'");
  return it->second;
}

void Network::set_parameter(const std::string& name, Tensor value) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("network has no parameter '" + name + "'");
  if (it->second.shape() != value.shape()) {
    throw ShapeError("parameter '" + name + "' expects shape " + shape_string(it->second.shape()) + ", got " +
                     shape_string(value.shape()));
  }
  it->second = std::move(value);
}

void Network::set_power_state(std::size_t layer, Tensor v) {
  if (layer >= state_v_.size()) throw ConfigError("power state layer out of range");
  if (spec_.constraint == Constraint::None) return;
  const Tensor& w = params_.at(weight_name(layer));
  Tensor u;
  if (spec_.layer_kind == LayerKind::Dense) {
    if (v.shape() != Shape{spec_.widths[layer]}) throw ShapeError("power state has the wrong shape");
    u = DenseOperator(w).apply(v);
  } else {
    if (v.rank() != 4 || v.dim(1) != spec_.widths[layer]) throw ShapeError("power state has the wrong shape");
    u = ConvOperator(w, v.dim(2), v.dim(3)).apply(v);
  }
  const double sigma = norm2(u.data());
  if (sigma > 0.0) {
    for (auto& e : u.data()) e /= sigma;
  } else {
    u = Tensor();
  }
  state_v_[layer] = std::move(v);
  state_u_[layer] = std::move(u);
}

void Network::refresh_constraints(int iters) {
  if (spec_.constraint == Constraint::None) return;
  for (std::size_t l = 0; l < spec_.depth(); ++l) {
    const Tensor& w = params_.at(weight_name(l));
    PowerIteration r;
    if (spec_.layer_kind == LayerKind::Dense) {
      r = power_iteration(DenseOperator(w), iters, state_v_[l]);
    } else {
      const Shape& s = state_v_[l].shape();
      auto top = conv_top_singular(w, s[2], s[3]);
      r.sigma = top.sigma;
      r.u = ConvOperator(w, s[2], s[3]).apply(top.v);
      if (r.sigma > 0.0) {
        for (auto& e : r.u.data()) e /= r.sigma;
      }
      r.v = std::move(top.v);
    }
    if (r.sigma > 0.0) {
      state_v_[l] = std::move(r.v);
      state_u_[l] = std::move(r.u);
    } else {
      state_u_[l] = Tensor();
    }
  }
}

Network::Output Network::forward(Graph& g, Var x) const {
  Output out;
  const std::size_t depth = spec_.depth();
  const auto& a = spec_.activation;
  Var h = x;
  for (std::size_t l = 0; l < depth; ++l) {
    Var w = g.parameter(weight_name(l), params_.at(weight_name(l)));
    if (spec_.constraint != Constraint::None && !state_u_[l].empty()) {
      const Var v = g.constant(state_v_[l]);
      const Var wv = spec_.layer_kind == LayerKind::Dense ? g.matmul(w, v) : g.conv2d(v, w);
      const Var sigma = g.sum(g.mul(wv, g.constant(state_u_[l].reshaped(state_u_[l].shape()))));
      if (spec_.constraint == Constraint::Spectral) {
        w = g.div_scalar(w, g.max(sigma, g.constant(Tensor::scalar(1.0))));
      } else {
        w = g.div_scalar(w, sigma);
        const bool tall = spec_.widths[l + 1] >= spec_.widths[l];
        for (int k = 0; k < spec_.bjorck_iters; ++k) {
          const Var wt = g.transpose(w);
          const Var cubic = tall ? g.matmul(w, g.matmul(wt, w)) : g.matmul(g.matmul(w, wt), w);
          w = g.sub(g.scale(w, 1.5), g.scale(cubic, 0.5));
        }
      }
    }
    if (spec_.layer_kind == LayerKind::Dense) {
      h = g.matmul(h, g.transpose(w));
      if (spec_.bias) h = g.add(h, g.parameter(bias_name(l), params_.at(bias_name(l))));
    } else {
      h = g.conv2d(h, w);
      if (spec_.bias) h = g.channel_bias(h, g.parameter(bias_name(l), params_.at(bias_name(l))));
    }
    if (l + 1 == depth) break;

    const std::size_t c = hidden_width(l);
    switch (a.kind) {
      case ActivationKind::Identity:
        break;
      case ActivationKind::Lls: {
        const Var raw = g.parameter(coeffs_name(l), params_.at(coeffs_name(l)));
        Var coeffs = spline_proj(g, raw, grid_.step, a.spline_size);
        Var alpha = g.parameter(alpha_name(l), params_.at(alpha_name(l)));
        const Var reg = tv2(g, coeffs, grid_.step);
        out.tv2 = out.tv2.valid() ? g.add(out.tv2, reg) : reg;
        if (a.shared) {
          coeffs = g.matmul(g.constant(ones({c, 1})), coeffs);
          alpha = g.mul(g.constant(ones({c})), alpha);
        }
        h = g.linear_spline(h, coeffs, alpha, grid_);
        break;
      }
      case ActivationKind::Relu:
        h = g.relu(h);
        break;
      case ActivationKind::AbsoluteValue:
        h = g.abs(h);
        break;
      case ActivationKind::PRelu: {
        Var slopes = g.clip(g.parameter(slopes_name(l), params_.at(slopes_name(l))), 1.0);
        if (a.shared) slopes = g.mul(g.constant(ones({c})), slopes);
        h = g.prelu(h, slopes);
        break;
      }
      case ActivationKind::GroupSort:
        h = g.group_sort(h, a.group_size, sorts_descending(a.group_size));
        break;
      case ActivationKind::Householder:
        h = g.householder(h, g.normalize_rows(g.parameter(reflections_name(l), params_.at(reflections_name(l)))));
        break;
    }
  }
  out.y = h;
  return out;
}

std::vector<Spline> Network::splines(std::size_t act) const {
  if (spec_.activation.kind != ActivationKind::Lls) return {};
  if (act + 1 >= spec_.depth()) throw ConfigError("activation layer " + std::to_string(act) + " out of range");
  const Tensor& raw = params_.at(coeffs_name(act));
  const Tensor& alpha = params_.at(alpha_name(act));
  const std::size_t k = raw.dim(1);
  std::vector<Spline> out;
  for (std::size_t n = 0; n < raw.dim(0); ++n) {
    Spline s;
    s.coeffs = spline_proj(raw.data().subspan(n * k, k), grid_.step);
    s.step = grid_.step;
    s.k_min = grid_.k_min;
    s.alpha = alpha[n];
    out.push_back(std::move(s));
  }
  return out;
}

void Network::project_splines() {
  if (spec_.activation.kind != ActivationKind::Lls) return;
  for (std::size_t act = 0; act + 1 < spec_.depth(); ++act) {
    Tensor& raw = params_.at(coeffs_name(act));
    const std::size_t k = raw.dim(1);
    for (std::size_t n = 0; n < raw.dim(0); ++n) {
      const auto row = raw.data().subspan(n * k, k);
      const auto proj = spline_proj(row, grid_.step);
      std::copy(proj.begin(), proj.end(), row.begin());
    }
  }
}

double Network::mean_aelr(double threshold) const {
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t act = 0; act + 1 < spec_.depth(); ++act) {
    for (const auto& s : splines(act)) {
      acc += aelr(s, threshold);
      ++n;
    }
  }
  return n == 0 ? 0.0 : acc / static_cast<double>(n);
}

double Network::total_tv2() const {
  double acc = 0.0;
  for (std::size_t act = 0; act + 1 < spec_.depth(); ++act) {
    for (const auto& s : splines(act)) acc += tv2(s);
  }
  return acc;
}

FrozenNetwork Network::freeze(std::size_t height, std::size_t width) const {
  if (spec_.layer_kind == LayerKind::Conv) {
    if (height == 0) height = spec_.image_size;
    if (width == 0) width = height;
  }
  std::vector<FrozenNetwork::Layer> layers;
  for (std::size_t l = 0; l < spec_.depth(); ++l) {
    FrozenNetwork::Layer layer;
    layer.kind = spec_.layer_kind;
    layer.weight = params_.at(weight_name(l));
    if (spec_.bias) layer.bias = params_.at(bias_name(l));
    if (spec_.constraint != Constraint::None) {
      const double sigma = spec_.layer_kind == LayerKind::Dense ? dense_spectral_norm(layer.weight)
                                                                : conv_spectral_norm(layer.weight, height, width);
      layer.sigma = sigma;
      if (spec_.constraint == Constraint::Spectral) {
        layer.weight = spectral_normalize(layer.weight, sigma);
      } else if (sigma > 0.0) {
        Tensor w = layer.weight;
        for (auto& e : w.data()) e /= sigma;
        layer.weight = bjorck_to_convergence(w);
      }
    }
    layers.push_back(std::move(layer));
  }

  std::vector<ActivationParams> acts;
  const auto& a = spec_.activation;
  for (std::size_t act = 0; act + 1 < spec_.depth(); ++act) {
    const std::size_t c = hidden_width(act);
    ActivationParams p;
    p.kind = a.kind;
    p.group_size = a.group_size;
    switch (a.kind) {
      case ActivationKind::Lls: {
        const auto sp = splines(act);
        const std::size_t k = a.spline_size;
        p.coeffs = Tensor({c, k});
        p.alpha = Tensor({c});
        for (std::size_t n = 0; n < c; ++n) {
          const Spline& s = sp[a.shared ? 0 : n];
          std::copy(s.coeffs.begin(), s.coeffs.end(), p.coeffs.data().begin() + static_cast<long>(n * k));
          p.alpha[n] = s.alpha;
        }
        p.grid = grid_;
        break;
      }
      case ActivationKind::PRelu: {
        const Tensor& raw = params_.at(slopes_name(act));
        p.slopes = Tensor({c});
        for (std::size_t n = 0; n < c; ++n) p.slopes[n] = clip(raw[a.shared ? 0 : n], 1.0);
        break;
      }
      case ActivationKind::Householder: {
        Tensor v = params_.at(reflections_name(act));
        for (std::size_t r = 0; r < c / 2; ++r) {
          const double n = std::hypot(v[2 * r], v[2 * r + 1]);
          if (n == 0.0) throw NumericError("householder reflection vector collapsed to zero");
          v[2 * r] /= n;
          v[2 * r + 1] /= n;
        }
        p.reflections = std::move(v);
        break;
      }
      default:
        break;
    }
    acts.push_back(std::move(p));
  }
  return FrozenNetwork(std::move(layers), std::move(acts), height, width);
}

FrozenNetwork::FrozenNetwork(std::vector<Layer> layers, std::vector<ActivationParams> acts, std::size_t height,
                             std::size_t width)
    : layers_(std::move(layers)), acts_(std::move(acts)), height_(height), width_(width) {
  if (layers_.empty()) throw ConfigError("frozen network needs at least one layer");
  if (acts_.size() + 1 != layers_.size()) throw ConfigError("frozen network needs one activation between layers");
}

std::size_t FrozenNetwork::input_width() const {
  const Tensor& w = layers_.front().weight;
  return w.dim(1);
}

Tensor layer_forward(const FrozenNetwork::Layer& layer, const Tensor& x) {
  if (layer.kind == LayerKind::Dense) {
    if (x.rank() == 1) {
      Tensor y = ops::matmul(layer.weight, x);
      if (!layer.bias.empty()) {
        if (layer.bias.size() != y.size()) throw ShapeError("dense: bias length mismatch");
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += layer.bias[i];
      }
      return y;
    }
    return ops::dense_forward(x, layer.weight, layer.bias);
  }
  Tensor y = ops::conv2d(x, layer.weight);
  if (!layer.bias.empty()) ops::add_channel_bias(y, layer.bias);
  return y;
}

Tensor FrozenNetwork::apply(const Tensor& x) const {
  if (layers_.front().kind == LayerKind::Conv && height_ != 0) {
    if (x.rank() != 4 || x.dim(2) != height_ || x.dim(3) != width_) {
      throw ShapeError("frozen conv network expects " + std::to_string(height_) + "x" + std::to_string(width_) +
                       " images, got " + shape_string(x.shape()));
    }
  }
  Tensor h = layer_forward(layers_[0], x);
  for (std::size_t l = 1; l < layers_.size(); ++l) {
    h = apply_activation(acts_[l - 1], h);
    h = layer_forward(layers_[l], h);
  }
  if (!h.all_finite()) throw NumericError("network produced a non-finite output");
  return h;
}

AuditResult lipschitz_audit(const std::function<Tensor(const Tensor&)>& f, const Shape& sample_shape,
                            std::size_t pairs, std::uint64_t seed, double scale, std::size_t batch) {
  if (pairs == 0) throw ConfigError("lipschitz_audit: at least one pair required");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  const std::size_t n = shape_size(sample_shape);
  AuditResult result;
  std::size_t done = 0;
  while (done < pairs) {
    const std::size_t b = std::min(batch, pairs - done);
    Shape shape{b};
    shape.insert(shape.end(), sample_shape.begin(), sample_shape.end());
    Tensor x1(shape), x2(shape);
    for (std::size_t p = 0; p < b; ++p) {
      const bool near = (done + p) % 2 == 1;
      for (std::size_t i = 0; i < n; ++i) x1[p * n + i] = scale * normal(rng);
      if (near) {
        double len = 0.0;
        std::vector<double> dir(n);
        for (auto& d : dir) {
          d = normal(rng);
          len += d * d;
        }
        len = std::sqrt(len);
        for (std::size_t i = 0; i < n; ++i) x2[p * n + i] = x1[p * n + i] + 1e-3 * scale * dir[i] / len;
      } else {
        for (std::size_t i = 0; i < n; ++i) x2[p * n + i] = scale * normal(rng);
      }
    }
    const Tensor y1 = f(x1);
    const Tensor y2 = f(x2);
    const std::size_t m = y1.size() / b;
    for (std::size_t p = 0; p < b; ++p) {
      double dx = 0.0, dy = 0.0;
      for (std::size_t i = 0; i < n; ++i) dx += (x1[p * n + i] - x2[p * n + i]) * (x1[p * n + i] - x2[p * n + i]);
      for (std::size_t i = 0; i < m; ++i) dy += (y1[p * m + i] - y2[p * m + i]) * (y1[p * m + i] - y2[p * m + i]);
      if (dx > 0.0) result.max_ratio = std::max(result.max_ratio, std::sqrt(dy / dx));
    }
    done += b;
  }
  result.pairs = pairs;
  return result;
}

AuditResult lipschitz_audit(const FrozenNetwork& net, const Shape& sample_shape, std::size_t pairs,
                            std::uint64_t seed, double scale) {
  return lipschitz_audit([&](const Tensor& x) { return net.apply(x); }, sample_shape, pairs, seed, scale);
}

}  // namespace lipspline
