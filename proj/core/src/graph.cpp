#include "lipspline/graph.hpp"

#include <cmath>
#include <limits>

#include "lipspline/error.hpp"

namespace lipspline {

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::Input: return "input";
    case OpKind::Parameter: return "parameter";
    case OpKind::Constant: return "constant";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "mul";
    case OpKind::Scale: return "scale";
    case OpKind::DivScalar: return "div_scalar";
    case OpKind::MatMul: return "matmul";
    case OpKind::Transpose: return "transpose";
    case OpKind::Reshape: return "reshape";
    case OpKind::Conv2d: return "conv2d";
    case OpKind::ChannelBias: return "channel_bias";
    case OpKind::Abs: return "abs";
    case OpKind::Max: return "max";
    case OpKind::Min: return "min";
    case OpKind::Clip: return "clip";
    case OpKind::GroupSort: return "group_sort";
    case OpKind::CumSum: return "cumsum";
    case OpKind::Diff: return "diff";
    case OpKind::BroadcastLast: return "broadcast_last";
    case OpKind::MeanLast: return "mean_last";
    case OpKind::Sum: return "sum";
    case OpKind::Mean: return "mean";
    case OpKind::L1: return "l1";
    case OpKind::SqNorm: return "sq_norm";
    case OpKind::LinearSpline: return "linear_spline";
    case OpKind::PRelu: return "prelu";
    case OpKind::Householder: return "householder";
    case OpKind::NormalizeRows: return "normalize_rows";
  }
  return "?";
}

namespace {

void check_broadcast(const Tensor& a, const Tensor& b, OpKind kind) {
  if (b.size() == 1 || a.shape() == b.shape()) return;
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  bool ok = bs.size() <= as.size();
  for (std::size_t i = 0; ok && i < bs.size(); ++i) ok = as[as.size() - bs.size() + i] == bs[i];
  if (!ok) {
    throw ShapeError(std::string(op_name(kind)) + ": cannot broadcast " + shape_string(bs) + " onto " +
                     shape_string(as));
  }
}

inline double sign0(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

// --- construction ------------------------------------------------------------

Var Graph::push(Node n) {
  for (std::uint8_t i = 0; i < n.arity; ++i) {
    if (n.in[i] >= nodes_.size()) throw Error("graph: operand does not belong to this graph");
    n.needs_grad = n.needs_grad || nodes_[n.in[i]].needs_grad;
  }
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Graph::unary(OpKind kind, Var a) {
  Node n;
  n.kind = kind;
  n.in[0] = a.id;
  n.arity = 1;
  return push(std::move(n));
}

Var Graph::binary(OpKind kind, Var a, Var b) {
  Node n;
  n.kind = kind;
  n.in[0] = a.id;
  n.in[1] = b.id;
  n.arity = 2;
  return push(std::move(n));
}

Var Graph::input(const std::string& name) {
  Node n;
  n.kind = OpKind::Input;
  n.name = name;
  return push(std::move(n));
}

Var Graph::parameter(const std::string& name, Tensor initial) {
  Node n;
  n.kind = OpKind::Parameter;
  n.name = name;
  n.needs_grad = true;
  n.value = std::move(initial);
  return push(std::move(n));
}

Var Graph::constant(Tensor value) {
  Node n;
  n.kind = OpKind::Constant;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Graph::add(Var a, Var b) { return binary(OpKind::Add, a, b); }
Var Graph::sub(Var a, Var b) { return binary(OpKind::Sub, a, b); }
Var Graph::mul(Var a, Var b) { return binary(OpKind::Mul, a, b); }

Var Graph::scale(Var a, double factor) {
  Var v = unary(OpKind::Scale, a);
  nodes_[v.id].real_attr = factor;
  return v;
}

Var Graph::div_scalar(Var a, Var s) { return binary(OpKind::DivScalar, a, s); }
Var Graph::matmul(Var a, Var b) { return binary(OpKind::MatMul, a, b); }
Var Graph::transpose(Var a) { return unary(OpKind::Transpose, a); }

Var Graph::reshape(Var a, Shape shape) {
  Var v = unary(OpKind::Reshape, a);
  nodes_[v.id].shape_attr = std::move(shape);
  return v;
}

Var Graph::conv2d(Var x, Var kernel) { return binary(OpKind::Conv2d, x, kernel); }
Var Graph::channel_bias(Var x, Var bias) { return binary(OpKind::ChannelBias, x, bias); }
Var Graph::abs(Var a) { return unary(OpKind::Abs, a); }
Var Graph::max(Var a, Var b) { return binary(OpKind::Max, a, b); }
Var Graph::min(Var a, Var b) { return binary(OpKind::Min, a, b); }
Var Graph::relu(Var a) { return max(a, constant(Tensor::scalar(0.0))); }

Var Graph::clip(Var a, double threshold, bool pass_boundary) {
  if (!(threshold > 0.0)) throw ConfigError("clip threshold must be positive");
  Var v = unary(OpKind::Clip, a);
  nodes_[v.id].real_attr = threshold;
  nodes_[v.id].int_attr = pass_boundary ? 1 : 0;
  return v;
}

Var Graph::group_sort(Var a, std::size_t group, bool descending) {
  Var v = unary(OpKind::GroupSort, a);
  nodes_[v.id].size_attr = group;
  nodes_[v.id].int_attr = descending ? 1 : 0;
  return v;
}

Var Graph::cumsum(Var a, bool prepend_zero) {
  Var v = unary(OpKind::CumSum, a);
  nodes_[v.id].int_attr = prepend_zero ? 1 : 0;
  return v;
}

Var Graph::diff(Var a) { return unary(OpKind::Diff, a); }

Var Graph::broadcast_last(Var a, std::size_t n) {
  Var v = unary(OpKind::BroadcastLast, a);
  nodes_[v.id].size_attr = n;
  return v;
}

Var Graph::mean_last(Var a) { return unary(OpKind::MeanLast, a); }
Var Graph::sum(Var a) { return unary(OpKind::Sum, a); }
Var Graph::mean(Var a) { return unary(OpKind::Mean, a); }
Var Graph::l1(Var a) { return unary(OpKind::L1, a); }
Var Graph::sq_norm(Var a) { return unary(OpKind::SqNorm, a); }

Var Graph::linear_spline(Var x, Var coeffs, Var alpha, ops::SplineGrid grid) {
  Node n;
  n.kind = OpKind::LinearSpline;
  n.in[0] = x.id;
  n.in[1] = coeffs.id;
  n.in[2] = alpha.id;
  n.arity = 3;
  n.real_attr = grid.step;
  n.int_attr = grid.k_min;
  return push(std::move(n));
}

Var Graph::prelu(Var x, Var slopes) { return binary(OpKind::PRelu, x, slopes); }
Var Graph::householder(Var x, Var unit_vectors) { return binary(OpKind::Householder, x, unit_vectors); }
Var Graph::normalize_rows(Var a) { return unary(OpKind::NormalizeRows, a); }

void Graph::mark_output(const std::string& name, Var v) {
  node(v);
  outputs_[name] = v;
}

const Graph::Node& Graph::node(Var v) const {
  if (!v.valid() || v.id >= nodes_.size()) throw Error("graph: invalid node handle");
  return nodes_[v.id];
}

const Tensor& Graph::value(Var v) const {
  const Node& n = node(v);
  if (!evaluated_ || v.id >= evaluated_size_) throw Error("graph: node has not been evaluated");
  return n.value;
}

// --- forward -----------------------------------------------------------------

std::map<std::string, Tensor> Graph::evaluate(const Bindings& bindings) {
  evaluated_ = false;
  backward_done_ = false;
  for (auto& n : nodes_) forward_node(n, bindings);
  evaluated_ = true;
  evaluated_size_ = nodes_.size();
  std::map<std::string, Tensor> out;
  for (const auto& [name, v] : outputs_) out[name] = nodes_[v.id].value;
  return out;
}

void Graph::forward_node(Node& n, const Bindings& bindings) {
  auto in = [&](int i) -> const Tensor& { return nodes_[n.in[i]].value; };
  switch (n.kind) {
    case OpKind::Input: {
      auto it = bindings.find(n.name);
      if (it == bindings.end()) throw ConfigError("graph: unbound input '" + n.name + "'");
      n.value = it->second;
      break;
    }
    case OpKind::Parameter: {
      auto it = bindings.find(n.name);
      if (it != bindings.end()) {
        n.value = it->second;
      } else if (n.value.empty()) {
        throw ConfigError("graph: unbound parameter '" + n.name + "'");
      }
      break;
    }
    case OpKind::Constant:
      break;
    case OpKind::Add:
    case OpKind::Sub:
    case OpKind::Mul:
    case OpKind::Max:
    case OpKind::Min: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      check_broadcast(a, b, n.kind);
      Tensor y(a.shape());
      const std::size_t nb = b.size();
      for (std::size_t j = 0; j < a.size(); ++j) {
        const double av = a[j], bv = b[j % nb];
        switch (n.kind) {
          case OpKind::Add: y[j] = av + bv; break;
          case OpKind::Sub: y[j] = av - bv; break;
          case OpKind::Mul: y[j] = av * bv; break;
          case OpKind::Max: y[j] = av >= bv ? av : bv; break;
          default: y[j] = av <= bv ? av : bv; break;
        }
      }
      n.value = std::move(y);
      break;
    }
    case OpKind::Scale: {
      Tensor y = in(0);
      for (auto& v : y.data()) v *= n.real_attr;
      n.value = std::move(y);
      break;
    }
    case OpKind::DivScalar: {
      const double s = in(1).item();
      Tensor y = in(0);
      for (auto& v : y.data()) v /= s;
      n.value = std::move(y);
      break;
    }
    case OpKind::MatMul: n.value = ops::matmul(in(0), in(1)); break;
    case OpKind::Transpose: n.value = ops::transpose(in(0)); break;
    case OpKind::Reshape: n.value = in(0).reshaped(n.shape_attr); break;
    case OpKind::Conv2d: n.value = ops::conv2d(in(0), in(1)); break;
    case OpKind::ChannelBias: {
      Tensor y = in(0);
      ops::add_channel_bias(y, in(1));
      n.value = std::move(y);
      break;
    }
    case OpKind::Abs: {
      Tensor y = in(0);
      for (auto& v : y.data()) v = std::abs(v);
      n.value = std::move(y);
      break;
    }
    case OpKind::Clip: {
      Tensor y = in(0);
      const double t = n.real_attr;
      for (auto& v : y.data()) v = std::clamp(v, -t, t);
      n.value = std::move(y);
      break;
    }
    case OpKind::GroupSort:
      n.value = ops::group_sort(in(0), n.size_attr, n.int_attr != 0, &n.perm);
      break;
    case OpKind::CumSum: n.value = ops::cumsum_last(in(0), n.int_attr != 0); break;
    case OpKind::Diff: n.value = ops::diff_last(in(0)); break;
    case OpKind::BroadcastLast: {
      const Tensor& a = in(0);
      Shape s = a.shape();
      const std::size_t m = n.size_attr;
      if (m == 0) throw ShapeError("broadcast_last: zero length");
      if (s.size() == 1 && s[0] == 1) s.clear();
      s.push_back(m);
      Tensor y(s);
      for (std::size_t r = 0; r < a.size(); ++r)
        for (std::size_t j = 0; j < m; ++j) y[r * m + j] = a[r];
      n.value = std::move(y);
      break;
    }
    case OpKind::MeanLast: {
      const Tensor& a = in(0);
      const std::size_t m = a.shape().back();
      Shape s(a.shape().begin(), a.shape().end() - 1);
      if (s.empty()) s = {1};
      Tensor y(s);
      for (std::size_t r = 0; r < y.size(); ++r) {
        double acc = 0.0;
        for (std::size_t j = 0; j < m; ++j) acc += a[r * m + j];
        y[r] = acc / static_cast<double>(m);
      }
      n.value = std::move(y);
      break;
    }
    case OpKind::Sum:
    case OpKind::Mean:
    case OpKind::L1:
    case OpKind::SqNorm: {
      const Tensor& a = in(0);
      double acc = 0.0;
      for (double v : a.data()) {
        if (n.kind == OpKind::L1) acc += std::abs(v);
        else if (n.kind == OpKind::SqNorm) acc += v * v;
        else acc += v;
      }
      if (n.kind == OpKind::Mean) acc /= static_cast<double>(a.size());
      n.value = Tensor::scalar(acc);
      break;
    }
    case OpKind::LinearSpline:
      n.value = ops::spline_forward(in(0), in(1), in(2), {n.real_attr, n.int_attr});
      break;
    case OpKind::PRelu: n.value = ops::prelu(in(0), in(1)); break;
    case OpKind::Householder: n.value = ops::householder(in(0), in(1)); break;
    case OpKind::NormalizeRows: {
      const Tensor& a = in(0);
      if (a.rank() != 2) throw ShapeError("normalize_rows expects a matrix");
      const std::size_t r = a.dim(0), c = a.dim(1);
      Tensor y(a.shape());
      for (std::size_t i = 0; i < r; ++i) {
        const double nrm = norm2(a.data().subspan(i * c, c));
        if (nrm == 0.0) throw NumericError("normalize_rows: zero row");
        for (std::size_t j = 0; j < c; ++j) y[i * c + j] = a[i * c + j] / nrm;
      }
      n.value = std::move(y);
      break;
    }
  }
  if (!n.value.all_finite()) {
    throw NumericError(std::string("graph: non-finite value produced by ") + op_name(n.kind) +
                       (n.name.empty() ? "" : " '" + n.name + "'"));
  }
}

// --- backward ----------------------------------------------------------------

Tensor& Graph::grad_of(std::uint32_t id) {
  Node& n = nodes_[id];
  if (n.grad.size() != n.value.size()) n.grad = Tensor(n.value.shape());
  return n.grad;
}

Gradients Graph::gradient(Var output) {
  if (!evaluated_) throw Error("gradient: evaluate() must run first");
  if (evaluated_size_ != nodes_.size()) throw Error("gradient: graph was modified after evaluate()");
  if (backward_done_) throw Error("gradient: one backward pass per forward pass");
  const Node& out = node(output);
  if (out.value.size() != 1) {
    throw ShapeError("gradient: output must be scalar, got " + shape_string(out.value.shape()));
  }
  for (auto& n : nodes_) n.grad = Tensor();
  grad_of(output.id)[0] = 1.0;
  for (std::size_t i = output.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad || n.grad.empty() || n.arity == 0) continue;
    backward_node(n);
  }
  backward_done_ = true;
  Gradients grads;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    Node& n = nodes_[i];
    if (n.kind != OpKind::Parameter) continue;
    if (n.grad.empty()) n.grad = Tensor(n.value.shape());
    auto [it, fresh] = grads.emplace(n.name, n.grad);
    if (!fresh) {
      // the same name bound twice shares one parameter
      for (std::size_t j = 0; j < it->second.size(); ++j) it->second[j] += n.grad[j];
    }
  }
  return grads;
}

void Graph::backward_node(Node& n) {
  const Tensor& g = n.grad;
  auto val = [&](int i) -> const Tensor& { return nodes_[n.in[i]].value; };
  auto wants = [&](int i) { return nodes_[n.in[i]].needs_grad; };

  switch (n.kind) {
    case OpKind::Input:
    case OpKind::Parameter:
    case OpKind::Constant:
      break;
    case OpKind::Add:
    case OpKind::Sub: {
      if (wants(0)) {
        Tensor& ga = grad_of(n.in[0]);
        for (std::size_t j = 0; j < g.size(); ++j) ga[j] += g[j];
      }
      if (wants(1)) {
        Tensor& gb = grad_of(n.in[1]);
        const std::size_t nb = gb.size();
        const double sgn = n.kind == OpKind::Add ? 1.0 : -1.0;
        for (std::size_t j = 0; j < g.size(); ++j) gb[j % nb] += sgn * g[j];
      }
      break;
    }
    case OpKind::Mul: {
      const Tensor& a = val(0);
      const Tensor& b = val(1);
      const std::size_t nb = b.size();
      if (wants(0)) {
        Tensor& ga = grad_of(n.in[0]);
        for (std::size_t j = 0; j < g.size(); ++j) ga[j] += g[j] * b[j % nb];
      }
      if (wants(1)) {
        Tensor& gb = grad_of(n.in[1]);
        for (std::size_t j = 0; j < g.size(); ++j) gb[j % nb] += g[j] * a[j];
      }
      break;
    }
    case OpKind::Max:
    case OpKind::Min: {
      const Tensor& a = val(0);
      const Tensor& b = val(1);
      const std::size_t nb = b.size();
      const bool is_max = n.kind == OpKind::Max;
      Tensor* ga = wants(0) ? &grad_of(n.in[0]) : nullptr;
      Tensor* gb = wants(1) ? &grad_of(n.in[1]) : nullptr;
      for (std::size_t j = 0; j < g.size(); ++j) {
        const bool first = is_max ? a[j] >= b[j % nb] : a[j] <= b[j % nb];
        if (first) {
          if (ga) (*ga)[j] += g[j];
        } else if (gb) {
          (*gb)[j % nb] += g[j];
        }
      }
      break;
    }
    case OpKind::Scale: {
      Tensor& ga = grad_of(n.in[0]);
      for (std::size_t j = 0; j < g.size(); ++j) ga[j] += n.real_attr * g[j];
      break;
    }
    case OpKind::DivScalar: {
      const Tensor& a = val(0);
      const double s = val(1).item();
      if (wants(0)) {
        Tensor& ga = grad_of(n.in[0]);
        for (std::size_t j = 0; j < g.size(); ++j) ga[j] += g[j] / s;
      }
      if (wants(1)) {
        double acc = 0.0;
        for (std::size_t j = 0; j < g.size(); ++j) acc += g[j] * a[j];
        grad_of(n.in[1])[0] -= acc / (s * s);
      }
      break;
    }
    case OpKind::MatMul: {
      const Tensor& a = val(0);
      const Tensor& b = val(1);
      if (a.rank() == 2 && b.rank() == 2) {
        const std::size_t m = a.dim(0), k = a.dim(1), p = b.dim(1);
        if (wants(0)) ops::gemm_nt(m, p, k, g.data().data(), b.data().data(), grad_of(n.in[0]).data().data(), true);
        if (wants(1)) ops::gemm_tn(m, k, p, a.data().data(), g.data().data(), grad_of(n.in[1]).data().data(), true);
      } else if (a.rank() == 2) {
        const std::size_t m = a.dim(0), k = a.dim(1);
        if (wants(0)) {
          Tensor& ga = grad_of(n.in[0]);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < k; ++j) ga[i * k + j] += g[i] * b[j];
        }
        if (wants(1)) ops::gemm_tn(m, k, 1, a.data().data(), g.data().data(), grad_of(n.in[1]).data().data(), true);
      } else {
        const std::size_t k = b.dim(0), p = b.dim(1);
        if (wants(0)) ops::gemm_nt(1, p, k, g.data().data(), b.data().data(), grad_of(n.in[0]).data().data(), true);
        if (wants(1)) {
          Tensor& gb = grad_of(n.in[1]);
          for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < p; ++j) gb[i * p + j] += a[i] * g[j];
        }
      }
      break;
    }
    case OpKind::Transpose: {
      Tensor& ga = grad_of(n.in[0]);
      const std::size_t r = ga.dim(0), c = ga.dim(1);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j * r + i];
      break;
    }
    case OpKind::Reshape: {
      Tensor& ga = grad_of(n.in[0]);
      for (std::size_t j = 0; j < g.size(); ++j) ga[j] += g[j];
      break;
    }
    case OpKind::Conv2d: {
      const Tensor& x = val(0);
      const Tensor& k = val(1);
      if (wants(0)) {
        Tensor gx = ops::conv2d_adjoint(g, k);
        Tensor& dst = grad_of(n.in[0]);
        for (std::size_t j = 0; j < gx.size(); ++j) dst[j] += gx[j];
      }
      if (wants(1)) {
        Tensor gk = ops::conv2d_kernel_grad(x, g, k.dim(2), k.dim(3));
        Tensor& dst = grad_of(n.in[1]);
        for (std::size_t j = 0; j < gk.size(); ++j) dst[j] += gk[j];
      }
      break;
    }
    case OpKind::ChannelBias: {
      if (wants(0)) {
        Tensor& gx = grad_of(n.in[0]);
        for (std::size_t j = 0; j < g.size(); ++j) gx[j] += g[j];
      }
      if (wants(1)) {
        Tensor& gb = grad_of(n.in[1]);
        const auto l = ops::channel_layout(g.shape());
        for (std::size_t o = 0; o < l.outer; ++o)
          for (std::size_t c = 0; c < l.channels; ++c) {
            double acc = 0.0;
            const std::size_t base = (o * l.channels + c) * l.inner;
            for (std::size_t s = 0; s < l.inner; ++s) acc += g[base + s];
            gb[c] += acc;
          }
      }
      break;
    }
    case OpKind::Abs: {
      const Tensor& a = val(0);
      Tensor& ga = grad_of(n.in[0]);
      for (std::size_t j = 0; j < g.size(); ++j) ga[j] += g[j] * sign0(a[j]);
      break;
    }
    case OpKind::Clip: {
      const Tensor& a = val(0);
      Tensor& ga = grad_of(n.in[0]);
      // the closed variant also passes values within rounding of the threshold
      const double limit = n.int_attr != 0 ? n.real_attr * (1.0 + 1e-12) : n.real_attr;
      const bool closed = n.int_attr != 0;
      for (std::size_t j = 0; j < g.size(); ++j) {
        const double m = std::abs(a[j]);
        if (m < n.real_attr || (closed && m <= limit)) ga[j] += g[j];
      }
      break;
    }
    case OpKind::GroupSort: {
      Tensor& ga = grad_of(n.in[0]);
      for (std::size_t j = 0; j < g.size(); ++j) ga[n.perm[j]] += g[j];
      break;
    }
    case OpKind::CumSum: {
      Tensor& ga = grad_of(n.in[0]);
      const std::size_t len = ga.shape().back();
      const std::size_t m = g.shape().back();
      const std::size_t offset = n.int_attr ? 1 : 0;
      const std::size_t rows = ga.size() / len;
      for (std::size_t r = 0; r < rows; ++r) {
        double acc = 0.0;
        for (std::size_t j = len; j-- > 0;) {
          acc += g[r * m + j + offset];
          ga[r * len + j] += acc;
        }
      }
      break;
    }
    case OpKind::Diff: {
      Tensor& ga = grad_of(n.in[0]);
      const std::size_t len = ga.shape().back();
      const std::size_t rows = ga.size() / len;
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j + 1 < len; ++j) {
          const double gv = g[r * (len - 1) + j];
          ga[r * len + j + 1] += gv;
          ga[r * len + j] -= gv;
        }
      break;
    }
    case OpKind::BroadcastLast: {
      Tensor& ga = grad_of(n.in[0]);
      const std::size_t m = n.size_attr;
      for (std::size_t r = 0; r < ga.size(); ++r) {
        double acc = 0.0;
        for (std::size_t j = 0; j < m; ++j) acc += g[r * m + j];
        ga[r] += acc;
      }
      break;
    }
    case OpKind::MeanLast: {
      Tensor& ga = grad_of(n.in[0]);
      const std::size_t m = ga.shape().back();
      for (std::size_t r = 0; r < g.size(); ++r)
        for (std::size_t j = 0; j < m; ++j) ga[r * m + j] += g[r] / static_cast<double>(m);
      break;
    }
    case OpKind::Sum:
    case OpKind::Mean:
    case OpKind::L1:
    case OpKind::SqNorm: {
      const Tensor& a = val(0);
      Tensor& ga = grad_of(n.in[0]);
      const double g0 = g[0];
      for (std::size_t j = 0; j < a.size(); ++j) {
        switch (n.kind) {
          case OpKind::Sum: ga[j] += g0; break;
          case OpKind::Mean: ga[j] += g0 / static_cast<double>(a.size()); break;
          case OpKind::L1: ga[j] += g0 * sign0(a[j]); break;
          default: ga[j] += 2.0 * a[j] * g0; break;
        }
      }
      break;
    }
    case OpKind::LinearSpline: {
      Tensor* gx = wants(0) ? &grad_of(n.in[0]) : nullptr;
      Tensor* gc = wants(1) ? &grad_of(n.in[1]) : nullptr;
      Tensor* ga = wants(2) ? &grad_of(n.in[2]) : nullptr;
      ops::spline_backward(val(0), val(1), val(2), {n.real_attr, n.int_attr}, g, gx, gc, ga);
      break;
    }
    case OpKind::PRelu: {
      const Tensor& x = val(0);
      const Tensor& a = val(1);
      const auto l = ops::channel_layout(x.shape());
      Tensor* gx = wants(0) ? &grad_of(n.in[0]) : nullptr;
      Tensor* ga = wants(1) ? &grad_of(n.in[1]) : nullptr;
      for (std::size_t o = 0; o < l.outer; ++o)
        for (std::size_t c = 0; c < l.channels; ++c) {
          const std::size_t base = (o * l.channels + c) * l.inner;
          for (std::size_t s = 0; s < l.inner; ++s) {
            const double xv = x[base + s];
            const double gv = g[base + s];
            // max(a x, x): the first operand wins ties
            const bool first = a[c] * xv >= xv;
            if (gx) (*gx)[base + s] += first ? gv * a[c] : gv;
            if (ga && first) (*ga)[c] += gv * xv;
          }
        }
      break;
    }
    case OpKind::Householder: {
      const Tensor& x = val(0);
      const Tensor& v = val(1);
      const auto l = ops::channel_layout(x.shape());
      Tensor* gx = wants(0) ? &grad_of(n.in[0]) : nullptr;
      Tensor* gv = wants(1) ? &grad_of(n.in[1]) : nullptr;
      for (std::size_t o = 0; o < l.outer; ++o)
        for (std::size_t p = 0; p < l.channels / 2; ++p) {
          const double v0 = v[2 * p], v1 = v[2 * p + 1];
          const std::size_t b0 = (o * l.channels + 2 * p) * l.inner;
          const std::size_t b1 = b0 + l.inner;
          for (std::size_t s = 0; s < l.inner; ++s) {
            const double x0 = x[b0 + s], x1 = x[b1 + s];
            const double g0 = g[b0 + s], g1 = g[b1 + s];
            const double proj = v0 * x0 + v1 * x1;
            if (proj > 0.0) {
              if (gx) {
                (*gx)[b0 + s] += g0;
                (*gx)[b1 + s] += g1;
              }
              continue;
            }
            const double gdv = g0 * v0 + g1 * v1;
            if (gx) {
              (*gx)[b0 + s] += g0 - 2.0 * gdv * v0;
              (*gx)[b1 + s] += g1 - 2.0 * gdv * v1;
            }
            if (gv) {
              (*gv)[2 * p] += -2.0 * (x0 * gdv + proj * g0);
              (*gv)[2 * p + 1] += -2.0 * (x1 * gdv + proj * g1);
            }
          }
        }
      break;
    }
    case OpKind::NormalizeRows: {
      const Tensor& a = val(0);
      const Tensor& y = n.value;
      Tensor& ga = grad_of(n.in[0]);
      const std::size_t r = a.dim(0), c = a.dim(1);
      for (std::size_t i = 0; i < r; ++i) {
        const double nrm = norm2(a.data().subspan(i * c, c));
        double yg = 0.0;
        for (std::size_t j = 0; j < c; ++j) yg += y[i * c + j] * g[i * c + j];
        for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += (g[i * c + j] - y[i * c + j] * yg) / nrm;
      }
      break;
    }
  }
}

// --- diagnostics ---------------------------------------------------------------

double Graph::kink_margin() const {
  if (!evaluated_) throw Error("kink_margin: evaluate() must run first");
  double margin = std::numeric_limits<double>::infinity();
  for (const auto& n : nodes_) {
    auto val = [&](int i) -> const Tensor& { return nodes_[n.in[i]].value; };
    switch (n.kind) {
      case OpKind::Abs:
        for (double v : val(0).data()) margin = std::min(margin, std::abs(v));
        break;
      case OpKind::Max:
      case OpKind::Min: {
        const Tensor& a = val(0);
        const Tensor& b = val(1);
        for (std::size_t j = 0; j < a.size(); ++j) margin = std::min(margin, std::abs(a[j] - b[j % b.size()]));
        break;
      }
      case OpKind::Clip:
        for (double v : val(0).data()) margin = std::min(margin, std::abs(std::abs(v) - n.real_attr));
        break;
      case OpKind::GroupSort: {
        const Tensor& a = val(0);
        const auto l = ops::channel_layout(a.shape());
        const std::size_t k = n.size_attr;
        for (std::size_t o = 0; o < l.outer; ++o)
          for (std::size_t g0 = 0; g0 < l.channels; g0 += k)
            for (std::size_t s = 0; s < l.inner; ++s)
              for (std::size_t i = 0; i < k; ++i)
                for (std::size_t j = i + 1; j < k; ++j) {
                  const double xi = a[(o * l.channels + g0 + i) * l.inner + s];
                  const double xj = a[(o * l.channels + g0 + j) * l.inner + s];
                  margin = std::min(margin, std::abs(xi - xj));
                }
        break;
      }
      case OpKind::LinearSpline:
        margin = std::min(margin, ops::spline_kink_margin(val(0), val(1), val(2), {n.real_attr, n.int_attr}));
        break;
      case OpKind::PRelu:
        for (double v : val(0).data()) margin = std::min(margin, std::abs(v));
        break;
      case OpKind::Householder: {
        const Tensor& x = val(0);
        const Tensor& v = val(1);
        const auto l = ops::channel_layout(x.shape());
        for (std::size_t o = 0; o < l.outer; ++o)
          for (std::size_t p = 0; p < l.channels / 2; ++p)
            for (std::size_t s = 0; s < l.inner; ++s) {
              const std::size_t b0 = (o * l.channels + 2 * p) * l.inner + s;
              margin = std::min(margin, std::abs(v[2 * p] * x[b0] + v[2 * p + 1] * x[b0 + l.inner]));
            }
        break;
      }
      default:
        break;
    }
  }
  return margin;
}

}  // namespace lipspline
