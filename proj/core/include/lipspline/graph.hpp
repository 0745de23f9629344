#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lipspline/ops.hpp"
#include "lipspline/tensor.hpp"

namespace lipspline {

/// Handle to a node of a Graph.
struct Var {
  std::uint32_t id = UINT32_MAX;
  bool valid() const noexcept { return id != UINT32_MAX; }
};

using Bindings = std::map<std::string, Tensor>;
using Gradients = std::map<std::string, Tensor>;

enum class OpKind : std::uint8_t {
  Input,
  Parameter,
  Constant,
  Add,
  Sub,
  Mul,
  Scale,
  DivScalar,
  MatMul,
  Transpose,
  Reshape,
  Conv2d,
  ChannelBias,
  Abs,
  Max,
  Min,
  Clip,
  GroupSort,
  CumSum,
  Diff,
  BroadcastLast,
  MeanLast,
  Sum,
  Mean,
  L1,
  SqNorm,
  LinearSpline,
  PRelu,
  Householder,
  NormalizeRows,
};

const char* op_name(OpKind kind);

/// Reverse-mode differentiable computation graph.
///
/// Nodes are recorded by the builder methods and evaluated together by
/// evaluate(); gradient() then runs one backward sweep. A graph is meant to be
/// built once per optimisation step: adding nodes after evaluate() invalidates
/// it, and a second gradient() call without a fresh evaluate() is rejected.
///
/// Binary element-wise ops broadcast their second operand when its shape is a
/// trailing suffix of the first operand's shape (a length-1 tensor broadcasts
/// everywhere). Max/Min send the gradient to the first operand on ties.
class Graph {
 public:
  // Leaves
  Var input(const std::string& name);
  /// Differentiable leaf. `initial` is used when evaluate() gets no binding for `name`.
  Var parameter(const std::string& name, Tensor initial = {});
  Var constant(Tensor value);

  // Arithmetic
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double factor);
  /// a / s with s a single-element node.
  Var div_scalar(Var a, Var s);
  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var reshape(Var a, Shape shape);

  // Convolution, [B,Ci,H,W] (*) [Co,Ci,kh,kw], circular boundary
  Var conv2d(Var x, Var kernel);
  /// Adds b[c] along channel axis 1.
  Var channel_bias(Var x, Var bias);

  // Element-wise non-linearities
  Var abs(Var a);
  Var max(Var a, Var b);
  Var min(Var a, Var b);
  Var relu(Var a);
  /// Gradient 0 at |a| = threshold unless `pass_boundary`, which treats the
  /// closed interval as unsaturated.
  Var clip(Var a, double threshold, bool pass_boundary = false);

  // Structured ops along the channel axis or last axis
  Var group_sort(Var a, std::size_t group, bool descending = false);
  Var cumsum(Var a, bool prepend_zero = false);
  Var diff(Var a);
  Var broadcast_last(Var a, std::size_t n);
  Var mean_last(Var a);

  // Reductions to a single-element tensor
  Var sum(Var a);
  Var mean(Var a);
  Var l1(Var a);
  Var sq_norm(Var a);

  // Fused activations
  Var linear_spline(Var x, Var coeffs, Var alpha, ops::SplineGrid grid);
  Var prelu(Var x, Var slopes);
  Var householder(Var x, Var unit_vectors);
  Var normalize_rows(Var a);

  /// Names `v` as an output reported by evaluate().
  void mark_output(const std::string& name, Var v);

  /// Runs the forward pass. Throws ShapeError, ConfigError (unbound input)
  /// or NumericError (non-finite intermediate).
  std::map<std::string, Tensor> evaluate(const Bindings& bindings = {});

  /// d output / d parameter for every parameter leaf. `output` must be a
  /// single-element node of the most recent evaluate().
  Gradients gradient(Var output);

  const Tensor& value(Var v) const;
  double scalar(Var v) const { return value(v).item(); }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Smallest distance of any recorded non-smooth op to its non-differentiable
  /// set (kinks, clip saturation, sort ties), measured in that op's inputs.
  double kink_margin() const;

 private:
  struct Node {
    OpKind kind;
    std::uint32_t in[3] = {UINT32_MAX, UINT32_MAX, UINT32_MAX};
    std::uint8_t arity = 0;
    bool needs_grad = false;
    double real_attr = 0.0;
    long int_attr = 0;
    std::size_t size_attr = 0;
    Shape shape_attr;
    std::string name;
    Tensor value;
    Tensor grad;
    std::vector<std::uint32_t> perm;
  };

  Var push(Node node);
  Var unary(OpKind kind, Var a);
  Var binary(OpKind kind, Var a, Var b);
  const Node& node(Var v) const;
  void forward_node(Node& n, const Bindings& bindings);
  void backward_node(Node& n);
  Tensor& grad_of(std::uint32_t id);

  std::vector<Node> nodes_;
  std::map<std::string, Var> outputs_;
  std::size_t evaluated_size_ = 0;
  bool evaluated_ = false;
  bool backward_done_ = false;
};

}  // namespace lipspline
