#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "garnn/tensor.hpp"

namespace garnn::ad {

/// Primitive kinds recorded on the tape.
///
/// Shape contracts (violations are rejected with the offending shapes named):
///   matmul      [m x k]*[k x n] -> [m x n]; [m x k]*[k] -> [m]; [k]*[k] -> scalar
///   add/sub/mul elementwise, identical shapes
///   add_rowvec  [m x n] + [n], the vector broadcast over rows
///   scale       alpha * x (attr)
///   concat      1-D concatenation of the flattened inputs
///   mean        arithmetic mean of all entries -> scalar
///   square      elementwise x^2
///   sum_squares sum of squared entries -> scalar
///   sigmoid / tanh / relu / leaky_relu(alpha)  elementwise
///   softmax     row-wise normalized exponentials (a vector is one row),
///               computed with max subtraction; rows sum to 1
///   outer_add   [m] (+) [n] -> [m x n] with cell (i,j) = u_i + w_j
///   pair_sum    [N x A], [N x A] -> [(N*N) x A], row n*N+j = q_n + k_j
///   row_scale   [m x n] with row i multiplied by x_i, x in [m]
///   transpose   [m x n] -> [n x m]
///   reshape     same data, new shape of equal element count
///
/// leaky_relu uses slope 1 for x > 0 and alpha for x <= 0 (the subgradient
/// at exactly 0 is the negative-side slope). relu is the alpha = 0 case.
enum class Op : std::uint8_t {
  leaf,
  constant,
  matmul,
  add,
  add_rowvec,
  sub,
  mul,
  scale,
  concat,
  mean,
  square,
  sum_squares,
  sigmoid,
  tanh,
  relu,
  leaky_relu,
  softmax,
  outer_add,
  pair_sum,
  row_scale,
  transpose,
  reshape,
};

const char* op_name(Op op);

using ValueId = std::int32_t;

/// Gradient of a scalar output with respect to every trainable leaf,
/// indexed by the dense parameter id supplied at registration.
class GradientMap {
 public:
  GradientMap() = default;

  std::size_t size() const { return grads_.size(); }
  const std::vector<double>& data(std::size_t param_id) const;
  Tensor tensor(std::size_t param_id) const;

  /// this += weight * other (shapes must agree entrywise).
  void axpy(double weight, const GradientMap& other);
  /// this[i] += weight * params[i] — the lambda*theta term of an L2 loss.
  void axpy_params(double weight, std::span<const Tensor> params);
  void scale(double factor);

  static GradientMap zeros_like(std::span<const Tensor> params);

 private:
  friend class Tape;
  std::vector<std::vector<std::size_t>> shapes_;
  std::vector<std::vector<double>> grads_;
};

/// Define-by-run record of primitive applications. Built fresh per forward
/// pass; confined to one thread while recording and during backward().
/// Node values are cached Tensors, so reading intermediate results is free.
class Tape {
 public:
  /// Trainable leaf. Ids must be dense 0..P-1 across the tape; registering
  /// the same id twice accumulates both gradient contributions.
  ValueId param(const Tensor& value, int param_id);
  ValueId constant(const Tensor& value);
  ValueId constant_scalar(double value);

  ValueId matmul(ValueId a, ValueId b);
  ValueId add(ValueId a, ValueId b);
  ValueId add_rowvec(ValueId m, ValueId v);
  ValueId sub(ValueId a, ValueId b);
  ValueId mul(ValueId a, ValueId b);
  ValueId scale(ValueId a, double factor);
  ValueId concat(std::span<const ValueId> parts);
  ValueId mean(ValueId a);
  ValueId square(ValueId a);
  ValueId sum_squares(ValueId a);
  ValueId sigmoid(ValueId a);
  ValueId tanh(ValueId a);
  ValueId relu(ValueId a);
  ValueId leaky_relu(ValueId a, double alpha);
  ValueId softmax(ValueId a);
  ValueId outer_add(ValueId u, ValueId w);
  ValueId pair_sum(ValueId q, ValueId k);
  ValueId row_scale(ValueId m, ValueId x);
  ValueId transpose(ValueId a);
  ValueId reshape(ValueId a, std::vector<std::size_t> shape);

  /// Generic primitive application: validates the shape contract, computes
  /// the value (rejecting non-finite results), records the node. The named
  /// methods above are thin wrappers.
  ValueId apply(Op op, std::span<const ValueId> inputs, double attr = 0.0,
                std::vector<std::size_t> reshape_to = {});

  const Tensor& value(ValueId id) const;
  std::size_t size() const { return nodes_.size(); }
  int param_count() const { return n_params_; }
  void reserve(std::size_t nodes) { nodes_.reserve(nodes); }

  /// Reverse topological sweep from a scalar output; rejects non-scalar
  /// outputs. Returns one gradient per registered parameter.
  GradientMap backward(ValueId output) const;

 private:
  struct Node {
    Op op;
    ValueId a = -1;
    ValueId b = -1;
    double attr = 0.0;
    std::int32_t vararg_offset = -1;
    std::int32_t vararg_count = 0;
    std::int32_t param_id = -1;
    Tensor value;
  };

  ValueId push(Node node);
  const Node& node(ValueId id) const;

  std::vector<Node> nodes_;
  std::vector<ValueId> varargs_;
  int n_params_ = 0;
};

}  // namespace garnn::ad
