#include "garnn/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "garnn/error.hpp"

namespace garnn::ad {

namespace {

// out = M (rows x cols) * x. Four fixed-order accumulators so the
// reduction vectorizes under strict fp semantics; still deterministic.
void matvec(const double* m, std::size_t rows, std::size_t cols,
            const double* x, double* out) {
  const std::size_t tail = cols - cols % 4;
  for (std::size_t i = 0; i < rows; ++i) {
    const double* row = m + i * cols;
    double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
    for (std::size_t j = 0; j < tail; j += 4) {
      a0 += row[j] * x[j];
      a1 += row[j + 1] * x[j + 1];
      a2 += row[j + 2] * x[j + 2];
      a3 += row[j + 3] * x[j + 3];
    }
    double acc = (a0 + a1) + (a2 + a3);
    for (std::size_t j = tail; j < cols; ++j) acc += row[j] * x[j];
    out[i] = acc;
  }
}

// out = A (m x k) * B (k x n)
void matmul2(const double* a, std::size_t m, std::size_t k, const double* b,
             std::size_t n, double* out) {
  std::fill(out, out + m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* orow = out + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
}

double leaky(double x, double alpha) { return x > 0.0 ? x : alpha * x; }
double leaky_slope(double x, double alpha) { return x > 0.0 ? 1.0 : alpha; }

void softmax_row(const double* in, std::size_t n, double* out) {
  double mx = in[0];
  for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, in[j]);
  double sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    out[j] = std::exp(in[j] - mx);
    sum += out[j];
  }
  const double inv = 1.0 / sum;
  for (std::size_t j = 0; j < n; ++j) out[j] *= inv;
}

[[noreturn]] void shape_error(Op op, const std::string& detail) {
  fail(ErrorCode::shape_mismatch,
       std::string(op_name(op)) + ": " + detail);
}

void require(bool ok, Op op, const Tensor& a, const Tensor& b,
             const char* expected) {
  if (!ok) {
    shape_error(op, std::string("got ") + a.shape_str() + " and " +
                        b.shape_str() + ", expected " + expected);
  }
}

}  // namespace

const char* op_name(Op op) {
  switch (op) {
    case Op::leaf: return "leaf";
    case Op::constant: return "constant";
    case Op::matmul: return "matmul";
    case Op::add: return "add";
    case Op::add_rowvec: return "add_rowvec";
    case Op::sub: return "sub";
    case Op::mul: return "mul";
    case Op::scale: return "scale";
    case Op::concat: return "concat";
    case Op::mean: return "mean";
    case Op::square: return "square";
    case Op::sum_squares: return "sum_squares";
    case Op::sigmoid: return "sigmoid";
    case Op::tanh: return "tanh";
    case Op::relu: return "relu";
    case Op::leaky_relu: return "leaky_relu";
    case Op::softmax: return "softmax";
    case Op::outer_add: return "outer_add";
    case Op::pair_sum: return "pair_sum";
    case Op::row_scale: return "row_scale";
    case Op::transpose: return "transpose";
    case Op::reshape: return "reshape";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// GradientMap
// ---------------------------------------------------------------------------

const std::vector<double>& GradientMap::data(std::size_t param_id) const {
  if (param_id >= grads_.size()) {
    fail(ErrorCode::invalid_argument,
         "gradient map has " + std::to_string(grads_.size()) +
             " entries, asked for id " + std::to_string(param_id));
  }
  return grads_[param_id];
}

Tensor GradientMap::tensor(std::size_t param_id) const {
  return Tensor(shapes_[param_id], data(param_id));
}

void GradientMap::axpy(double weight, const GradientMap& other) {
  if (other.grads_.size() != grads_.size()) {
    fail(ErrorCode::invalid_argument, "gradient map size mismatch in axpy");
  }
  for (std::size_t p = 0; p < grads_.size(); ++p) {
    auto& dst = grads_[p];
    const auto& src = other.grads_[p];
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += weight * src[i];
  }
}

void GradientMap::axpy_params(double weight, std::span<const Tensor> params) {
  if (params.size() != grads_.size()) {
    fail(ErrorCode::invalid_argument, "parameter count mismatch in axpy_params");
  }
  for (std::size_t p = 0; p < grads_.size(); ++p) {
    auto& dst = grads_[p];
    const auto src = params[p].data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += weight * src[i];
  }
}

void GradientMap::scale(double factor) {
  for (auto& g : grads_) {
    for (double& v : g) v *= factor;
  }
}

GradientMap GradientMap::zeros_like(std::span<const Tensor> params) {
  GradientMap out;
  out.shapes_.reserve(params.size());
  out.grads_.reserve(params.size());
  for (const auto& p : params) {
    out.shapes_.push_back(p.shape());
    out.grads_.emplace_back(p.size(), 0.0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tape: recording
// ---------------------------------------------------------------------------

ValueId Tape::push(Node node) {
  if (!node.value.all_finite()) {
    fail(ErrorCode::non_finite,
         std::string(op_name(node.op)) + " produced a non-finite value");
  }
  nodes_.push_back(std::move(node));
  return static_cast<ValueId>(nodes_.size() - 1);
}

const Tape::Node& Tape::node(ValueId id) const { return nodes_[static_cast<std::size_t>(id)]; }

const Tensor& Tape::value(ValueId id) const { return node(id).value; }

ValueId Tape::param(const Tensor& value, int param_id) {
  if (param_id < 0) {
    fail(ErrorCode::invalid_argument, "parameter id must be non-negative");
  }
  Node n;
  n.op = Op::leaf;
  n.param_id = param_id;
  n.value = value;
  n_params_ = std::max(n_params_, param_id + 1);
  return push(std::move(n));
}

ValueId Tape::constant(const Tensor& value) {
  Node n;
  n.op = Op::constant;
  n.value = value;
  return push(std::move(n));
}

ValueId Tape::constant_scalar(double value) {
  return constant(Tensor::scalar(value));
}

ValueId Tape::matmul(ValueId a, ValueId b) { return apply(Op::matmul, {{a, b}}); }
ValueId Tape::add(ValueId a, ValueId b) { return apply(Op::add, {{a, b}}); }
ValueId Tape::add_rowvec(ValueId m, ValueId v) { return apply(Op::add_rowvec, {{m, v}}); }
ValueId Tape::sub(ValueId a, ValueId b) { return apply(Op::sub, {{a, b}}); }
ValueId Tape::mul(ValueId a, ValueId b) { return apply(Op::mul, {{a, b}}); }
ValueId Tape::scale(ValueId a, double factor) { return apply(Op::scale, {{a}}, factor); }
ValueId Tape::concat(std::span<const ValueId> parts) { return apply(Op::concat, parts); }
ValueId Tape::mean(ValueId a) { return apply(Op::mean, {{a}}); }
ValueId Tape::square(ValueId a) { return apply(Op::square, {{a}}); }
ValueId Tape::sum_squares(ValueId a) { return apply(Op::sum_squares, {{a}}); }
ValueId Tape::sigmoid(ValueId a) { return apply(Op::sigmoid, {{a}}); }
ValueId Tape::tanh(ValueId a) { return apply(Op::tanh, {{a}}); }
ValueId Tape::relu(ValueId a) { return apply(Op::relu, {{a}}); }
ValueId Tape::leaky_relu(ValueId a, double alpha) { return apply(Op::leaky_relu, {{a}}, alpha); }
ValueId Tape::softmax(ValueId a) { return apply(Op::softmax, {{a}}); }
ValueId Tape::outer_add(ValueId u, ValueId w) { return apply(Op::outer_add, {{u, w}}); }
ValueId Tape::pair_sum(ValueId q, ValueId k) { return apply(Op::pair_sum, {{q, k}}); }
ValueId Tape::row_scale(ValueId m, ValueId x) { return apply(Op::row_scale, {{m, x}}); }
ValueId Tape::transpose(ValueId a) { return apply(Op::transpose, {{a}}); }

ValueId Tape::reshape(ValueId a, std::vector<std::size_t> shape) {
  return apply(Op::reshape, {{a}}, 0.0, std::move(shape));
}

ValueId Tape::apply(Op op, std::span<const ValueId> inputs, double attr,
                    std::vector<std::size_t> reshape_to) {
  const auto arity_is = [&](std::size_t n) {
    if (inputs.size() != n) {
      shape_error(op, "expected " + std::to_string(n) + " inputs, got " +
                          std::to_string(inputs.size()));
    }
  };
  for (ValueId id : inputs) {
    if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
      fail(ErrorCode::invalid_argument, "tape input id out of range");
    }
  }

  Node n;
  n.op = op;
  if (!inputs.empty()) n.a = inputs[0];
  if (inputs.size() > 1) n.b = inputs[1];
  n.attr = attr;

  switch (op) {
    case Op::leaf:
    case Op::constant:
      fail(ErrorCode::invalid_argument, "leaves are registered, not applied");

    case Op::matmul: {
      arity_is(2);
      const Tensor& a = value(inputs[0]);
      const Tensor& b = value(inputs[1]);
      if (a.rank() == 2 && b.rank() == 2) {
        require(a.shape()[1] == b.shape()[0], op, a, b, "[m x k] and [k x n]");
        std::vector<double> out(a.shape()[0] * b.shape()[1]);
        matmul2(a.data().data(), a.shape()[0], a.shape()[1], b.data().data(),
                b.shape()[1], out.data());
        n.value = Tensor::matrix(a.shape()[0], b.shape()[1], std::move(out));
      } else if (a.rank() == 2 && b.rank() == 1) {
        require(a.shape()[1] == b.shape()[0], op, a, b, "[m x k] and [k]");
        std::vector<double> out(a.shape()[0]);
        matvec(a.data().data(), a.shape()[0], a.shape()[1], b.data().data(),
               out.data());
        n.value = Tensor::vector(std::move(out));
      } else if (a.rank() == 1 && b.rank() == 1) {
        require(a.size() == b.size(), op, a, b, "[k] and [k]");
        double acc = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
        n.value = Tensor::scalar(acc);
      } else {
        require(false, op, a, b, "rank-2/rank-1 combinations");
      }
      break;
    }

    case Op::add:
    case Op::sub:
    case Op::mul: {
      arity_is(2);
      const Tensor& a = value(inputs[0]);
      const Tensor& b = value(inputs[1]);
      require(a.same_shape(b), op, a, b, "identical shapes");
      std::vector<double> out(a.size());
      const auto pa = a.data();
      const auto pb = b.data();
      for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = op == Op::add   ? pa[i] + pb[i]
                 : op == Op::sub ? pa[i] - pb[i]
                                 : pa[i] * pb[i];
      }
      n.value = Tensor(a.shape(), std::move(out));
      break;
    }

    case Op::add_rowvec: {
      arity_is(2);
      const Tensor& m = value(inputs[0]);
      const Tensor& v = value(inputs[1]);
      require(m.rank() == 2 && v.rank() == 1 && m.shape()[1] == v.size(), op,
              m, v, "[m x n] and [n]");
      std::vector<double> out(m.size());
      const auto pm = m.data();
      const auto pv = v.data();
      const std::size_t cols = m.shape()[1];
      for (std::size_t i = 0; i < m.shape()[0]; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
          out[i * cols + j] = pm[i * cols + j] + pv[j];
        }
      }
      n.value = Tensor(m.shape(), std::move(out));
      break;
    }

    case Op::scale: {
      arity_is(1);
      const Tensor& a = value(inputs[0]);
      std::vector<double> out(a.size());
      const auto pa = a.data();
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = attr * pa[i];
      n.value = Tensor(a.shape(), std::move(out));
      break;
    }

    case Op::concat: {
      if (inputs.empty()) shape_error(op, "needs at least one input");
      std::vector<double> out;
      for (ValueId id : inputs) {
        const auto d = value(id).data();
        out.insert(out.end(), d.begin(), d.end());
      }
      n.vararg_offset = static_cast<std::int32_t>(varargs_.size());
      n.vararg_count = static_cast<std::int32_t>(inputs.size());
      varargs_.insert(varargs_.end(), inputs.begin(), inputs.end());
      n.value = Tensor::vector(std::move(out));
      break;
    }

    case Op::mean: {
      arity_is(1);
      const Tensor& a = value(inputs[0]);
      double acc = 0.0;
      for (double v : a.data()) acc += v;
      n.value = Tensor::scalar(acc / static_cast<double>(a.size()));
      break;
    }

    case Op::sum_squares: {
      arity_is(1);
      const Tensor& a = value(inputs[0]);
      double acc = 0.0;
      for (double v : a.data()) acc += v * v;
      n.value = Tensor::scalar(acc);
      break;
    }

    case Op::square:
    case Op::sigmoid:
    case Op::tanh:
    case Op::relu:
    case Op::leaky_relu: {
      arity_is(1);
      if (op == Op::leaky_relu && (attr < 0.0 || attr > 1.0)) {
        fail(ErrorCode::invalid_argument,
             "leaky_relu slope must lie in [0, 1], got " + std::to_string(attr));
      }
      const Tensor& a = value(inputs[0]);
      std::vector<double> out(a.size());
      const auto pa = a.data();
      for (std::size_t i = 0; i < out.size(); ++i) {
        const double x = pa[i];
        switch (op) {
          case Op::square: out[i] = x * x; break;
          case Op::sigmoid: out[i] = 1.0 / (1.0 + std::exp(-x)); break;
          case Op::tanh: out[i] = std::tanh(x); break;
          case Op::relu: out[i] = leaky(x, 0.0); break;
          default: out[i] = leaky(x, attr); break;
        }
      }
      n.value = Tensor(a.shape(), std::move(out));
      break;
    }

    case Op::softmax: {
      arity_is(1);
      const Tensor& a = value(inputs[0]);
      if (a.rank() != 1 && a.rank() != 2) {
        shape_error(op, "expected a vector or matrix, got " + a.shape_str());
      }
      const std::size_t rows = a.rows();
      const std::size_t cols = a.cols();
      std::vector<double> out(a.size());
      for (std::size_t i = 0; i < rows; ++i) {
        softmax_row(a.data().data() + i * cols, cols, out.data() + i * cols);
      }
      n.value = Tensor(a.shape(), std::move(out));
      break;
    }

    case Op::outer_add: {
      arity_is(2);
      const Tensor& u = value(inputs[0]);
      const Tensor& w = value(inputs[1]);
      require(u.rank() == 1 && w.rank() == 1, op, u, w, "[m] and [n]");
      std::vector<double> out(u.size() * w.size());
      for (std::size_t i = 0; i < u.size(); ++i) {
        for (std::size_t j = 0; j < w.size(); ++j) {
          out[i * w.size() + j] = u[i] + w[j];
        }
      }
      n.value = Tensor::matrix(u.size(), w.size(), std::move(out));
      break;
    }

    case Op::pair_sum: {
      arity_is(2);
      const Tensor& q = value(inputs[0]);
      const Tensor& k = value(inputs[1]);
      require(q.rank() == 2 && q.same_shape(k), op, q, k,
              "two [N x A] matrices");
      const std::size_t nodes = q.shape()[0];
      const std::size_t dim = q.shape()[1];
      std::vector<double> out(nodes * nodes * dim);
      const auto pq = q.data();
      const auto pk = k.data();
      for (std::size_t r = 0; r < nodes; ++r) {
        for (std::size_t s = 0; s < nodes; ++s) {
          double* row = out.data() + (r * nodes + s) * dim;
          for (std::size_t d = 0; d < dim; ++d) {
            row[d] = pq[r * dim + d] + pk[s * dim + d];
          }
        }
      }
      n.value = Tensor::matrix(nodes * nodes, dim, std::move(out));
      break;
    }

    case Op::row_scale: {
      arity_is(2);
      const Tensor& m = value(inputs[0]);
      const Tensor& x = value(inputs[1]);
      require(m.rank() == 2 && x.rank() == 1 && m.shape()[0] == x.size(), op,
              m, x, "[m x n] and [m]");
      std::vector<double> out(m.size());
      const auto pm = m.data();
      const std::size_t cols = m.shape()[1];
      for (std::size_t i = 0; i < m.shape()[0]; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
          out[i * cols + j] = pm[i * cols + j] * x[i];
        }
      }
      n.value = Tensor(m.shape(), std::move(out));
      break;
    }

    case Op::transpose: {
      arity_is(1);
      const Tensor& a = value(inputs[0]);
      if (a.rank() != 2) {
        shape_error(op, "expected a matrix, got " + a.shape_str());
      }
      const std::size_t m = a.shape()[0], c = a.shape()[1];
      std::vector<double> out(a.size());
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
          out[j * m + i] = a.data()[i * c + j];
        }
      }
      n.value = Tensor::matrix(c, m, std::move(out));
      break;
    }

    case Op::reshape: {
      arity_is(1);
      const Tensor& a = value(inputs[0]);
      if (shape_numel(reshape_to) != a.size()) {
        shape_error(op, "cannot view " + a.shape_str() + " as " +
                            Tensor::shape_str(reshape_to));
      }
      n.value = Tensor(reshape_to, {a.data().begin(), a.data().end()});
      break;
    }
  }

  return push(std::move(n));
}

// ---------------------------------------------------------------------------
// Tape: backward
// ---------------------------------------------------------------------------

GradientMap Tape::backward(ValueId output) const {
  if (output < 0 || static_cast<std::size_t>(output) >= nodes_.size()) {
    fail(ErrorCode::invalid_argument, "backward: output id out of range");
  }
  if (value(output).size() != 1) {
    fail(ErrorCode::invalid_argument,
         "backward requires a scalar output, got shape " +
             value(output).shape_str());
  }

  // Adjoint buffers, allocated lazily on first contribution.
  std::vector<std::vector<double>> adj(nodes_.size());
  const auto bump = [&](ValueId id) -> std::vector<double>& {
    auto& buf = adj[static_cast<std::size_t>(id)];
    if (buf.empty()) buf.assign(value(id).size(), 0.0);
    return buf;
  };

  bump(output)[0] = 1.0;

  for (ValueId id = static_cast<ValueId>(nodes_.size()) - 1; id >= 0; --id) {
    const Node& n = node(id);
    const auto& g = adj[static_cast<std::size_t>(id)];
    if (g.empty()) continue;  // not on a path to the output

    switch (n.op) {
      case Op::leaf:
      case Op::constant:
        break;

      case Op::matmul: {
        const Tensor& a = value(n.a);
        const Tensor& b = value(n.b);
        auto& ga = bump(n.a);
        auto& gb = bump(n.b);
        if (a.rank() == 2 && b.rank() == 2) {
          const std::size_t m = a.shape()[0], k = a.shape()[1], c = b.shape()[1];
          // ga += G * B^T ; gb += A^T * G
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
              double acc = 0.0;
              for (std::size_t j = 0; j < c; ++j) {
                acc += g[i * c + j] * b.data()[p * c + j];
              }
              ga[i * k + p] += acc;
            }
          }
          for (std::size_t p = 0; p < k; ++p) {
            for (std::size_t j = 0; j < c; ++j) {
              double acc = 0.0;
              for (std::size_t i = 0; i < m; ++i) {
                acc += a.data()[i * k + p] * g[i * c + j];
              }
              gb[p * c + j] += acc;
            }
          }
        } else if (a.rank() == 2 && b.rank() == 1) {
          const std::size_t m = a.shape()[0], k = a.shape()[1];
          // ga += outer(g, x) ; gb += A^T g
          for (std::size_t i = 0; i < m; ++i) {
            const double gi = g[i];
            const double* arow = a.data().data() + i * k;
            double* garow = ga.data() + i * k;
            for (std::size_t j = 0; j < k; ++j) {
              garow[j] += gi * b[j];
              gb[j] += gi * arow[j];
            }
          }
        } else {  // dot
          const double gs = g[0];
          for (std::size_t i = 0; i < a.size(); ++i) {
            ga[i] += gs * b[i];
            gb[i] += gs * a[i];
          }
        }
        break;
      }

      case Op::add: {
        auto& ga = bump(n.a);
        auto& gb = bump(n.b);
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] += g[i];
          gb[i] += g[i];
        }
        break;
      }

      case Op::sub: {
        auto& ga = bump(n.a);
        auto& gb = bump(n.b);
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] += g[i];
          gb[i] -= g[i];
        }
        break;
      }

      case Op::mul: {
        const Tensor& a = value(n.a);
        const Tensor& b = value(n.b);
        auto& ga = bump(n.a);
        auto& gb = bump(n.b);
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] += g[i] * b[i];
          gb[i] += g[i] * a[i];
        }
        break;
      }

      case Op::add_rowvec: {
        const Tensor& m = value(n.a);
        auto& gm = bump(n.a);
        auto& gv = bump(n.b);
        const std::size_t cols = m.shape()[1];
        for (std::size_t i = 0; i < m.shape()[0]; ++i) {
          for (std::size_t j = 0; j < cols; ++j) {
            gm[i * cols + j] += g[i * cols + j];
            gv[j] += g[i * cols + j];
          }
        }
        break;
      }

      case Op::scale: {
        auto& ga = bump(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += n.attr * g[i];
        break;
      }

      case Op::concat: {
        std::size_t offset = 0;
        for (std::int32_t p = 0; p < n.vararg_count; ++p) {
          const ValueId part = varargs_[static_cast<std::size_t>(n.vararg_offset) + p];
          auto& gp = bump(part);
          for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[offset + i];
          offset += gp.size();
        }
        break;
      }

      case Op::mean: {
        auto& ga = bump(n.a);
        const double w = g[0] / static_cast<double>(ga.size());
        for (double& v : ga) v += w;
        break;
      }

      case Op::sum_squares: {
        const Tensor& a = value(n.a);
        auto& ga = bump(n.a);
        const double gs = g[0];
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += 2.0 * gs * a[i];
        break;
      }

      case Op::square: {
        const Tensor& a = value(n.a);
        auto& ga = bump(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += 2.0 * g[i] * a[i];
        break;
      }

      case Op::sigmoid: {
        const Tensor& y = n.value;
        auto& ga = bump(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] += g[i] * y[i] * (1.0 - y[i]);
        }
        break;
      }

      case Op::tanh: {
        const Tensor& y = n.value;
        auto& ga = bump(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] += g[i] * (1.0 - y[i] * y[i]);
        }
        break;
      }

      case Op::relu:
      case Op::leaky_relu: {
        const Tensor& a = value(n.a);
        const double alpha = n.op == Op::relu ? 0.0 : n.attr;
        auto& ga = bump(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] += g[i] * leaky_slope(a[i], alpha);
        }
        break;
      }

      case Op::softmax: {
        const Tensor& y = n.value;
        auto& ga = bump(n.a);
        const std::size_t rows = y.rows();
        const std::size_t cols = y.cols();
        for (std::size_t i = 0; i < rows; ++i) {
          const double* yr = y.data().data() + i * cols;
          const double* gr = g.data() + i * cols;
          double dot = 0.0;
          for (std::size_t j = 0; j < cols; ++j) dot += gr[j] * yr[j];
          for (std::size_t j = 0; j < cols; ++j) {
            ga[i * cols + j] += yr[j] * (gr[j] - dot);
          }
        }
        break;
      }

      case Op::outer_add: {
        auto& gu = bump(n.a);
        auto& gw = bump(n.b);
        const std::size_t m = gu.size(), c = gw.size();
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < c; ++j) {
            gu[i] += g[i * c + j];
            gw[j] += g[i * c + j];
          }
        }
        break;
      }

      case Op::pair_sum: {
        const Tensor& q = value(n.a);
        auto& gq = bump(n.a);
        auto& gk = bump(n.b);
        const std::size_t nodes = q.shape()[0];
        const std::size_t dim = q.shape()[1];
        for (std::size_t r = 0; r < nodes; ++r) {
          for (std::size_t s = 0; s < nodes; ++s) {
            const double* row = g.data() + (r * nodes + s) * dim;
            for (std::size_t d = 0; d < dim; ++d) {
              gq[r * dim + d] += row[d];
              gk[s * dim + d] += row[d];
            }
          }
        }
        break;
      }

      case Op::row_scale: {
        const Tensor& m = value(n.a);
        const Tensor& x = value(n.b);
        auto& gm = bump(n.a);
        auto& gx = bump(n.b);
        const std::size_t cols = m.shape()[1];
        for (std::size_t i = 0; i < m.shape()[0]; ++i) {
          double acc = 0.0;
          for (std::size_t j = 0; j < cols; ++j) {
            gm[i * cols + j] += g[i * cols + j] * x[i];
            acc += m.data()[i * cols + j] * g[i * cols + j];
          }
          gx[i] += acc;
        }
        break;
      }

      case Op::transpose: {
        const Tensor& y = n.value;  // c x m
        auto& ga = bump(n.a);
        const std::size_t c = y.shape()[0], m = y.shape()[1];
        for (std::size_t j = 0; j < c; ++j) {
          for (std::size_t i = 0; i < m; ++i) {
            ga[i * c + j] += g[j * m + i];
          }
        }
        break;
      }

      case Op::reshape: {
        auto& ga = bump(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        break;
      }
    }
  }

  // Collect leaf adjoints into the gradient map, one entry per parameter.
  GradientMap out;
  out.shapes_.resize(static_cast<std::size_t>(n_params_));
  out.grads_.resize(static_cast<std::size_t>(n_params_));
  std::vector<bool> seen(static_cast<std::size_t>(n_params_), false);
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    if (n.op != Op::leaf) continue;
    const auto pid = static_cast<std::size_t>(n.param_id);
    auto& slot = out.grads_[pid];
    const auto& buf = adj[i];
    if (!seen[pid]) {
      seen[pid] = true;
      out.shapes_[pid] = n.value.shape();
      slot.assign(n.value.size(), 0.0);
    }
    for (std::size_t j = 0; j < buf.size(); ++j) slot[j] += buf[j];
  }
  for (std::size_t pid = 0; pid < seen.size(); ++pid) {
    if (!seen[pid]) {
      fail(ErrorCode::invalid_argument,
           "parameter ids must be dense: id " + std::to_string(pid) +
               " was never registered");
    }
  }
  return out;
}

}  // namespace garnn::ad
