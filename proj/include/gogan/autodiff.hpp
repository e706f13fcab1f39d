#pragma once

// Tape-based reverse-mode differentiation over dense double tensors.
//
// A Tape owns every value computed in one forward pass. Leaves are either
// constants (never differentiated) or named variables; every recorded op
// whose inputs include a variable is "tracked" and keeps a backward rule.
// backward() walks the tape in reverse and returns one gradient per named
// variable, zero-filled when the loss does not depend on it.

#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <deque>
#include <vector>

#include "gogan/errors.hpp"
#include "gogan/tensor.hpp"

namespace gogan::ad {

class Tape;

class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Backward rule: given input values, the op output and dL/d(output),
// accumulate dL/d(input_k) into *input_grads[k]. Entries are null for
// untracked inputs and must be skipped.
using BackwardFn = std::function<void(std::span<const Tensor* const> inputs, const Tensor& output,
                                      const Tensor& grad_out, std::span<Tensor* const> input_grads)>;

class Gradients {
 public:
  using Map = std::map<std::string, Tensor, std::less<>>;

  bool contains(std::string_view name) const { return grads_.find(name) != grads_.end(); }

  const Tensor* find(std::string_view name) const {
    auto it = grads_.find(name);
    return it == grads_.end() ? nullptr : &it->second;
  }

  const Tensor& at(std::string_view name) const {
    auto it = grads_.find(name);
    if (it == grads_.end()) throw UsageError("no gradient recorded for '" + std::string(name) + "'");
    return it->second;
  }

  void insert(std::string name, Tensor grad) { grads_.insert_or_assign(std::move(name), std::move(grad)); }

  // Entries named "<scope>/<rest>", re-keyed as "<rest>".
  Gradients scoped(std::string_view scope) const {
    Gradients out;
    const std::string prefix = std::string(scope) + "/";
    for (const auto& [name, grad] : grads_) {
      if (name.size() > prefix.size() && name.compare(0, prefix.size(), prefix) == 0) {
        out.insert(name.substr(prefix.size()), grad);
      }
    }
    return out;
  }

  std::size_t size() const { return grads_.size(); }
  bool empty() const { return grads_.empty(); }
  Map::const_iterator begin() const { return grads_.begin(); }
  Map::const_iterator end() const { return grads_.end(); }

 private:
  Map grads_;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value) { return push(std::move(value), {}, nullptr, false, {}, "constant"); }

  Var variable(std::string name, Tensor value) {
    if (name.empty()) throw UsageError("tracked variables need a name");
    if (!names_.insert(name).second) throw UsageError("duplicate variable name '" + name + "' on tape");
    return push(std::move(value), {}, nullptr, true, std::move(name), "variable");
  }

  // Appends an op result. The node is tracked iff any input is tracked;
  // untracked nodes drop their backward rule.
  Var record(Tensor value, std::vector<Var> inputs, BackwardFn backward, const char* op) {
    std::vector<std::size_t> ids;
    ids.reserve(inputs.size());
    bool tracked = false;
    for (const Var& v : inputs) {
      check_owned(v);
      ids.push_back(v.id());
      tracked = tracked || nodes_[v.id()].tracked;
    }
    return push(std::move(value), std::move(ids), tracked ? std::move(backward) : nullptr, tracked, {}, op);
  }

  const Tensor& value(Var v) const {
    check_owned(v);
    return nodes_[v.id()].value;
  }

  bool tracked(Var v) const {
    check_owned(v);
    return nodes_[v.id()].tracked;
  }

  std::size_t size() const { return nodes_.size(); }

  void check_owned(Var v) const {
    if (v.tape() != this || v.id() >= nodes_.size()) throw UsageError("variable does not belong to this tape");
  }

  friend Gradients backward(const Tape& tape, Var loss);

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool tracked = false;
    std::string name;
  };

  Var push(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward, bool tracked, std::string name,
           const char* op) {
    if (!value.all_finite()) {
      throw NumericError(std::string("non-finite value produced by '") + op + "'" +
                         (name.empty() ? std::string() : " for '" + name + "'"));
    }
    nodes_.push_back(Node{std::move(value), std::move(inputs), std::move(backward), tracked, std::move(name)});
    return Var(this, nodes_.size() - 1);
  }

  std::deque<Node> nodes_;  // stable addresses: value() references survive later pushes
  std::unordered_set<std::string> names_;
};

inline const Tensor& Var::value() const {
  if (!tape_) throw UsageError("value() on an unbound variable");
  return tape_->value(*this);
}

inline Gradients backward(const Tape& tape, Var loss) {
  if (loss.tape() != &tape || loss.id() >= tape.nodes_.size()) {
    throw UsageError("loss was not recorded on this tape");
  }
  const auto& nodes = tape.nodes_;
  if (nodes[loss.id()].value.size() != 1) {
    throw UsageError("backward needs a scalar loss, got shape " + shape_string(nodes[loss.id()].value.shape()));
  }

  std::vector<Tensor> grads(loss.id() + 1);
  std::vector<bool> has_grad(loss.id() + 1, false);
  if (nodes[loss.id()].tracked) {
    grads[loss.id()] = Tensor(nodes[loss.id()].value.shape(), 1.0);
    has_grad[loss.id()] = true;
  }

  std::vector<const Tensor*> in_values;
  std::vector<Tensor*> in_grads;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    const auto& node = nodes[id];
    if (!has_grad[id] || !node.backward) continue;
    in_values.clear();
    in_grads.clear();
    for (std::size_t in : node.inputs) {
      in_values.push_back(&nodes[in].value);
      if (nodes[in].tracked) {
        if (!has_grad[in]) {
          grads[in] = Tensor(nodes[in].value.shape(), 0.0);
          has_grad[in] = true;
        }
        in_grads.push_back(&grads[in]);
      } else {
        in_grads.push_back(nullptr);
      }
    }
    node.backward(in_values, node.value, grads[id], in_grads);
  }

  Gradients out;
  for (std::size_t id = 0; id < nodes.size(); ++id) {
    const auto& node = nodes[id];
    if (node.name.empty()) continue;
    if (id <= loss.id() && has_grad[id]) {
      out.insert(node.name, std::move(grads[id]));
    } else {
      out.insert(node.name, Tensor(node.value.shape(), 0.0));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Operations

inline void require_same_tape(Var a, Var b) {
  if (!a.valid() || a.tape() != b.tape()) throw UsageError("operands live on different tapes");
}

inline Var matmul(Var a, Var b) {
  require_same_tape(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.rank() != 2 || B.rank() != 2 || A.cols() != B.rows()) {
    throw DimensionError("matmul shape mismatch: " + shape_string(A.shape()) + " x " + shape_string(B.shape()));
  }
  const std::size_t n = A.rows(), k = A.cols(), m = B.cols();
  Tensor C({n, m}, 0.0);
  {
    const double* pa = A.data().data();
    const double* pb = B.data().data();
    double* pc = C.data().data();
    for (std::size_t i = 0; i < n; ++i) {
      double* crow = pc + i * m;
      for (std::size_t p = 0; p < k; ++p) {
        const double aip = pa[i * k + p];
        if (aip == 0.0) continue;
        const double* brow = pb + p * m;
        for (std::size_t j = 0; j < m; ++j) crow[j] += aip * brow[j];
      }
    }
  }
  return a.tape()->record(
      std::move(C), {a, b},
      [](std::span<const Tensor* const> in, const Tensor&, const Tensor& g, std::span<Tensor* const> out) {
        const Tensor& A = *in[0];
        const Tensor& B = *in[1];
        const std::size_t n = A.rows(), k = A.cols(), m = B.cols();
        const double* pa = A.data().data();
        const double* pb = B.data().data();
        const double* pg = g.data().data();
        if (Tensor* dA = out[0]) {
          // dA = G * B^T
          double* pda = dA->data().data();
          for (std::size_t i = 0; i < n; ++i) {
            const double* grow = pg + i * m;
            for (std::size_t p = 0; p < k; ++p) {
              const double* brow = pb + p * m;
              double acc = 0.0;
              for (std::size_t j = 0; j < m; ++j) acc += grow[j] * brow[j];
              pda[i * k + p] += acc;
            }
          }
        }
        if (Tensor* dB = out[1]) {
          // dB = A^T * G
          double* pdb = dB->data().data();
          for (std::size_t i = 0; i < n; ++i) {
            const double* grow = pg + i * m;
            for (std::size_t p = 0; p < k; ++p) {
              const double aip = pa[i * k + p];
              if (aip == 0.0) continue;
              double* drow = pdb + p * m;
              for (std::size_t j = 0; j < m; ++j) drow[j] += aip * grow[j];
            }
          }
        }
      },
      "matmul");
}

enum class EwOp { add, sub, mul };

inline const char* ew_name(EwOp op) {
  switch (op) {
    case EwOp::add: return "add";
    case EwOp::sub: return "sub";
    case EwOp::mul: return "mul";
  }
  return "ew";
}

// Elementwise binary op. b must match a's shape or be a rank-0 scalar.
inline Var ew(EwOp op, Var a, Var b) {
  require_same_tape(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  const bool broadcast = B.is_scalar() && !A.is_scalar();
  if (!broadcast && A.shape() != B.shape()) {
    throw DimensionError(std::string(ew_name(op)) + " shape mismatch: " + shape_string(A.shape()) + " vs " +
                         shape_string(B.shape()));
  }
  Tensor C(A.shape());
  for (std::size_t i = 0; i < A.size(); ++i) {
    const double bv = broadcast ? B[0] : B[i];
    switch (op) {
      case EwOp::add: C[i] = A[i] + bv; break;
      case EwOp::sub: C[i] = A[i] - bv; break;
      case EwOp::mul: C[i] = A[i] * bv; break;
    }
  }
  return a.tape()->record(
      std::move(C), {a, b},
      [op, broadcast](std::span<const Tensor* const> in, const Tensor&, const Tensor& g,
                      std::span<Tensor* const> out) {
        const Tensor& A = *in[0];
        const Tensor& B = *in[1];
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double bv = broadcast ? B[0] : B[i];
          double da = 0.0, db = 0.0;
          switch (op) {
            case EwOp::add: da = g[i]; db = g[i]; break;
            case EwOp::sub: da = g[i]; db = -g[i]; break;
            case EwOp::mul: da = g[i] * bv; db = g[i] * A[i]; break;
          }
          if (out[0]) (*out[0])[i] += da;
          if (out[1]) (*out[1])[broadcast ? 0 : i] += db;
        }
      },
      ew_name(op));
}

inline Var operator+(Var a, Var b) { return ew(EwOp::add, a, b); }
inline Var operator-(Var a, Var b) { return ew(EwOp::sub, a, b); }
inline Var operator*(Var a, Var b) { return ew(EwOp::mul, a, b); }
inline Var operator+(Var a, double s) { return ew(EwOp::add, a, a.tape()->constant(Tensor::scalar(s))); }
inline Var operator-(Var a, double s) { return ew(EwOp::sub, a, a.tape()->constant(Tensor::scalar(s))); }
inline Var operator*(Var a, double s) { return ew(EwOp::mul, a, a.tape()->constant(Tensor::scalar(s))); }
inline Var operator-(Var a) { return a * -1.0; }
inline Var operator-(double s, Var a) { return (-a) + s; }

// Shared helper for elementwise unary ops with a pointwise derivative.
template <class F, class DF>
Var unary(Var x, const char* op, F f, DF df) {
  const Tensor& X = x.value();
  Tensor Y(X.shape());
  for (std::size_t i = 0; i < X.size(); ++i) Y[i] = f(X[i]);
  return x.tape()->record(
      std::move(Y), {x},
      [df](std::span<const Tensor* const> in, const Tensor& y, const Tensor& g, std::span<Tensor* const> out) {
        if (!out[0]) return;
        const Tensor& X = *in[0];
        for (std::size_t i = 0; i < g.size(); ++i) (*out[0])[i] += g[i] * df(X[i], y[i]);
      },
      op);
}

struct Activation {
  enum class Kind { leaky_relu, tanh };
  Kind kind = Kind::leaky_relu;
  double slope = 0.2;

  static Activation leaky(double slope = 0.2) { return {Kind::leaky_relu, slope}; }
  static Activation hyperbolic_tangent() { return {Kind::tanh, 0.0}; }
};

inline Var activation(Activation act, Var x) {
  if (act.kind == Activation::Kind::tanh) {
    return unary(
        x, "tanh", [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
  }
  const double s = act.slope;
  if (!(s > 0.0 && s < 1.0)) throw DomainError("leaky_relu slope must lie in (0, 1)");
  return unary(
      x, "leaky_relu", [s](double v) { return v > 0.0 ? v : s * v; },
      [s](double v, double) { return v > 0.0 ? 1.0 : s; });
}

inline Var leaky_relu(Var x, double slope = 0.2) { return activation(Activation::leaky(slope), x); }
inline Var tanh(Var x) { return activation(Activation::hyperbolic_tangent(), x); }

// max(0, x); the subgradient at exactly 0 is 0.
inline Var hinge(Var x) {
  return unary(
      x, "hinge", [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

// |x|; the subgradient at exactly 0 is 0.
inline Var abs(Var x) {
  return unary(
      x, "abs", [](double v) { return std::abs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

inline Var sum(Var x) {
  const Tensor& X = x.value();
  double s = 0.0;
  for (double v : X.data()) s += v;
  return x.tape()->record(
      Tensor::scalar(s), {x},
      [](std::span<const Tensor* const>, const Tensor&, const Tensor& g, std::span<Tensor* const> out) {
        if (!out[0]) return;
        for (double& d : out[0]->data()) d += g[0];
      },
      "sum");
}

inline Var mean(Var x) {
  const Tensor& X = x.value();
  if (X.empty()) throw DomainError("mean of an empty tensor");
  double s = 0.0;
  for (double v : X.data()) s += v;
  const double m = static_cast<double>(X.size());
  return x.tape()->record(
      Tensor::scalar(s / m), {x},
      [m](std::span<const Tensor* const>, const Tensor&, const Tensor& g, std::span<Tensor* const> out) {
        if (!out[0]) return;
        const double share = g[0] / m;
        for (double& d : out[0]->data()) d += share;
      },
      "mean");
}

// Per-row sum of a rank-2 tensor: (r x c) -> (r x 1).
inline Var row_sum(Var x) {
  const Tensor& X = x.value();
  const std::size_t r = X.rows(), c = X.cols();
  Tensor Y({r, 1}, 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) Y[i] += X.at(i, j);
  }
  return x.tape()->record(
      std::move(Y), {x},
      [](std::span<const Tensor* const> in, const Tensor&, const Tensor& g, std::span<Tensor* const> out) {
        if (!out[0]) return;
        const std::size_t r = in[0]->rows(), c = in[0]->cols();
        for (std::size_t i = 0; i < r; ++i) {
          for (std::size_t j = 0; j < c; ++j) out[0]->at(i, j) += g[i];
        }
      },
      "row_sum");
}

}  // namespace gogan::ad
