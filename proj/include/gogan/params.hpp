#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "gogan/autodiff.hpp"
#include "gogan/errors.hpp"
#include "gogan/tensor.hpp"

namespace gogan {

struct Param {
  std::string name;
  Tensor value;
  Tensor accumulator;  // RMSprop running mean of squared gradients
};

// Named parameters in insertion order. Insertion order is the checkpoint
// order, so it must not depend on hashing.
class ParamSet {
 public:
  void add(std::string name, Tensor value) {
    if (index_.count(name)) throw UsageError("duplicate parameter name '" + name + "'");
    index_.emplace(name, params_.size());
    Tensor acc(value.shape(), 0.0);
    params_.push_back(Param{std::move(name), std::move(value), std::move(acc)});
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  Param& at(const std::string& name) { return params_[lookup(name)]; }
  const Param& at(const std::string& name) const { return params_[lookup(name)]; }

  Param& operator[](std::size_t i) { return params_[i]; }
  const Param& operator[](std::size_t i) const { return params_[i]; }

  std::size_t size() const { return params_.size(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

  double max_abs() const {
    double m = 0.0;
    for (const auto& p : params_) m = std::max(m, p.value.max_abs());
    return m;
  }

  void reset_accumulators() {
    for (auto& p : params_) p.accumulator = Tensor(p.value.shape(), 0.0);
  }

  // Bitwise equality of values (accumulators excluded).
  bool same_values(const ParamSet& other) const {
    if (other.size() != size()) return false;
    for (std::size_t i = 0; i < size(); ++i) {
      if (params_[i].name != other.params_[i].name || !(params_[i].value == other.params_[i].value)) return false;
    }
    return true;
  }

 private:
  std::size_t lookup(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw UsageError("unknown parameter '" + name + "'");
    return it->second;
  }

  std::vector<Param> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Parameters placed on a tape, in ParamSet order.
struct BoundParams {
  std::vector<ad::Var> vars;
  const ad::Var& operator[](std::size_t i) const { return vars[i]; }
};

// Tracked binding: each parameter becomes a variable named "<scope>/<name>".
inline BoundParams bind_tracked(ad::Tape& tape, const ParamSet& params, const std::string& scope) {
  BoundParams out;
  out.vars.reserve(params.size());
  for (const auto& p : params) out.vars.push_back(tape.variable(scope + "/" + p.name, p.value));
  return out;
}

// Frozen binding: parameters enter the tape as constants and never receive gradients.
inline BoundParams bind_frozen(ad::Tape& tape, const ParamSet& params) {
  BoundParams out;
  out.vars.reserve(params.size());
  for (const auto& p : params) out.vars.push_back(tape.constant(p.value));
  return out;
}

struct RmsPropOptions {
  double lr = 5e-5;
  double decay = 0.9;
  double eps_guard = 1e-8;
};

// acc <- decay*acc + (1-decay)*g^2 ;  p <- p - lr*g/sqrt(acc + eps_guard).
// Parameters without an entry in `grads` are treated as having zero gradient.
inline void rmsprop_step(ParamSet& params, const ad::Gradients& grads, const RmsPropOptions& opt) {
  if (!(opt.lr > 0.0)) throw ConfigError("rmsprop learning rate must be positive");
  if (!(opt.decay > 0.0 && opt.decay < 1.0)) throw ConfigError("rmsprop decay must lie in (0, 1)");
  if (!(opt.eps_guard >= 0.0)) throw ConfigError("rmsprop eps_guard must be nonnegative");
  for (const auto& [name, g] : grads) {
    if (!params.contains(name)) throw UsageError("gradient for unknown parameter '" + name + "'");
    if (g.shape() != params.at(name).value.shape()) {
      throw UsageError("gradient shape " + shape_string(g.shape()) + " does not match parameter '" + name + "'");
    }
  }
  for (auto& p : params) {
    const Tensor* g = grads.find(p.name);
    auto acc = p.accumulator.data();
    auto val = p.value.data();
    for (std::size_t i = 0; i < val.size(); ++i) {
      const double gi = g ? (*g)[i] : 0.0;
      acc[i] = opt.decay * acc[i] + (1.0 - opt.decay) * gi * gi;
      if (gi != 0.0) val[i] -= opt.lr * gi / std::sqrt(acc[i] + opt.eps_guard);
    }
  }
}

// Clamp every entry into [-c, c].
inline void clip_weights(ParamSet& params, double c) {
  if (!(c > 0.0)) throw ConfigError("clipping constant must be positive");
  for (auto& p : params) {
    for (double& v : p.value.data()) v = std::clamp(v, -c, c);
  }
}

}  // namespace gogan
