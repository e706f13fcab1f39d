#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <string>

#include "gogan/autodiff.hpp"
#include "gogan/rng.hpp"
#include "gogan/tensor.hpp"

namespace gogan::testing {

using Inputs = std::map<std::string, Tensor>;
using Vars = std::map<std::string, ad::Var>;
// Builds a scalar loss from tracked variables on a fresh tape.
using LossBuilder = std::function<ad::Var(ad::Tape&, const Vars&)>;

inline double evaluate(const LossBuilder& build, const Inputs& inputs) {
  ad::Tape tape;
  Vars vars;
  for (const auto& [name, value] : inputs) vars.emplace(name, tape.variable(name, value));
  return build(tape, vars).value().item();
}

inline ad::Gradients analytic(const LossBuilder& build, const Inputs& inputs) {
  ad::Tape tape;
  Vars vars;
  for (const auto& [name, value] : inputs) vars.emplace(name, tape.variable(name, value));
  return ad::backward(tape, build(tape, vars));
}

// |a - n| / max(|a|, |n|, floor); the floor keeps exact zeros comparable.
inline double rel_error(double a, double n, double floor = 1e-6) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

// Largest relative error between reverse-mode gradients and central
// differences over every entry of every input.
inline double max_gradient_error(const LossBuilder& build, const Inputs& inputs, double h = 1e-5) {
  const ad::Gradients grads = analytic(build, inputs);
  double worst = 0.0;
  for (const auto& [name, value] : inputs) {
    const Tensor& g = grads.at(name);
    for (std::size_t i = 0; i < value.size(); ++i) {
      Inputs plus = inputs, minus = inputs;
      plus[name][i] += h;
      minus[name][i] -= h;
      const double numeric = (evaluate(build, plus) - evaluate(build, minus)) / (2.0 * h);
      worst = std::max(worst, rel_error(g[i], numeric));
    }
  }
  return worst;
}

inline Tensor random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = dist(rng);
  return t;
}

// Values bounded away from zero so piecewise-linear kinks stay outside the
// finite-difference stencil.
inline Tensor random_away_from_zero(Rng& rng, Shape shape, double margin = 1e-2) {
  Tensor t = random_tensor(rng, std::move(shape));
  for (double& v : t.data()) {
    if (std::abs(v) < margin) v = v < 0 ? v - margin : v + margin;
  }
  return t;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("gogan-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& p) const { return path_ / p; }

 private:
  std::filesystem::path path_;
};

}  // namespace gogan::testing
