#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "gogan/autodiff.hpp"
#include "gogan/errors.hpp"
#include "gogan/params.hpp"
#include "gogan/rng.hpp"
#include "gogan/tensor.hpp"

namespace gogan {

// Output head of a dense network.
enum class OutputKind {
  linear,     // raw affine output (point data, critic scores)
  unit_tanh,  // (tanh(t) + 1) / 2, i.e. images in (0, 1)
};

struct MlpSpec {
  std::vector<std::size_t> widths;  // input, hidden..., output
  double leaky_slope = 0.2;
  OutputKind output = OutputKind::linear;
  // Fixed input map x -> input_scale * x + input_shift ahead of the first layer.
  double input_scale = 1.0;
  double input_shift = 0.0;

  std::size_t input_dim() const { return widths.front(); }
  std::size_t output_dim() const { return widths.back(); }
  std::size_t layers() const { return widths.size() - 1; }
};

inline std::string weight_name(std::size_t layer) { return "l" + std::to_string(layer) + ".weight"; }
inline std::string bias_name(std::size_t layer) { return "l" + std::to_string(layer) + ".bias"; }

// Fully connected network with leaky-ReLU hidden activations.
// Layer l holds weight (in x out) and bias (1 x out).
class Mlp {
 public:
  Mlp() = default;

  // Glorot-uniform weights, zero biases.
  Mlp(MlpSpec spec, Rng& rng) : spec_(std::move(spec)) {
    validate();
    for (std::size_t l = 0; l < spec_.layers(); ++l) {
      const std::size_t in = spec_.widths[l], out = spec_.widths[l + 1];
      const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
      std::uniform_real_distribution<double> dist(-limit, limit);
      Tensor w({in, out});
      for (double& v : w.data()) v = dist(rng);
      params_.add(weight_name(l), std::move(w));
      params_.add(bias_name(l), Tensor({1, out}, 0.0));
    }
  }

  static Mlp zeros(MlpSpec spec) {
    Mlp net;
    net.spec_ = std::move(spec);
    net.validate();
    for (std::size_t l = 0; l < net.spec_.layers(); ++l) {
      net.params_.add(weight_name(l), Tensor({net.spec_.widths[l], net.spec_.widths[l + 1]}, 0.0));
      net.params_.add(bias_name(l), Tensor({1, net.spec_.widths[l + 1]}, 0.0));
    }
    return net;
  }

  const MlpSpec& spec() const { return spec_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  ad::Var forward(ad::Tape& tape, const BoundParams& bound, ad::Var x) const {
    if (bound.vars.size() != params_.size()) throw UsageError("bound parameters do not match network");
    const Tensor& xv = x.value();
    if (xv.rank() != 2 || xv.cols() != spec_.input_dim()) {
      throw UsageError("network expects " + std::to_string(spec_.input_dim()) + " input columns, got shape " +
                       shape_string(xv.shape()));
    }
    const ad::Var ones = tape.constant(Tensor({xv.rows(), 1}, 1.0));
    ad::Var h = x;
    if (spec_.input_scale != 1.0 || spec_.input_shift != 0.0) h = h * spec_.input_scale + spec_.input_shift;
    for (std::size_t l = 0; l < spec_.layers(); ++l) {
      h = ad::matmul(h, bound[2 * l]) + ad::matmul(ones, bound[2 * l + 1]);
      if (l + 1 < spec_.layers()) h = ad::leaky_relu(h, spec_.leaky_slope);
    }
    if (spec_.output == OutputKind::unit_tanh) h = ad::tanh(h) * 0.5 + 0.5;
    return h;
  }

  // Forward pass without gradients.
  Tensor predict(const Tensor& x) const {
    ad::Tape tape;
    const BoundParams bound = bind_frozen(tape, params_);
    return forward(tape, bound, tape.constant(x)).value();
  }

 private:
  void validate() const {
    if (spec_.widths.size() < 2) throw ConfigError("network needs at least input and output widths");
    for (std::size_t w : spec_.widths) {
      if (w == 0) throw ConfigError("network layer widths must be positive");
    }
    if (!(spec_.leaky_slope > 0.0 && spec_.leaky_slope < 1.0)) throw ConfigError("leaky slope must lie in (0, 1)");
  }

  MlpSpec spec_;
  ParamSet params_;
};

enum class PriorKind { uniform, normal };

inline const char* prior_name(PriorKind k) { return k == PriorKind::uniform ? "uniform" : "normal"; }

inline PriorKind parse_prior(const std::string& s) {
  if (s == "uniform") return PriorKind::uniform;
  if (s == "normal") return PriorKind::normal;
  throw ConfigError("unknown prior '" + s + "' (expected uniform or normal)");
}

// Architecture hyperparameters shared by every stage of a chain.
struct ArchitectureSpec {
  std::size_t data_dim = 2;
  std::size_t latent_dim = 32;
  std::vector<std::size_t> generator_hidden{128, 128};
  std::vector<std::size_t> critic_hidden{128, 128};
  double leaky_slope = 0.2;
  bool image_output = false;
  PriorKind prior = PriorKind::uniform;

  MlpSpec generator_spec() const {
    MlpSpec s;
    s.widths.push_back(latent_dim);
    s.widths.insert(s.widths.end(), generator_hidden.begin(), generator_hidden.end());
    s.widths.push_back(data_dim);
    s.leaky_slope = leaky_slope;
    s.output = image_output ? OutputKind::unit_tanh : OutputKind::linear;
    return s;
  }

  MlpSpec critic_spec() const {
    MlpSpec s;
    s.widths.push_back(data_dim);
    s.widths.insert(s.widths.end(), critic_hidden.begin(), critic_hidden.end());
    s.widths.push_back(1);
    s.leaky_slope = leaky_slope;
    s.output = OutputKind::linear;
    // Images in [0, 1] are centered to [-1, 1]. With every parameter clipped
    // to [-c, c] the biases are too small to offset an all-positive input, so
    // without centering the critic is close to positively homogeneous and
    // cannot tell a spread of image brightness from its mean.
    if (image_output) {
      s.input_scale = 2.0;
      s.input_shift = -1.0;
    }
    return s;
  }
};

struct Generator {
  Mlp net;

  std::size_t latent_dim() const { return net.spec().input_dim(); }
  std::size_t data_dim() const { return net.spec().output_dim(); }
};

struct Critic {
  Mlp net;

  std::size_t data_dim() const { return net.spec().input_dim(); }
};

inline Generator make_generator(const ArchitectureSpec& arch, Rng& rng) { return {Mlp(arch.generator_spec(), rng)}; }
inline Critic make_critic(const ArchitectureSpec& arch, Rng& rng) { return {Mlp(arch.critic_spec(), rng)}; }

// Batch of samples G(z); one output row per input row.
inline ad::Var generator_forward(ad::Tape& tape, const Generator& g, const BoundParams& bound, ad::Var z) {
  if (z.value().rank() != 2 || z.value().cols() != g.latent_dim()) {
    throw UsageError("generator expects latent_dim = " + std::to_string(g.latent_dim()) + " columns");
  }
  return g.net.forward(tape, bound, z);
}

// One unbounded score per sample, shape (m x 1).
inline ad::Var critic_forward(ad::Tape& tape, const Critic& d, const BoundParams& bound, ad::Var x) {
  if (x.value().rank() != 2 || x.value().cols() != d.data_dim()) {
    throw UsageError("critic expects data_dim = " + std::to_string(d.data_dim()) + " columns");
  }
  return d.net.forward(tape, bound, x);
}

inline Tensor generate(const Generator& g, const Tensor& z) {
  if (z.rank() != 2 || z.cols() != g.latent_dim()) throw UsageError("generator latent dimension mismatch");
  return g.net.predict(z);
}

inline Tensor score(const Critic& d, const Tensor& x) {
  if (x.rank() != 2 || x.cols() != d.data_dim()) throw UsageError("critic data dimension mismatch");
  return d.net.predict(x);
}

struct NoisePrior {
  PriorKind kind = PriorKind::uniform;
  std::size_t dim = 32;
  Rng rng;

  NoisePrior(PriorKind kind, std::size_t dim, std::uint64_t seed) : kind(kind), dim(dim), rng(seed) {}
};

// m i.i.d. latent draws, advancing the prior's stream.
inline Tensor sample_noise(NoisePrior& prior, long long m) {
  if (m <= 0) throw UsageError("noise batch size must be positive");
  Tensor z({static_cast<std::size_t>(m), prior.dim});
  if (prior.kind == PriorKind::uniform) {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (double& v : z.data()) v = dist(prior.rng);
  } else {
    std::normal_distribution<double> dist(0.0, 1.0);
    for (double& v : z.data()) v = dist(prior.rng);
  }
  return z;
}

}  // namespace gogan
