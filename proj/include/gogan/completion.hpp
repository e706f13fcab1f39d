#pragma once

// Image completion by latent optimization: find z minimizing
//   || M * G(z) - M * y ||_1 + lambda * (ref_score - D(G(z)))
// then paste G(z) into the hole of y. Completion fidelity (PSNR, SSIM)
// against the held-out ground truth measures generator quality.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "gogan/autodiff.hpp"
#include "gogan/errors.hpp"
#include "gogan/metrics.hpp"
#include "gogan/networks.hpp"
#include "gogan/params.hpp"
#include "gogan/rng.hpp"
#include "gogan/tensor.hpp"

namespace gogan {

// Occlusion levels evaluated by default, as fractions of the image area.
inline const std::vector<double> kOcclusionLevels{0.09, 0.25, 0.49, 0.64, 0.81};

// Binary mask, 1 on observed pixels and 0 inside a centered square hole.
struct Mask {
  Tensor values;
  double occlusion_fraction = 0.0;
  std::size_t hole_top = 0, hole_left = 0, hole_height = 0, hole_width = 0;

  std::size_t height() const { return values.rows(); }
  std::size_t width() const { return values.cols(); }
};

// Hole side per dimension is round(sqrt(fraction) * side); when the
// leftover is odd the hole sits one pixel toward the top-left.
inline Mask make_center_mask(std::size_t height, std::size_t width, double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw DomainError("occlusion fraction must lie in (0, 1)");
  if (height == 0 || width == 0) throw DomainError("mask dimensions must be positive");
  Mask m;
  m.occlusion_fraction = fraction;
  const double root = std::sqrt(fraction);
  m.hole_height = static_cast<std::size_t>(std::lround(root * static_cast<double>(height)));
  m.hole_width = static_cast<std::size_t>(std::lround(root * static_cast<double>(width)));
  m.hole_top = (height - m.hole_height) / 2;
  m.hole_left = (width - m.hole_width) / 2;
  m.values = Tensor({height, width}, 1.0);
  for (std::size_t r = m.hole_top; r < m.hole_top + m.hole_height; ++r) {
    for (std::size_t c = m.hole_left; c < m.hole_left + m.hole_width; ++c) m.values.at(r, c) = 0.0;
  }
  return m;
}

struct CompletionTask {
  Tensor y;             // ground truth with the hole zeroed
  Mask mask;
  Tensor ground_truth;  // scoring only

  static CompletionTask from_image(const Tensor& image, const Mask& mask) {
    if (image.shape() != mask.values.shape()) throw UsageError("image and mask shapes differ");
    CompletionTask t;
    t.ground_truth = image;
    t.mask = mask;
    t.y = image;
    for (std::size_t i = 0; i < t.y.size(); ++i) t.y[i] *= mask.values[i];
    return t;
  }
};

// M * y + (1 - M) * generated.
inline Tensor compose_completion(const Tensor& y, const Mask& mask, const Tensor& generated) {
  if (y.shape() != mask.values.shape() || generated.size() != y.size()) {
    throw UsageError("compose_completion: shape mismatch");
  }
  Tensor out(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = mask.values[i] != 0.0 ? y[i] : generated[i];
  return out;
}

// The occluded baseline: the hole filled with mid-gray.
inline Tensor occluded_baseline(const CompletionTask& task, double fill = 0.5) {
  return compose_completion(task.y, task.mask, Tensor(task.y.shape(), fill));
}

// Per-row masked L1 distance between generated rows (R x HW) and y.
inline ad::Var contextual_loss(ad::Tape& tape, ad::Var generated, const Tensor& y, const Mask& mask) {
  const Tensor& gv = generated.value();
  if (gv.rank() != 2 || gv.cols() != y.size() || y.size() != mask.values.size()) {
    throw UsageError("contextual_loss: generated rows, y and mask must have matching pixel counts");
  }
  const std::size_t rows = gv.rows();
  const ad::Var m = tape.constant(repeat_row(mask.values.reshaped({1, mask.values.size()}), rows));
  const ad::Var masked_y = tape.constant(repeat_row(y.reshaped({1, y.size()}), rows)) * m;
  return ad::row_sum(ad::abs(generated * m - masked_y));
}

// Per-row ref_score - D(generated).
inline ad::Var perceptual_loss(ad::Tape& tape, ad::Var generated, double ref_score, const Critic& d,
                               const BoundParams& bound) {
  return ref_score - critic_forward(tape, d, bound, generated);
}

// Scalar forms evaluated for one latent row z (1 x latent_dim).
inline double contextual_loss_value(const Tensor& z, const Tensor& y, const Mask& mask, const Generator& g) {
  ad::Tape tape;
  const BoundParams gb = bind_frozen(tape, g.net.params());
  return contextual_loss(tape, generator_forward(tape, g, gb, tape.constant(z)), y, mask).value().item();
}

inline double perceptual_loss_value(const Tensor& z, double ref_score, const Generator& g, const Critic& d) {
  ad::Tape tape;
  const BoundParams gb = bind_frozen(tape, g.net.params());
  const BoundParams db = bind_frozen(tape, d.net.params());
  return perceptual_loss(tape, generator_forward(tape, g, gb, tape.constant(z)), ref_score, d, db).value().item();
}

struct CompletionOptions {
  double lambda = 0.1;
  std::size_t steps = 1000;
  double lr_z = 0.01;
  std::size_t restarts = 3;
  double ref_score = 0.0;  // mean critic score of a reference batch of real images
  PriorKind prior = PriorKind::uniform;
  std::uint64_t seed = 0;
};

struct CompletionResult {
  Tensor z_hat;
  Tensor generated;    // G(z_hat) as an image
  Tensor y_completed;
  double psnr = 0.0;
  double ssim = 0.0;
  double contextual = 0.0;
  double perceptual = 0.0;
  double total = 0.0;
  std::vector<double> loss_trace;  // total loss of the chosen restart before each update
};

// Gradient descent on z from `restarts` random starts optimized side by
// side; the start with the lowest final total loss wins. With a uniform
// prior z is clipped to [-1, 1] after every step. A non-finite value
// restarts the batch from fresh draws; after `restarts` failed attempts a
// NumericError is raised.
inline CompletionResult complete(const CompletionTask& task, const Generator& g, const Critic& d,
                                 const CompletionOptions& opt) {
  if (opt.steps == 0) throw ConfigError("completion needs at least one step");
  if (opt.restarts == 0) throw ConfigError("completion needs at least one restart");
  if (!(opt.lr_z > 0.0)) throw ConfigError("lr_z must be positive");
  if (opt.lambda < 0.0) throw ConfigError("completion lambda must be nonnegative");
  if (g.data_dim() != task.y.size()) throw UsageError("generator output size does not match the image");

  const std::size_t rows = opt.restarts;
  const std::size_t latent = g.latent_dim();
  std::string last_failure;

  for (std::size_t attempt = 0; attempt < opt.restarts; ++attempt) {
    NoisePrior prior(opt.prior, latent, derive_seed(opt.seed, "completion/attempt" + std::to_string(attempt)));
    Tensor z = sample_noise(prior, static_cast<long long>(rows));
    std::vector<std::vector<double>> traces(rows);

    auto evaluate = [&](const Tensor& zv, Tensor* grad, Tensor* ctx_out, Tensor* perc_out) {
      ad::Tape tape;
      const BoundParams gb = bind_frozen(tape, g.net.params());
      const BoundParams db = bind_frozen(tape, d.net.params());
      const ad::Var zvar = tape.variable("z", zv);
      const ad::Var gen = generator_forward(tape, g, gb, zvar);
      const ad::Var ctx = contextual_loss(tape, gen, task.y, task.mask);
      const ad::Var perc = perceptual_loss(tape, gen, opt.ref_score, d, db);
      const ad::Var total = ctx + perc * opt.lambda;
      if (grad) *grad = ad::backward(tape, ad::sum(total)).at("z");
      if (ctx_out) *ctx_out = ctx.value();
      if (perc_out) *perc_out = perc.value();
      return total.value();
    };

    try {
      Tensor grad;
      for (std::size_t step = 0; step < opt.steps; ++step) {
        const Tensor totals = evaluate(z, &grad, nullptr, nullptr);
        for (std::size_t r = 0; r < rows; ++r) traces[r].push_back(totals[r]);
        for (std::size_t i = 0; i < z.size(); ++i) {
          z[i] -= opt.lr_z * grad[i];
          if (opt.prior == PriorKind::uniform) z[i] = std::clamp(z[i], -1.0, 1.0);
        }
        if (!z.all_finite()) throw NumericError("latent vector became non-finite");
      }
      Tensor ctx, perc;
      const Tensor totals = evaluate(z, nullptr, &ctx, &perc);
      const std::size_t best = static_cast<std::size_t>(
          std::min_element(totals.data().begin(), totals.data().end()) - totals.data().begin());

      CompletionResult res;
      res.z_hat = z.row_at(best);
      res.generated = generate(g, res.z_hat).reshaped(task.y.shape());
      res.y_completed = compose_completion(task.y, task.mask, res.generated);
      res.contextual = ctx[best];
      res.perceptual = perc[best];
      res.total = totals[best];
      res.loss_trace = std::move(traces[best]);
      res.psnr = psnr(res.y_completed, task.ground_truth);
      res.ssim = ssim(res.y_completed, task.ground_truth);
      return res;
    } catch (const NumericError& e) {
      last_failure = e.what();
    }
  }
  throw NumericError("completion failed after " + std::to_string(opt.restarts) + " attempts: " + last_failure);
}

}  // namespace gogan
