#pragma once

// Adversarial losses over per-sample critic scores (m x 1 columns).

#include <string>

#include "gogan/autodiff.hpp"
#include "gogan/errors.hpp"
#include "gogan/networks.hpp"
#include "gogan/tensor.hpp"

namespace gogan {

namespace detail {

inline void require_nonempty(ad::Var scores, const char* what) {
  if (scores.value().empty()) throw DomainError(std::string(what) + ": empty score batch");
}

inline void require_paired(ad::Var a, ad::Var b, const char* what) {
  if (a.value().shape() != b.value().shape()) {
    throw UsageError(std::string(what) + ": score batches must pair by index, got " +
                     shape_string(a.value().shape()) + " and " + shape_string(b.value().shape()));
  }
}

}  // namespace detail

// WGAN critic objective: mean(fake) - mean(real). Equals -Gap on the same batches.
inline ad::Var wgan_critic_loss(ad::Var scores_real, ad::Var scores_fake) {
  detail::require_nonempty(scores_real, "wgan_critic_loss");
  detail::require_nonempty(scores_fake, "wgan_critic_loss");
  return ad::mean(scores_fake) - ad::mean(scores_real);
}

// WGAN generator objective: -mean(fake).
inline ad::Var generator_wgan_loss(ad::Var scores_fake) {
  detail::require_nonempty(scores_fake, "generator_wgan_loss");
  return -ad::mean(scores_fake);
}

// Margin critic loss: (1/m) sum_i [fake_i + epsilon - real_i]_+ with real and
// fake paired by batch index.
inline ad::Var mgan_critic_loss(ad::Var scores_fake, ad::Var scores_real, double epsilon) {
  detail::require_paired(scores_fake, scores_real, "mgan_critic_loss");
  detail::require_nonempty(scores_fake, "mgan_critic_loss");
  if (!(epsilon > 0.0)) throw ConfigError("margin epsilon must be positive");
  return ad::mean(ad::hinge((scores_fake + epsilon) - scores_real));
}

// Ranking hinge: (1/m) sum_i [prev_fake_i + 2 epsilon - real_i]_+ where
// prev_fake are the frozen previous stage's scores of its own samples.
inline ad::Var ranking_hinge(ad::Var scores_prev_fake, ad::Var scores_real, double epsilon) {
  detail::require_paired(scores_prev_fake, scores_real, "ranking_loss");
  detail::require_nonempty(scores_real, "ranking_loss");
  if (!(epsilon > 0.0)) throw ConfigError("margin epsilon must be positive");
  if (scores_prev_fake.tape()->tracked(scores_prev_fake)) {
    throw UsageError("ranking_loss: previous-stage scores must come from a frozen stage");
  }
  return ad::mean(ad::hinge((scores_prev_fake + 2.0 * epsilon) - scores_real));
}

// lambda1 * disc + lambda2 * rank.
inline ad::Var gogan_total_loss(ad::Var l_disc, ad::Var l_rank, double lambda1, double lambda2) {
  if (lambda1 < 0.0 || lambda2 < 0.0) throw ConfigError("loss weights must be nonnegative");
  if (lambda1 == 0.0 && lambda2 == 0.0) throw ConfigError("loss weights cannot both be zero");
  return l_disc * lambda1 + l_rank * lambda2;
}

// Gap = mean(real scores) - mean(fake scores).
inline double gap_from_scores(const Tensor& scores_real, const Tensor& scores_fake) {
  if (scores_real.empty() || scores_fake.empty()) throw DomainError("gap of an empty batch");
  double r = 0.0, f = 0.0;
  for (double v : scores_real.data()) r += v;
  for (double v : scores_fake.data()) f += v;
  return r / static_cast<double>(scores_real.size()) - f / static_cast<double>(scores_fake.size());
}

// Gap of critic `d` between a real and a generated batch. Not recorded on any tape.
inline double estimate_gap(const Critic& d, const Tensor& batch_real, const Tensor& batch_fake) {
  if (batch_real.empty() || batch_fake.empty() || batch_real.rows() == 0 || batch_fake.rows() == 0) {
    throw DomainError("estimate_gap: empty batch");
  }
  return gap_from_scores(score(d, batch_real), score(d, batch_fake));
}

}  // namespace gogan
