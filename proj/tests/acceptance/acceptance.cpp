// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero
// if any criterion fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "../oracles.hpp"
#include "../support.hpp"
#include "gogan/checksum.hpp"
#include "gogan/completion.hpp"
#include "gogan/config.hpp"
#include "gogan/experiment.hpp"
#include "gogan/losses.hpp"
#include "gogan/metrics.hpp"
#include "gogan/theory.hpp"
#include "gogan/trainer.hpp"

using namespace gogan;
using gogan::testing::Inputs;
using gogan::testing::LossBuilder;
using gogan::testing::random_away_from_zero;
using gogan::testing::random_tensor;
using gogan::testing::rel_error;
using gogan::testing::TempDir;
using gogan::testing::Vars;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

const std::filesystem::path kConfigDir = GOGAN_CONFIG_DIR;

// ---------------------------------------------------------------------------
// 1. gradient suite

constexpr double kGradTol = 1e-4;
constexpr int kGradInstances = 100;

struct GradCheck {
  double error = 0.0;
  bool smooth = true;  // central differences at h and h/2 agree
};

double central_difference(const LossBuilder& build, const Inputs& inputs, const std::string& name, std::size_t i,
                          double h) {
  Inputs plus = inputs, minus = inputs;
  plus[name][i] += h;
  minus[name][i] -= h;
  return (gogan::testing::evaluate(build, plus) - gogan::testing::evaluate(build, minus)) / (2.0 * h);
}

// A kink inside the stencil makes the two step sizes disagree; such an
// instance has no finite-difference reference and is redrawn.
GradCheck check_gradients(const LossBuilder& build, const Inputs& inputs) {
  constexpr double h = 1e-5;
  const ad::Gradients grads = gogan::testing::analytic(build, inputs);
  GradCheck out;
  for (const auto& [name, value] : inputs) {
    const Tensor& g = grads.at(name);
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double n1 = central_difference(build, inputs, name, i, h);
      const double n2 = central_difference(build, inputs, name, i, h / 2.0);
      if (rel_error(n1, n2) > 1e-3) {
        out.smooth = false;
        return out;
      }
      out.error = std::max(out.error, rel_error(g[i], n1));
    }
  }
  return out;
}

struct GradCase {
  std::string name;
  std::function<std::pair<LossBuilder, Inputs>(Rng&)> draw;
};

Shape random_shape(Rng& rng) {
  std::uniform_int_distribution<std::size_t> rows(1, 4), cols(1, 5);
  return {rows(rng), cols(rng)};
}

// sum(op(...) * w) for a fixed random weighting w of the op's output.
LossBuilder weighted(std::function<ad::Var(ad::Tape&, const Vars&)> op, Tensor w) {
  return [op, w](ad::Tape& t, const Vars& v) { return ad::sum(op(t, v) * t.constant(w)); };
}

GradCase unary_case(const std::string& name, std::function<ad::Var(ad::Var)> f, bool away_from_zero, double scale) {
  return {name, [f, away_from_zero, scale](Rng& rng) {
            const Shape s = random_shape(rng);
            Tensor x = away_from_zero ? random_away_from_zero(rng, s) : random_tensor(rng, s);
            for (double& v : x.data()) v *= scale;
            return std::pair{weighted([f](ad::Tape&, const Vars& v) { return f(v.at("x")); }, random_tensor(rng, s)),
                             Inputs{{"x", x}}};
          }};
}

GradCase binary_case(const std::string& name, ad::EwOp op, bool scalar_rhs) {
  return {name, [op, scalar_rhs](Rng& rng) {
            const Shape s = random_shape(rng);
            Inputs in{{"a", random_tensor(rng, s)},
                      {"b", scalar_rhs ? Tensor::scalar(random_tensor(rng, {1, 1})[0]) : random_tensor(rng, s)}};
            return std::pair{
                weighted([op](ad::Tape&, const Vars& v) { return ad::ew(op, v.at("a"), v.at("b")); }, random_tensor(rng, s)),
                in};
          }};
}

void add_params(Inputs& in, const std::string& scope, const ParamSet& ps) {
  for (const auto& p : ps) in[scope + "/" + p.name] = p.value;
}

BoundParams bound_from(const Vars& v, const std::string& scope, const ParamSet& ps) {
  BoundParams b;
  for (const auto& p : ps) b.vars.push_back(v.at(scope + "/" + p.name));
  return b;
}

ArchitectureSpec small_arch() {
  ArchitectureSpec a;
  a.data_dim = 3;
  a.latent_dim = 2;
  a.generator_hidden = {6, 5};
  a.critic_hidden = {6, 5};
  return a;
}

ArchitectureSpec small_image_arch() {
  ArchitectureSpec a;
  a.data_dim = 144;
  a.latent_dim = 3;
  a.generator_hidden = {8};
  a.critic_hidden = {8};
  a.image_output = true;
  return a;
}

std::vector<GradCase> gradient_cases() {
  std::vector<GradCase> cases;
  cases.push_back({"matmul", [](Rng& rng) {
                     std::uniform_int_distribution<std::size_t> d(1, 5);
                     const std::size_t m = d(rng), k = d(rng), n = d(rng);
                     Inputs in{{"a", random_tensor(rng, {m, k})}, {"b", random_tensor(rng, {k, n})}};
                     return std::pair{weighted([](ad::Tape&, const Vars& v) { return ad::matmul(v.at("a"), v.at("b")); },
                                               random_tensor(rng, {m, n})),
                                      in};
                   }});
  cases.push_back(binary_case("add", ad::EwOp::add, false));
  cases.push_back(binary_case("sub", ad::EwOp::sub, false));
  cases.push_back(binary_case("mul", ad::EwOp::mul, false));
  cases.push_back(binary_case("add scalar", ad::EwOp::add, true));
  cases.push_back(binary_case("sub scalar", ad::EwOp::sub, true));
  cases.push_back(binary_case("mul scalar", ad::EwOp::mul, true));
  cases.push_back(unary_case("leaky_relu", [](ad::Var x) { return ad::leaky_relu(x, 0.2); }, true, 1.0));
  cases.push_back(unary_case("tanh", [](ad::Var x) { return ad::tanh(x); }, false, 2.0));
  cases.push_back(unary_case("hinge", [](ad::Var x) { return ad::hinge(x); }, true, 1.0));
  cases.push_back(unary_case("abs", [](ad::Var x) { return ad::abs(x); }, true, 1.0));
  cases.push_back({"row_sum", [](Rng& rng) {
                     const Shape s = random_shape(rng);
                     return std::pair{weighted([](ad::Tape&, const Vars& v) { return ad::row_sum(v.at("x")); },
                                               random_tensor(rng, {s[0], 1})),
                                      Inputs{{"x", random_tensor(rng, s)}}};
                   }});
  cases.push_back({"sum", [](Rng& rng) {
                     return std::pair{weighted([](ad::Tape&, const Vars& v) { return ad::sum(v.at("x")); },
                                               Tensor::scalar(random_tensor(rng, {1, 1})[0])),
                                      Inputs{{"x", random_tensor(rng, random_shape(rng))}}};
                   }});
  cases.push_back({"mean", [](Rng& rng) {
                     return std::pair{weighted([](ad::Tape&, const Vars& v) { return ad::mean(v.at("x")); },
                                               Tensor::scalar(random_tensor(rng, {1, 1})[0])),
                                      Inputs{{"x", random_tensor(rng, random_shape(rng))}}};
                   }});

  // Composed losses, differentiated with respect to every trainable input.
  cases.push_back({"margin loss", [](Rng& rng) {
                     const ArchitectureSpec a = small_arch();
                     const Critic d = make_critic(a, rng);
                     const Tensor real = random_tensor(rng, {8, 3}), fake = random_tensor(rng, {8, 3});
                     const double eps = 0.01 + 0.49 * random_tensor(rng, {1, 1}, 0.0, 1.0)[0];
                     Inputs in;
                     add_params(in, "d", d.net.params());
                     LossBuilder b = [d, real, fake, eps](ad::Tape& t, const Vars& v) {
                       const BoundParams db = bound_from(v, "d", d.net.params());
                       const ad::Var sr = critic_forward(t, d, db, t.constant(real));
                       const ad::Var sf = critic_forward(t, d, db, t.constant(fake));
                       return mgan_critic_loss(sf, sr, eps);
                     };
                     return std::pair{b, in};
                   }});
  auto ranking_setup = [](Rng& rng, bool total) {
    const ArchitectureSpec a = small_arch();
    Stage prev;
    prev.generator = make_generator(a, rng);
    prev.critic = make_critic(a, rng);
    prev.frozen = true;
    const Critic d = make_critic(a, rng);
    const Tensor real = random_tensor(rng, {8, 3}), fake = random_tensor(rng, {8, 3}), z = random_tensor(rng, {8, 2});
    const double eps = 0.01 + 0.2 * random_tensor(rng, {1, 1}, 0.0, 1.0)[0];
    const double l1 = random_tensor(rng, {1, 1}, 0.1, 2.0)[0], l2 = random_tensor(rng, {1, 1}, 0.1, 2.0)[0];
    Inputs in;
    add_params(in, "d", d.net.params());
    LossBuilder b = [=](ad::Tape& t, const Vars& v) {
      const BoundParams db = bound_from(v, "d", d.net.params());
      const ad::Var sr = critic_forward(t, d, db, t.constant(real));
      const ad::Var rank = ranking_loss(t, prev, t.constant(z), sr, eps);
      if (!total) return rank;
      const ad::Var sf = critic_forward(t, d, db, t.constant(fake));
      return gogan_total_loss(mgan_critic_loss(sf, sr, eps), rank, l1, l2);
    };
    return std::pair{b, in};
  };
  cases.push_back({"ranking loss", [ranking_setup](Rng& rng) { return ranking_setup(rng, false); }});
  cases.push_back({"margin + ranking total", [ranking_setup](Rng& rng) { return ranking_setup(rng, true); }});

  auto completion_setup = [](Rng& rng, double ctx_weight, double perc_weight) {
    const ArchitectureSpec a = small_image_arch();
    const Generator g = make_generator(a, rng);
    const Critic d = make_critic(a, rng);
    const Tensor y = draw_procedural_image(12, rng);
    std::uniform_int_distribution<std::size_t> level(0, kOcclusionLevels.size() - 1);
    const Mask mask = make_center_mask(12, 12, kOcclusionLevels[level(rng)]);
    const double ref = random_tensor(rng, {1, 1})[0];
    Inputs in{{"z", random_tensor(rng, {1, a.latent_dim})}};
    LossBuilder b = [=](ad::Tape& t, const Vars& v) {
      const ad::Var gen = generator_forward(t, g, bind_frozen(t, g.net.params()), v.at("z"));
      const ad::Var ctx = ad::sum(contextual_loss(t, gen, y, mask));
      const ad::Var perc = ad::sum(perceptual_loss(t, gen, ref, d, bind_frozen(t, d.net.params())));
      return ctx * ctx_weight + perc * perc_weight;
    };
    return std::pair{b, in};
  };
  cases.push_back({"contextual loss", [completion_setup](Rng& rng) { return completion_setup(rng, 1.0, 0.0); }});
  cases.push_back({"perceptual loss", [completion_setup](Rng& rng) { return completion_setup(rng, 0.0, 1.0); }});
  cases.push_back({"completion objective", [completion_setup](Rng& rng) { return completion_setup(rng, 1.0, 0.1); }});

  cases.push_back({"WGAN critic loss", [](Rng& rng) {
                     const Critic d = make_critic(small_arch(), rng);
                     const Tensor real = random_tensor(rng, {8, 3}), fake = random_tensor(rng, {8, 3});
                     Inputs in;
                     add_params(in, "d", d.net.params());
                     LossBuilder b = [d, real, fake](ad::Tape& t, const Vars& v) {
                       const BoundParams db = bound_from(v, "d", d.net.params());
                       return wgan_critic_loss(critic_forward(t, d, db, t.constant(real)),
                                               critic_forward(t, d, db, t.constant(fake)));
                     };
                     return std::pair{b, in};
                   }});
  cases.push_back({"WGAN generator loss", [](Rng& rng) {
                     const ArchitectureSpec a = small_arch();
                     const Generator g = make_generator(a, rng);
                     const Critic d = make_critic(a, rng);
                     const Tensor z = random_tensor(rng, {8, 2});
                     Inputs in;
                     add_params(in, "g", g.net.params());
                     LossBuilder b = [g, d, z](ad::Tape& t, const Vars& v) {
                       const ad::Var x = generator_forward(t, g, bound_from(v, "g", g.net.params()), t.constant(z));
                       return generator_wgan_loss(critic_forward(t, d, bind_frozen(t, d.net.params()), x));
                     };
                     return std::pair{b, in};
                   }});
  return cases;
}

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  Rng rng(derive_seed(1, "acceptance/gradients"));
  double worst = 0.0;
  std::string worst_case;
  std::size_t redrawn = 0, failing_cases = 0;
  const auto cases = gradient_cases();
  for (const auto& c : cases) {
    double case_worst = 0.0;
    for (int i = 0; i < kGradInstances; ++i) {
      GradCheck r;
      for (int attempt = 0; attempt < 20; ++attempt) {
        auto [build, inputs] = c.draw(rng);
        r = check_gradients(build, inputs);
        if (r.smooth) break;
        ++redrawn;
      }
      if (!r.smooth) r.error = std::numeric_limits<double>::infinity();
      case_worst = std::max(case_worst, r.error);
    }
    if (case_worst >= kGradTol) ++failing_cases;
    if (case_worst >= worst) {
      worst = case_worst;
      worst_case = c.name;
    }
  }
  const double secs = seconds_since(t0);
  return {failing_cases == 0 && secs < 60.0,
          fmt("%zu cases x %d instances, worst rel err %.2e (%s) < %.0e, %zu kink redraws, %.1f s < 60 s", cases.size(),
              kGradInstances, worst, worst_case.c_str(), kGradTol, redrawn, secs)};
}

// ---------------------------------------------------------------------------
// 2. WGAN limit

Outcome wgan_limit() {
  const auto t0 = Clock::now();
  Rng rng(derive_seed(2, "acceptance/wgan-limit"));
  const ArchitectureSpec arch;  // desk defaults: 2 -> 128 -> 128 -> 1
  std::size_t identical = 0, entries = 0;
  double max_diff = 0.0;
  constexpr int kInstances = 100;
  for (int i = 0; i < kInstances; ++i) {
    const Critic d = make_critic(arch, rng);
    const Tensor real = random_tensor(rng, {64, 2}, -3.0, 3.0), fake = random_tensor(rng, {64, 2}, -3.0, 3.0);
    const Tensor sr = score(d, real), sf = score(d, fake);
    double widest = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < sr.size(); ++k) widest = std::max(widest, sr[k] - sf[k]);
    const double eps = std::max(0.0, widest) + 1.0;  // fake + eps - real > 0 for every pair

    auto grads_for = [&](bool margin) {
      ad::Tape t;
      const BoundParams db = bind_tracked(t, d.net.params(), "d");
      const ad::Var s_real = critic_forward(t, d, db, t.constant(real));
      const ad::Var s_fake = critic_forward(t, d, db, t.constant(fake));
      return ad::backward(t, margin ? mgan_critic_loss(s_fake, s_real, eps) : wgan_critic_loss(s_real, s_fake));
    };
    const ad::Gradients gm = grads_for(true), gw = grads_for(false);
    bool same = true;
    for (const auto& p : d.net.params()) {
      const Tensor& a = gm.at("d/" + p.name);
      const Tensor& b = gw.at("d/" + p.name);
      for (std::size_t k = 0; k < a.size(); ++k) {
        ++entries;
        max_diff = std::max(max_diff, std::abs(a[k] - b[k]));
        same = same && a[k] == b[k];
      }
    }
    identical += same;
  }
  const double secs = seconds_since(t0);
  return {identical == kInstances && secs < 10.0,
          fmt("%zu/%d instances bitwise identical over %zu gradient entries, max |diff| %.1e, %.1f s < 10 s", identical,
              kInstances, entries, max_diff, secs)};
}

// ---------------------------------------------------------------------------
// 3. theory identities

Outcome theory_identities() {
  const auto t0 = Clock::now();
  const SweepSummary s = run_theory_sweep(1000, derive_seed(3, "acceptance/theory"), 8);
  std::size_t identity = 0, bound = 0, monotone = 0, feasible = 0, equalities = 0;
  double worst_identity = 0.0;
  for (const SweepRow& row : s.rows) {
    const GapGeometry& g = row.geometry;
    if (!g.feasible || g.phis.size() != g.stages()) continue;
    ++feasible;
    const double beta = g.beta, tgr = tgr_sum(g);
    const double resid = std::abs(tgr - (beta - g.phis.back()));
    worst_identity = std::max(worst_identity, resid);
    identity += resid < 1e-12;
    const bool tight = g.stages() == 1 && g.etas[0] == 0.0;
    if (tgr == beta / 2.0) ++equalities;
    bound += tight ? tgr == beta / 2.0 : tgr > beta / 2.0;
    bool increasing = true;
    for (std::size_t k = 1; k < g.stages(); ++k) increasing = increasing && tgr_sum(truncate(g, k + 1)) > tgr_sum(truncate(g, k));
    monotone += increasing;
  }
  const double secs = seconds_since(t0);
  const bool ok = s.rows.size() == 1000 && feasible == 1000 && identity == feasible && bound == feasible &&
                  monotone == feasible && equalities == 1 && s.all_pass() && secs < 5.0;
  return {ok, fmt("%zu feasible configs: identity %zu (worst %.1e < 1e-12), half bound %zu (equality in %zu, the "
                  "N=1 eta=0 case), strictly increasing %zu, %.2f s < 5 s",
                  feasible, identity, worst_identity, bound, equalities, monotone, secs)};
}

// ---------------------------------------------------------------------------
// 4 + 5. mixture training runs

constexpr double kMixtureEpsilon = 0.0012;
constexpr double kOrderingSlack = 0.05;

struct MixtureRuns {
  int gap_down = 0;
  int ordered = 0;
  std::size_t clip_checks = 0;
  std::size_t clip_violations = 0;
  double max_critic_weight = 0.0;
  double clip = 0.0;
  double seconds = 0.0;
  std::string per_seed;
};

const MixtureRuns& mixture_runs() {
  static const MixtureRuns runs = [] {
    MixtureRuns r;
    const auto t0 = Clock::now();
    const MixtureSpec ring = MixtureSpec::ring(8, 2.0, 0.02);
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const Dataset ds = sample_gaussian_mixture(ring, 25600, derive_seed(seed, "data"));
      ArchitectureSpec arch;
      arch.generator_hidden = {64, 64};
      arch.critic_hidden = {64, 64};
      TrainConfig cfg;
      cfg.seed = seed;
      cfg.epsilon = kMixtureEpsilon;
      cfg.epochs = 10;
      r.clip = cfg.clip;
      TrainObserver observer = [&](const TrainEvent& ev) {
        if (ev.kind == TrainEvent::Kind::gap_logged) return;
        const double m = ev.trained->critic.net.params().max_abs();
        ++r.clip_checks;
        r.max_critic_weight = std::max(r.max_critic_weight, m);
        r.clip_violations += m > cfg.clip;
      };
      const GoGANChain chain = train_chain(ds, arch, cfg, 2, observer);
      const std::size_t ipe = cfg.iterations_for(ds.size());
      const double g1 = final_epoch_mean_gap(chain.gap_trace[0], ipe), g2 = final_epoch_mean_gap(chain.gap_trace[1], ipe);
      NoisePrior prior(arch.prior, arch.latent_dim, 99 + seed);
      const Tensor z = sample_noise(prior, 1024);
      const Tensor real = sample_gaussian_mixture(ring, 1024, 1234 + seed).samples;
      const OrderingReport rep = verify_ordering(chain, real, z, kOrderingSlack);
      r.gap_down += g2 < g1;
      r.ordered += rep.satisfied();
      r.per_seed += fmt("  seed %d: gamma1 %.5f gamma2 %.5f ordering %s\n", static_cast<int>(seed), g1, g2,
                        rep.satisfied() ? "ok" : "violated");
    }
    r.seconds = seconds_since(t0);
    return r;
  }();
  return runs;
}

Outcome clipping_invariant() {
  const MixtureRuns& r = mixture_runs();
  return {r.clip_checks > 0 && r.clip_violations == 0,
          fmt("%zu post-update checks over 5 two-stage runs, max |w| %.6g <= c = %g, %zu violations", r.clip_checks,
              r.max_critic_weight, r.clip, r.clip_violations)};
}

Outcome gap_direction() {
  const MixtureRuns& r = mixture_runs();
  std::fputs(r.per_seed.c_str(), stdout);
  return {r.gap_down >= 4 && r.ordered >= 4 && r.seconds < 900.0,
          fmt("gamma2 < gamma1 in %d/5 seeds, ordering (slack %.2f) in %d/5 seeds, need >= 4/5 each; epsilon %g, "
              "%.0f s < 900 s",
              r.gap_down, kOrderingSlack, r.ordered, kMixtureEpsilon, r.seconds)};
}

// ---------------------------------------------------------------------------
// 6 + 8. image completion

struct CompletionRun {
  std::optional<std::string> error;
  std::size_t train_images = 0;
  std::size_t held_out = 0;
  CompleteOutcome outcome;
  ExperimentConfig cfg;
  double seconds = 0.0;
};

const CompletionRun& completion_run() {
  static TempDir dir("acceptance-images");
  static const CompletionRun run = [] {
    CompletionRun r;
    const auto t0 = Clock::now();
    try {
      r.cfg = load_config(kConfigDir / "images.cfg");
      r.cfg.out_dir = dir.path();
      r.cfg.completion.checkpoint_dir.clear();
      const DataSplit split = build_split(r.cfg);
      r.train_images = split.train.size();
      r.held_out = std::min(split.test.size(), r.cfg.completion.max_images);
      run_train(r.cfg);
      r.outcome = run_complete(r.cfg);
    } catch (const std::exception& e) {
      r.error = e.what();
    }
    r.seconds = seconds_since(t0);
    return r;
  }();
  return run;
}

Outcome completion_direction() {
  const CompletionRun& r = completion_run();
  if (r.error) return {false, "run failed: " + *r.error};
  const CompletionSummary& s = r.outcome.summary;
  std::fputs(s.table_text().c_str(), stdout);
  bool beats_baseline = true, stage2_holds = true;
  std::string detail;
  for (std::size_t f = 0; f < s.fractions.size(); ++f) {
    const double base = s.mean_psnr.at("occluded")[f];
    const double p1 = s.mean_psnr.at("stage1")[f], p2 = s.mean_psnr.at("stage2")[f];
    beats_baseline = beats_baseline && p1 > base && p2 > base;
    stage2_holds = stage2_holds && p2 >= p1 - 0.1;
    detail += fmt("%s%.0f%%: occluded %.2f, stage1 %.2f, stage2 %.2f dB", f ? "; " : "", 100.0 * s.fractions[f], base, p1,
                  p2);
  }
  const bool sized = r.train_images >= 2000 && r.held_out == 50 && r.cfg.data.image_size == 16 &&
                     s.fractions == std::vector<double>{0.25, 0.49};
  return {sized && beats_baseline && stage2_holds && r.seconds < 1800.0,
          fmt("%zu train / %zu held-out 16x16 images; ", r.train_images, r.held_out) + detail +
              fmt("; completed > occluded: %s, stage2 >= stage1 - 0.1 dB: %s, %.0f s < 1800 s",
                  beats_baseline ? "yes" : "no", stage2_holds ? "yes" : "no", r.seconds)};
}

Outcome preservation() {
  const CompletionRun& r = completion_run();
  if (r.error) return {false, "run failed: " + *r.error};
  const DataSplit split = build_split(r.cfg);
  std::size_t checked = 0, exact = 0;
  for (const CompletionRow& row : r.outcome.rows) {
    if (row.model == "occluded") continue;
    ++checked;
    const Tensor y = split.test.image(row.image);
    const Mask mask = make_center_mask(y.rows(), y.cols(), row.fraction);
    bool same = row.completed.shape() == y.shape();
    for (std::size_t i = 0; same && i < y.size(); ++i) {
      if (mask.values[i] != 0.0) same = row.completed[i] == y[i];
    }
    exact += same;
  }
  const std::size_t expected = 2 * r.held_out * r.cfg.completion.fractions.size();
  return {checked == expected && exact == checked,
          fmt("%zu/%zu completions keep every observed pixel bit-exact", exact, checked)};
}

// ---------------------------------------------------------------------------
// 7. metric oracles

Outcome metric_oracles() {
  Rng rng(derive_seed(7, "acceptance/metrics"));
  std::uniform_int_distribution<std::size_t> side(11, 24);
  std::normal_distribution<double> noise(0.0, 1.0);
  double worst_psnr = 0.0, worst_ssim = 0.0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t h = side(rng), w = side(rng);
    Tensor a, b;
    if (i % 2 == 0) {
      a = random_tensor(rng, {h, w}, 0.0, 1.0);
      b = random_tensor(rng, {h, w}, 0.0, 1.0);
    } else {
      a = draw_procedural_image(16, rng);
      b = a;
      const double sigma = 0.01 + 0.2 * (i % 10) / 10.0;
      for (double& v : b.data()) v = std::clamp(v + sigma * noise(rng), 0.0, 1.0);
    }
    worst_psnr = std::max(worst_psnr, std::abs(psnr(a, b) - gogan::testing::oracle_psnr(a, b)));
    worst_ssim = std::max(worst_ssim, std::abs(ssim(a, b) - gogan::testing::oracle_ssim(a, b)));
  }
  const Tensor img = draw_procedural_image(16, rng);
  const double p_same = psnr(img, img), s_same = ssim(img, img);
  const bool ok = worst_psnr < 1e-9 && worst_ssim < 1e-6 && p_same == std::numeric_limits<double>::infinity() &&
                  s_same == 1.0;
  return {ok, fmt("100 pairs: max |PSNR - ref| %.1e < 1e-9, max |SSIM - ref| %.1e < 1e-6; identical: PSNR %g, SSIM %.17g",
                  worst_psnr, worst_ssim, p_same, s_same)};
}

// ---------------------------------------------------------------------------
// 9. determinism through the command-line tool

int run_cli(const std::string& args) {
  const std::string cmd = std::string(GOGAN_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism() {
  TempDir dir("acceptance-determinism");
  const std::string mixture = (kConfigDir / "mixture.cfg").string();
  const std::string theory = (kConfigDir / "theory.cfg").string();
  int failures = 0;
  for (const char* run : {"a", "b"}) {
    failures += run_cli("train --config " + mixture + " --out " + (dir / ("train_" + std::string(run))).string()) != 0;
    failures += run_cli("theory --config " + theory + " --out " + (dir / ("theory_" + std::string(run))).string()) != 0;
  }
  if (failures) return {false, fmt("%d CLI invocations failed", failures)};
  std::size_t compared = 0, equal = 0;
  auto compare = [&](const std::string& kind, const char* file) {
    ++compared;
    const auto a = dir / (kind + "_a") / file, b = dir / (kind + "_b") / file;
    equal += std::filesystem::exists(a) && std::filesystem::exists(b) && read_text_file(a) == read_text_file(b);
  };
  compare("train", "gap_trace_stage1.csv");
  compare("train", "gap_trace_stage2.csv");
  compare("theory", "theory_sweep.csv");
  compare("theory", "theory_summary.txt");
  return {equal == compared, fmt("%zu/%zu output files byte-identical across repeated train and theory runs", equal,
                                 compared)};
}

}  // namespace

// Optional arguments select criteria by number; the default runs all of them.
int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient suite", gradient_suite},
      {"WGAN limit", wgan_limit},
      {"theory identities", theory_identities},
      {"clipping invariant", clipping_invariant},
      {"gap direction", gap_direction},
      {"completion direction", completion_direction},
      {"metric oracles", metric_oracles},
      {"preservation", preservation},
      {"determinism", determinism},
  };
  std::vector<std::size_t> selected;
  for (int a = 1; a < argc; ++a) selected.push_back(std::strtoul(argv[a], nullptr, 10));
  if (selected.empty()) {
    for (std::size_t i = 1; i <= criteria.size(); ++i) selected.push_back(i);
  }
  int failed = 0;
  for (std::size_t n : selected) {
    if (n == 0 || n > criteria.size()) {
      std::fprintf(stderr, "no criterion %zu\n", n);
      return 2;
    }
    const std::size_t i = n - 1;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s [%zu] %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", selected.size() - failed, selected.size());
  return failed == 0 ? 0 : 1;
}
