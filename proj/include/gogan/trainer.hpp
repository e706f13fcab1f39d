#pragma once

// Progressive multi-stage training. Stage 1 is a margin GAN; stage k > 1
// starts from stage k-1's weights and adds the ranking hinge against the
// frozen stage k-1. The ranker is the stage's own critic.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gogan/autodiff.hpp"
#include "gogan/checkpoint.hpp"
#include "gogan/checksum.hpp"
#include "gogan/data.hpp"
#include "gogan/errors.hpp"
#include "gogan/losses.hpp"
#include "gogan/networks.hpp"
#include "gogan/params.hpp"
#include "gogan/rng.hpp"
#include "gogan/text.hpp"

namespace gogan {

struct TrainConfig {
  std::size_t batch_size = 64;
  std::size_t n_critic = 5;
  double lr = 5e-5;
  double rms_decay = 0.9;
  double rms_eps = 1e-8;
  double clip = 0.01;
  std::size_t epochs = 1;
  // Generator iterations per epoch; 0 derives it from the dataset size as
  // floor(n / (batch_size * n_critic)), i.e. one pass of critic batches.
  std::size_t iterations_per_epoch = 0;
  std::uint64_t seed = 0;
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double epsilon = 0.1;

  void validate() const {
    if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
    if (n_critic == 0) throw ConfigError("n_critic must be positive");
    if (!(lr > 0.0)) throw ConfigError("lr must be positive");
    if (!(rms_decay > 0.0 && rms_decay < 1.0)) throw ConfigError("rms_decay must lie in (0, 1)");
    if (!(rms_eps > 0.0)) throw ConfigError("rms_eps must be positive");
    if (!(clip > 0.0)) throw ConfigError("clip must be positive");
    if (epochs == 0) throw ConfigError("epochs must be positive");
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
    if (lambda1 < 0.0 || lambda2 < 0.0) throw ConfigError("lambda1/lambda2 must be nonnegative");
    if (lambda1 == 0.0 && lambda2 == 0.0) throw ConfigError("lambda1 and lambda2 cannot both be zero");
  }

  std::size_t iterations_for(std::size_t dataset_size) const {
    if (iterations_per_epoch > 0) return iterations_per_epoch;
    return std::max<std::size_t>(1, dataset_size / (batch_size * n_critic));
  }

  RmsPropOptions rmsprop() const { return {lr, rms_decay, rms_eps}; }
};

struct Stage {
  std::size_t index = 1;
  Generator generator;
  Critic critic;
  double epsilon = 0.1;
  bool frozen = false;

  std::string generator_scope() const { return "stage" + std::to_string(index) + ".generator"; }
  std::string critic_scope() const { return "stage" + std::to_string(index) + ".critic"; }
};

struct GapRecord {
  std::size_t iteration = 0;
  double gamma = 0.0;
};

struct GoGANChain {
  ArchitectureSpec arch;
  std::vector<Stage> stages;
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  std::vector<std::vector<GapRecord>> gap_trace;  // one trace per stage

  Stage& stage(std::size_t index) { return stages.at(index - 1); }
  const Stage& stage(std::size_t index) const { return stages.at(index - 1); }
};

// Notifications raised by train_stage; used for logging and for checking
// invariants from tests.
struct TrainEvent {
  enum class Kind { critic_step, gap_logged, generator_step };
  Kind kind;
  std::size_t stage = 0;
  std::size_t iteration = 0;
  std::size_t critic_step = 0;
  const Stage* trained = nullptr;
  const Tensor* real_batch = nullptr;  // gap_logged: batches Gamma was computed on
  const Tensor* fake_batch = nullptr;
  double gamma = 0.0;
  const ad::Gradients* grads = nullptr;  // critic_step / generator_step: raw tape gradients
};

using TrainObserver = std::function<void(const TrainEvent&)>;

// ---------------------------------------------------------------------------
// Ranking loss

// Ranking hinge of the current critic's real scores against the frozen
// previous stage's critic scores of its own generator's samples on z.
inline ad::Var ranking_loss(ad::Tape& tape, const Stage& previous, ad::Var z, ad::Var scores_real_current,
                            double epsilon) {
  if (!previous.frozen) throw UsageError("ranking_loss: stage " + std::to_string(previous.index) + " is not frozen");
  const BoundParams g = bind_frozen(tape, previous.generator.net.params());
  const BoundParams d = bind_frozen(tape, previous.critic.net.params());
  const ad::Var prev_fake = critic_forward(tape, previous.critic, d, generator_forward(tape, previous.generator, g, z));
  return ranking_hinge(prev_fake, scores_real_current, epsilon);
}

// ---------------------------------------------------------------------------
// Training

namespace detail {

// Cycles through the dataset in reshuffled passes, m rows at a time.
class BatchCursor {
 public:
  BatchCursor(const Tensor& samples, std::size_t batch, std::uint64_t seed)
      : samples_(samples), batch_(batch), rng_(seed), order_(samples.rows()) {
    if (samples.rows() < batch) {
      throw ConfigError("dataset has " + std::to_string(samples.rows()) + " samples, fewer than batch_size " +
                        std::to_string(batch));
    }
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    reshuffle();
  }

  Tensor next() {
    if (pos_ + batch_ > order_.size()) reshuffle();
    const std::span<const std::size_t> idx(order_.data() + pos_, batch_);
    pos_ += batch_;
    return gather_rows(samples_, idx);
  }

 private:
  void reshuffle() {
    std::shuffle(order_.begin(), order_.end(), rng_);
    pos_ = 0;
  }

  const Tensor& samples_;
  std::size_t batch_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

}  // namespace detail

// Runs cfg.epochs epochs of alternating updates on stage `stage_index`
// (1-based): n_critic clipped critic steps, then one generator step.
// Appends one Gap record per iteration to the stage's trace.
inline void train_stage(GoGANChain& chain, std::size_t stage_index, const Dataset& dataset, const TrainConfig& cfg,
                        const TrainObserver& observer = {}) {
  cfg.validate();
  if (stage_index == 0 || stage_index > chain.stages.size()) {
    throw UsageError("stage index " + std::to_string(stage_index) + " out of range");
  }
  for (std::size_t k = 1; k < stage_index; ++k) {
    if (!chain.stage(k).frozen) throw UsageError("stage " + std::to_string(k) + " must be frozen before training stage " +
                                                 std::to_string(stage_index));
  }
  Stage& stage = chain.stage(stage_index);
  if (stage.frozen) throw UsageError("stage " + std::to_string(stage_index) + " is frozen");
  if (dataset.dim() != chain.arch.data_dim) {
    throw UsageError("dataset dimension " + std::to_string(dataset.dim()) + " does not match architecture data_dim " +
                     std::to_string(chain.arch.data_dim));
  }
  if (chain.gap_trace.size() < chain.stages.size()) chain.gap_trace.resize(chain.stages.size());
  auto& trace = chain.gap_trace[stage_index - 1];

  const Stage* previous = stage_index > 1 ? &chain.stage(stage_index - 1) : nullptr;
  const std::string tag = "stage" + std::to_string(stage_index);
  NoisePrior prior(chain.arch.prior, chain.arch.latent_dim, derive_seed(cfg.seed, tag + "/noise"));
  detail::BatchCursor cursor(dataset.samples, cfg.batch_size, derive_seed(cfg.seed, tag + "/data"));
  const auto m = static_cast<long long>(cfg.batch_size);
  const std::size_t iterations = cfg.epochs * cfg.iterations_for(dataset.size());
  const std::string critic_scope = stage.critic_scope();
  const std::string generator_scope = stage.generator_scope();

  auto notify = [&](TrainEvent ev) {
    if (observer) observer(ev);
  };

  for (std::size_t it = 0; it < iterations; ++it) {
    try {
      Tensor real, fake;
      for (std::size_t c = 0; c < cfg.n_critic; ++c) {
        real = cursor.next();
        const Tensor z = sample_noise(prior, m);
        fake = generate(stage.generator, z);

        ad::Tape tape;
        const BoundParams d = bind_tracked(tape, stage.critic.net.params(), critic_scope);
        const ad::Var s_real = critic_forward(tape, stage.critic, d, tape.constant(real));
        const ad::Var s_fake = critic_forward(tape, stage.critic, d, tape.constant(fake));
        ad::Var loss = mgan_critic_loss(s_fake, s_real, stage.epsilon);
        if (previous) {
          const ad::Var l_rank = ranking_loss(tape, *previous, tape.constant(z), s_real, stage.epsilon);
          loss = gogan_total_loss(loss, l_rank, chain.lambda1, chain.lambda2);
        }
        const ad::Gradients grads = ad::backward(tape, loss);
        rmsprop_step(stage.critic.net.params(), grads.scoped(critic_scope), cfg.rmsprop());
        clip_weights(stage.critic.net.params(), cfg.clip);
        notify({TrainEvent::Kind::critic_step, stage_index, it, c, &stage, nullptr, nullptr, 0.0, &grads});
      }

      const double gamma = estimate_gap(stage.critic, real, fake);
      trace.push_back({it, gamma});
      notify({TrainEvent::Kind::gap_logged, stage_index, it, cfg.n_critic, &stage, &real, &fake, gamma, nullptr});

      const Tensor z = sample_noise(prior, m);
      ad::Tape tape;
      const BoundParams g = bind_tracked(tape, stage.generator.net.params(), generator_scope);
      const BoundParams d = bind_frozen(tape, stage.critic.net.params());
      const ad::Var scores = critic_forward(tape, stage.critic, d, generator_forward(tape, stage.generator, g, tape.constant(z)));
      const ad::Gradients grads = ad::backward(tape, generator_wgan_loss(scores));
      rmsprop_step(stage.generator.net.params(), grads.scoped(generator_scope), cfg.rmsprop());
      notify({TrainEvent::Kind::generator_step, stage_index, it, 0, &stage, nullptr, nullptr, gamma, &grads});
    } catch (const NumericError& e) {
      throw NumericError("training diverged at stage " + std::to_string(stage_index) + ", iteration " +
                         std::to_string(it) + ": " + e.what());
    }
  }
}

inline Stage make_first_stage(const ArchitectureSpec& arch, const TrainConfig& cfg) {
  Rng init = substream(cfg.seed, "stage1/init");
  Stage s;
  s.index = 1;
  s.generator = make_generator(arch, init);
  s.critic = make_critic(arch, init);
  s.epsilon = cfg.epsilon;
  clip_weights(s.critic.net.params(), cfg.clip);
  return s;
}

// Copy of `previous` as the unfrozen starting point of the next stage.
// Optimizer state starts fresh.
inline Stage next_stage_from(const Stage& previous) {
  Stage s = previous;
  s.index = previous.index + 1;
  s.frozen = false;
  s.generator.net.params().reset_accumulators();
  s.critic.net.params().reset_accumulators();
  return s;
}

// Trains num_stages stages in sequence with equal epochs per stage; each
// stage starts from its predecessor's final weights and is frozen when done.
inline GoGANChain train_chain(const Dataset& dataset, const ArchitectureSpec& arch, const TrainConfig& cfg,
                              std::size_t num_stages, const TrainObserver& observer = {}) {
  if (num_stages == 0) throw ConfigError("num_stages must be at least 1");
  cfg.validate();
  GoGANChain chain;
  chain.arch = arch;
  chain.lambda1 = cfg.lambda1;
  chain.lambda2 = cfg.lambda2;
  for (std::size_t k = 1; k <= num_stages; ++k) {
    chain.stages.push_back(k == 1 ? make_first_stage(arch, cfg) : next_stage_from(chain.stages.back()));
    chain.gap_trace.resize(chain.stages.size());
    train_stage(chain, k, dataset, cfg, observer);
    chain.stages.back().frozen = true;
  }
  return chain;
}

// Mean of the trace entries logged during the last `iterations_per_epoch` iterations.
inline double final_epoch_mean_gap(const std::vector<GapRecord>& trace, std::size_t iterations_per_epoch) {
  if (trace.empty() || iterations_per_epoch == 0) throw DomainError("empty gap trace");
  const std::size_t n = std::min(trace.size(), iterations_per_epoch);
  double s = 0.0;
  for (std::size_t i = trace.size() - n; i < trace.size(); ++i) s += trace[i].gamma;
  return s / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Ordering verification

inline double mean_score(const Critic& d, const Tensor& x) {
  const Tensor s = score(d, x);
  double total = 0.0;
  for (double v : s.data()) total += v;
  return total / static_cast<double>(s.size());
}

struct PairOrdering {
  std::size_t lower = 0;           // stage i; the pair is (i, i+1)
  double real_mean = 0.0;          // mean D_{i+1}(x)
  double fake_next_mean = 0.0;     // mean D_{i+1}(G_{i+1}(z))
  double fake_prev_mean = 0.0;     // mean D_i(G_i(z))
  double margin_required = 0.0;    // epsilon * (1 - slack)
  double rank_required = 0.0;      // 2 epsilon * (1 - slack)
  bool margin_ok = false;
  bool rank_ok = false;
};

struct OrderingReport {
  double epsilon = 0.0;
  double slack = 0.0;
  std::vector<PairOrdering> pairs;

  bool satisfied() const {
    return std::all_of(pairs.begin(), pairs.end(), [](const PairOrdering& p) { return p.margin_ok && p.rank_ok; });
  }

  std::string to_text() const {
    std::ostringstream out;
    out << "ordering report (epsilon " << format_real(epsilon) << ", slack " << format_real(slack) << ")\n";
    for (const auto& p : pairs) {
      out << "stages " << p.lower << "->" << p.lower + 1 << ": real " << format_real(p.real_mean) << ", fake_next "
          << format_real(p.fake_next_mean) << ", fake_prev " << format_real(p.fake_prev_mean) << "\n";
      out << "  real - fake_next = " << format_real(p.real_mean - p.fake_next_mean) << " >= "
          << format_real(p.margin_required) << " : " << (p.margin_ok ? "ok" : "VIOLATED") << "\n";
      out << "  real - fake_prev = " << format_real(p.real_mean - p.fake_prev_mean) << " >= "
          << format_real(p.rank_required) << " : " << (p.rank_ok ? "ok" : "VIOLATED") << "\n";
    }
    out << "overall: " << (satisfied() ? "satisfied" : "violated") << "\n";
    return out.str();
  }
};

// Checks the two adjacent-pair constraints from batch-mean scores.
inline PairOrdering check_pair(std::size_t lower, double real, double fake_next, double fake_prev, double epsilon,
                               double slack) {
  PairOrdering p;
  p.lower = lower;
  p.real_mean = real;
  p.fake_next_mean = fake_next;
  p.fake_prev_mean = fake_prev;
  p.margin_required = epsilon * (1.0 - slack);
  p.rank_required = 2.0 * epsilon * (1.0 - slack);
  p.margin_ok = real >= fake_next + p.margin_required;
  p.rank_ok = real >= fake_prev + p.rank_required;
  return p;
}

inline OrderingReport verify_ordering(const GoGANChain& chain, const Tensor& eval_real, const Tensor& eval_noise,
                                      double slack = 0.05) {
  if (chain.stages.size() < 2) throw UsageError("verify_ordering needs at least 2 stages");
  if (slack < 0.0 || slack >= 1.0) throw ConfigError("ordering slack must lie in [0, 1)");
  OrderingReport report;
  report.epsilon = chain.stages.front().epsilon;
  report.slack = slack;
  for (std::size_t i = 1; i < chain.stages.size(); ++i) {
    const Stage& lo = chain.stage(i);
    const Stage& hi = chain.stage(i + 1);
    const double real = mean_score(hi.critic, eval_real);
    const double fake_next = mean_score(hi.critic, generate(hi.generator, eval_noise));
    const double fake_prev = mean_score(lo.critic, generate(lo.generator, eval_noise));
    report.pairs.push_back(check_pair(i, real, fake_next, fake_prev, hi.epsilon, slack));
  }
  return report;
}

// ---------------------------------------------------------------------------
// Persistence

inline std::string join_sizes(const std::vector<std::size_t>& v) {
  return join(v, ",", [](std::size_t x) { return std::to_string(x); });
}

inline std::vector<std::size_t> parse_sizes(const std::string& s) {
  std::vector<std::size_t> out;
  if (trim(s).empty()) return out;
  for (const auto& part : split(s, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoull(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw ParseError("bad size list '" + s + "'");
    }
  }
  return out;
}

inline Checkpoint stage_checkpoint(const Stage& stage, const GoGANChain& chain) {
  Checkpoint ckpt;
  const auto& a = chain.arch;
  ckpt.set("stage", std::to_string(stage.index));
  ckpt.set("epsilon", format_real(stage.epsilon));
  ckpt.set("frozen", stage.frozen ? "1" : "0");
  ckpt.set("data_dim", std::to_string(a.data_dim));
  ckpt.set("latent_dim", std::to_string(a.latent_dim));
  ckpt.set("generator_hidden", join_sizes(a.generator_hidden));
  ckpt.set("critic_hidden", join_sizes(a.critic_hidden));
  ckpt.set("leaky_slope", format_real(a.leaky_slope));
  ckpt.set("image_output", a.image_output ? "1" : "0");
  ckpt.set("prior", prior_name(a.prior));
  ckpt.set("lambda1", format_real(chain.lambda1));
  ckpt.set("lambda2", format_real(chain.lambda2));
  ckpt.add_params(stage.generator.net.params(), "generator/");
  ckpt.add_params(stage.critic.net.params(), "critic/");
  return ckpt;
}

// SHA-256 of the stage's parameter blob.
inline std::string stage_checksum(const Stage& stage) {
  Checkpoint ckpt;
  ckpt.add_params(stage.generator.net.params(), "generator/");
  ckpt.add_params(stage.critic.net.params(), "critic/");
  return sha256_hex(encode_blob(ckpt));
}

inline std::filesystem::path stage_manifest_path(const std::filesystem::path& dir, std::size_t index) {
  return dir / ("stage" + std::to_string(index)) / "manifest.txt";
}

// One subdirectory per stage: <dir>/stage<k>/manifest.txt (+ manifest.bin).
inline std::vector<std::filesystem::path> save_chain(const GoGANChain& chain, const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> written;
  for (const auto& stage : chain.stages) {
    const auto path = stage_manifest_path(dir, stage.index);
    write_checkpoint(stage_checkpoint(stage, chain), path);
    written.push_back(path);
    written.push_back(path.parent_path() / "manifest.bin");
  }
  return written;
}

inline GoGANChain load_chain(const std::filesystem::path& dir) {
  GoGANChain chain;
  for (std::size_t k = 1;; ++k) {
    const auto path = stage_manifest_path(dir, k);
    if (!std::filesystem::exists(path)) break;
    const Checkpoint ckpt = read_checkpoint(path);
    if (k == 1) {
      ArchitectureSpec a;
      a.data_dim = std::stoull(ckpt.get("data_dim"));
      a.latent_dim = std::stoull(ckpt.get("latent_dim"));
      a.generator_hidden = parse_sizes(ckpt.get("generator_hidden"));
      a.critic_hidden = parse_sizes(ckpt.get("critic_hidden"));
      a.leaky_slope = parse_real(ckpt.get("leaky_slope"));
      a.image_output = ckpt.get("image_output") == "1";
      a.prior = parse_prior(ckpt.get("prior"));
      chain.arch = a;
      chain.lambda1 = parse_real(ckpt.get("lambda1"));
      chain.lambda2 = parse_real(ckpt.get("lambda2"));
    }
    if (std::stoull(ckpt.get("stage")) != k) throw FormatError(path.string() + ": stage index mismatch");
    Stage s;
    s.index = k;
    s.epsilon = parse_real(ckpt.get("epsilon"));
    s.frozen = ckpt.get("frozen") == "1";
    s.generator.net = Mlp::zeros(chain.arch.generator_spec());
    s.critic.net = Mlp::zeros(chain.arch.critic_spec());
    ckpt.load_params(s.generator.net.params(), "generator/");
    ckpt.load_params(s.critic.net.params(), "critic/");
    chain.stages.push_back(std::move(s));
  }
  if (chain.stages.empty()) throw UsageError("no stage checkpoints under '" + dir.string() + "'");
  chain.gap_trace.resize(chain.stages.size());
  return chain;
}

inline std::string gap_trace_csv(const std::vector<GapRecord>& trace, std::size_t stage) {
  std::string out = "iteration,stage,gamma\n";
  for (const auto& r : trace) {
    out += std::to_string(r.iteration) + "," + std::to_string(stage) + "," + format_real(r.gamma) + "\n";
  }
  return out;
}

inline std::vector<GapRecord> parse_gap_trace_csv(const std::string& text, const std::string& where) {
  std::vector<GapRecord> trace;
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  if (trim(line) != "iteration,stage,gamma") throw ParseError(where + ": unexpected gap trace header");
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 3) throw ParseError(where + ":" + std::to_string(lineno) + ": expected 3 fields");
    try {
      trace.push_back({std::stoull(f[0]), parse_real(f[2])});
    } catch (const std::exception& e) {
      throw ParseError(where + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return trace;
}

}  // namespace gogan
