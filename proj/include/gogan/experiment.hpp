#pragma once

// Config-driven runs behind the command-line tool. Each run writes its
// artifacts under the output directory plus a manifest.<command>.txt.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "gogan/completion.hpp"
#include "gogan/config.hpp"
#include "gogan/data.hpp"
#include "gogan/manifest.hpp"
#include "gogan/text.hpp"
#include "gogan/theory.hpp"
#include "gogan/trainer.hpp"

namespace gogan {

enum class LogLevel { error = 0, info = 1, debug = 2 };

using LogSink = std::function<void(LogLevel, const std::string&)>;

namespace detail {

inline void log(const LogSink& sink, LogLevel level, const std::string& msg) {
  if (sink) sink(level, msg);
}

inline std::string fraction_label(double f) {
  std::ostringstream s;
  s << std::setw(2) << std::setfill('0') << std::llround(f * 100.0);
  return s.str();
}

}  // namespace detail

inline std::filesystem::path checkpoint_dir_for(const ExperimentConfig& cfg) {
  return cfg.completion.checkpoint_dir.empty() ? cfg.out_dir / "checkpoints" : cfg.completion.checkpoint_dir;
}

inline std::filesystem::path gap_trace_path(const std::filesystem::path& dir, std::size_t stage) {
  return dir / ("gap_trace_stage" + std::to_string(stage) + ".csv");
}

// Full dataset named by the [data] section.
inline Dataset build_dataset(const ExperimentConfig& cfg) {
  const DataSettings& d = cfg.data;
  if (d.source == "mixture") {
    return sample_gaussian_mixture(MixtureSpec::ring(d.mixture_modes, d.mixture_radius, d.mixture_sigma), d.count,
                                   derive_seed(cfg.seed, "data/mixture"));
  }
  if (d.source == "procedural") return gen_procedural_images(d.count, d.image_size, derive_seed(cfg.seed, "data/images"));
  return load_dataset(d.path, d.mode);
}

struct DataSplit {
  Dataset train;
  Dataset test;
};

inline DataSplit build_split(const ExperimentConfig& cfg) {
  auto [train, test] = split_dataset(build_dataset(cfg), cfg.data.train_fraction, derive_seed(cfg.seed, "data/split"));
  return {std::move(train), std::move(test)};
}

inline TrainConfig effective_train_config(const ExperimentConfig& cfg) {
  TrainConfig t = cfg.train;
  t.seed = cfg.seed;
  return t;
}

// Held-out evaluation batch: up to eval.samples test rows plus matching noise.
struct EvalBatch {
  Tensor real;
  Tensor noise;
};

inline EvalBatch eval_batch(const ExperimentConfig& cfg, const Dataset& test, const ArchitectureSpec& arch) {
  if (test.size() == 0) throw EmptyDatasetError("no held-out samples for evaluation");
  const std::size_t n = std::min(cfg.eval.samples, test.size());
  NoisePrior prior(arch.prior, arch.latent_dim, derive_seed(cfg.seed, "eval/noise"));
  return {test.samples.slice_rows(0, n), sample_noise(prior, static_cast<long long>(n))};
}

// ---------------------------------------------------------------------------
// train

struct TrainOutcome {
  GoGANChain chain;
  std::size_t iterations_per_epoch = 0;
  std::vector<double> final_epoch_gap;  // per stage
  std::optional<OrderingReport> ordering;
  std::filesystem::path manifest;
};

inline TrainOutcome run_train(const ExperimentConfig& cfg, const LogSink& sink = {}) {
  cfg.validate();
  const auto& out = cfg.out_dir;
  std::filesystem::create_directories(out);
  PhaseClock clock;
  std::vector<std::filesystem::path> outputs;

  clock.start("data");
  const DataSplit split = build_split(cfg);
  write_dataset_manifest(out / "dataset.txt", split.train, cfg.seed);
  outputs.push_back(out / "dataset.txt");
  detail::log(sink, LogLevel::info,
              "data: " + std::to_string(split.train.size()) + " train / " + std::to_string(split.test.size()) + " test");

  clock.start("train");
  const ArchitectureSpec arch = resolved_architecture(cfg, split.train.dim());
  const TrainConfig tcfg = effective_train_config(cfg);
  TrainOutcome result;
  result.iterations_per_epoch = tcfg.iterations_for(split.train.size());
  const std::size_t log_every = std::max<std::size_t>(1, result.iterations_per_epoch);
  TrainObserver observer = [&](const TrainEvent& ev) {
    if (ev.kind != TrainEvent::Kind::gap_logged) return;
    if (ev.iteration % log_every == 0) {
      detail::log(sink, LogLevel::info, "stage " + std::to_string(ev.stage) + " iteration " +
                                            std::to_string(ev.iteration) + " gamma " + format_real(ev.gamma));
    }
    detail::log(sink, LogLevel::debug, "stage " + std::to_string(ev.stage) + " it " + std::to_string(ev.iteration) +
                                           " gamma " + format_real(ev.gamma));
  };
  result.chain = train_chain(split.train, arch, tcfg, cfg.stages, observer);

  clock.start("evaluate");
  for (std::size_t k = 1; k <= cfg.stages; ++k) {
    const auto& trace = result.chain.gap_trace[k - 1];
    result.final_epoch_gap.push_back(final_epoch_mean_gap(trace, result.iterations_per_epoch));
    const auto path = gap_trace_path(out, k);
    write_file_atomic(path, gap_trace_csv(trace, k));
    outputs.push_back(path);
  }
  {
    std::string text;
    if (cfg.stages >= 2) {
      const EvalBatch eval = eval_batch(cfg, split.test, arch);
      result.ordering = verify_ordering(result.chain, eval.real, eval.noise, cfg.eval.ordering_slack);
      text = result.ordering->to_text();
    } else {
      text = "single stage: no adjacent pairs to order\n";
    }
    std::ostringstream gaps;
    for (std::size_t k = 0; k < result.final_epoch_gap.size(); ++k) {
      gaps << "final_epoch_mean_gamma stage " << k + 1 << " " << format_real(result.final_epoch_gap[k]) << "\n";
    }
    write_file_atomic(out / "ordering.txt", text + gaps.str());
    outputs.push_back(out / "ordering.txt");
  }

  clock.start("checkpoint");
  for (const auto& p : save_chain(result.chain, out / "checkpoints")) outputs.push_back(p);
  clock.stop();

  RunManifest manifest;
  manifest.command = "train";
  manifest.phases = clock.phases();
  manifest.config = cfg.to_text();
  result.manifest = write_run_manifest(out, manifest, outputs);
  return result;
}

// ---------------------------------------------------------------------------
// complete

struct CompletionRow {
  std::string model;  // "occluded" or "stage<k>"
  std::size_t task = 0;
  std::size_t image = 0;
  double fraction = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
  double contextual = 0.0;
  double perceptual = 0.0;
  double total = 0.0;
  bool observed_preserved = true;  // y_completed equals y on every observed pixel
  Tensor completed;
};

struct CompletionSummary {
  std::vector<double> fractions;
  std::vector<std::string> models;
  // mean[model][fraction index]
  std::map<std::string, std::vector<double>> mean_psnr, mean_ssim;

  std::string table_text() const;
  std::string table_csv() const;
};

inline std::string CompletionSummary::table_text() const {
  std::ostringstream out;
  out << std::left << std::setw(18) << "model/metric";
  for (double f : fractions) out << std::right << std::setw(10) << (detail::fraction_label(f) + "%");
  out << "\n";
  auto emit = [&](const std::map<std::string, std::vector<double>>& m, const char* metric, int precision) {
    for (const auto& model : models) {
      out << std::left << std::setw(18) << (model + " " + metric);
      for (double v : m.at(model)) out << std::right << std::setw(10) << std::fixed << std::setprecision(precision) << v;
      out << "\n";
    }
  };
  emit(mean_psnr, "PSNR", 2);
  emit(mean_ssim, "SSIM", 4);
  return out.str();
}

inline std::string CompletionSummary::table_csv() const {
  std::string out = "model,metric";
  for (double f : fractions) out += "," + format_real(f);
  out += "\n";
  auto emit = [&](const std::map<std::string, std::vector<double>>& m, const char* metric) {
    for (const auto& model : models) {
      out += model + "," + metric;
      for (double v : m.at(model)) out += "," + format_real(v);
      out += "\n";
    }
  };
  emit(mean_psnr, "psnr");
  emit(mean_ssim, "ssim");
  return out;
}

struct CompleteOutcome {
  std::vector<CompletionRow> rows;
  CompletionSummary summary;
  std::filesystem::path manifest;
};

inline bool observed_pixels_preserved(const Tensor& completed, const CompletionTask& task) {
  for (std::size_t i = 0; i < completed.size(); ++i) {
    if (task.mask.values[i] != 0.0 && completed[i] != task.y[i]) return false;
  }
  return true;
}

inline CompleteOutcome run_complete(const ExperimentConfig& cfg, const LogSink& sink = {}) {
  cfg.validate();
  if (cfg.data.mode != DataMode::images) throw ConfigError("complete requires data.mode = images");
  const auto ckpt_dir = checkpoint_dir_for(cfg);
  if (!std::filesystem::exists(stage_manifest_path(ckpt_dir, 1))) {
    throw ConfigError("no stage checkpoints under '" + ckpt_dir.string() + "'");
  }
  const auto& out = cfg.out_dir;
  std::filesystem::create_directories(out);
  PhaseClock clock;
  std::vector<std::filesystem::path> outputs;

  clock.start("load");
  const GoGANChain chain = load_chain(ckpt_dir);
  const DataSplit split = build_split(cfg);
  if (split.test.size() == 0) throw ConfigError("no held-out test images to complete");
  if (split.test.dim() != chain.arch.data_dim) throw ConfigError("checkpoint data_dim does not match the dataset");
  const std::size_t n_images =
      cfg.completion.max_images == 0 ? split.test.size() : std::min(cfg.completion.max_images, split.test.size());
  const Tensor reference = split.train.samples.slice_rows(0, std::min(cfg.completion.reference_batch, split.train.size()));
  std::vector<double> ref_scores;
  for (const auto& stage : chain.stages) ref_scores.push_back(mean_score(stage.critic, reference));

  CompleteOutcome result;
  auto& summary = result.summary;
  summary.fractions = cfg.completion.fractions;
  summary.models.push_back("occluded");
  for (const auto& stage : chain.stages) summary.models.push_back("stage" + std::to_string(stage.index));

  // One job per (fraction, image, stage); baseline rows are cheap and filled inline.
  struct Job {
    std::size_t fraction_index, image, stage;
  };
  std::vector<Job> jobs;
  std::vector<CompletionTask> tasks;  // indexed fraction_index * n_images + image
  for (std::size_t fi = 0; fi < summary.fractions.size(); ++fi) {
    const Mask mask = make_center_mask(split.test.height, split.test.width, summary.fractions[fi]);
    for (std::size_t i = 0; i < n_images; ++i) {
      tasks.push_back(CompletionTask::from_image(split.test.image(i), mask));
      for (std::size_t s = 0; s < chain.stages.size(); ++s) jobs.push_back({fi, i, s});
    }
  }

  clock.start("complete");
  std::vector<CompletionRow> stage_rows(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr failure;
  auto worker = [&] {
    while (true) {
      const std::size_t j = next.fetch_add(1);
      if (j >= jobs.size()) return;
      {
        std::lock_guard lock(error_mutex);
        if (failure) return;
      }
      try {
        const Job& job = jobs[j];
        const std::size_t t = job.fraction_index * n_images + job.image;
        const Stage& stage = chain.stages[job.stage];
        CompletionOptions opt;
        opt.lambda = cfg.completion.lambda;
        opt.steps = cfg.completion.steps;
        opt.lr_z = cfg.completion.lr_z;
        opt.restarts = cfg.completion.restarts;
        opt.ref_score = ref_scores[job.stage];
        opt.prior = chain.arch.prior;
        // The same starts for every stage on a given task.
        opt.seed = derive_seed(cfg.seed, "complete/task" + std::to_string(t));
        const CompletionResult r = complete(tasks[t], stage.generator, stage.critic, opt);
        stage_rows[j] = {"stage" + std::to_string(stage.index), t, job.image, summary.fractions[job.fraction_index],
                         r.psnr, r.ssim, r.contextual, r.perceptual, r.total,
                         observed_pixels_preserved(r.y_completed, tasks[t]), r.y_completed};
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  const std::size_t n_workers = std::max<std::size_t>(1, std::min(cfg.workers, jobs.size()));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  detail::log(sink, LogLevel::info, "completed " + std::to_string(jobs.size()) + " tasks");

  clock.start("write");
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const Tensor baseline = occluded_baseline(tasks[t]);
    result.rows.push_back({"occluded", t, t % n_images, summary.fractions[t / n_images],
                           psnr(baseline, tasks[t].ground_truth), ssim(baseline, tasks[t].ground_truth), 0.0, 0.0, 0.0,
                           observed_pixels_preserved(baseline, tasks[t]), baseline});
  }
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const auto& row = stage_rows[j];
    result.rows.push_back(row);
    const auto dir = out / "completions" / row.model / ("f" + detail::fraction_label(row.fraction));
    std::filesystem::create_directories(dir);
    std::ostringstream name;
    name << "img_" << std::setw(6) << std::setfill('0') << row.image << ".pgm";
    write_pgm(dir / name.str(), row.completed);
    outputs.push_back(dir / name.str());
  }

  for (const auto& model : summary.models) {
    std::vector<double> p(summary.fractions.size(), 0.0), s(summary.fractions.size(), 0.0);
    for (const auto& row : result.rows) {
      if (row.model != model) continue;
      const auto fi = static_cast<std::size_t>(
          std::find(summary.fractions.begin(), summary.fractions.end(), row.fraction) - summary.fractions.begin());
      p[fi] += row.psnr;
      s[fi] += row.ssim;
    }
    for (auto& v : p) v /= static_cast<double>(n_images);
    for (auto& v : s) v /= static_cast<double>(n_images);
    summary.mean_psnr[model] = p;
    summary.mean_ssim[model] = s;
  }

  std::string csv = "model,task,image,fraction,psnr,ssim,contextual,perceptual,total\n";
  for (const auto& r : result.rows) {
    csv += r.model + "," + std::to_string(r.task) + "," + std::to_string(r.image) + "," + format_real(r.fraction) + "," +
           format_real(r.psnr) + "," + format_real(r.ssim) + "," + format_real(r.contextual) + "," +
           format_real(r.perceptual) + "," + format_real(r.total) + "\n";
  }
  write_file_atomic(out / "completion.csv", csv);
  write_file_atomic(out / "completion_summary.csv", summary.table_csv());
  write_file_atomic(out / "completion_summary.txt", summary.table_text());
  for (const char* f : {"completion.csv", "completion_summary.csv", "completion_summary.txt"}) outputs.push_back(out / f);
  clock.stop();

  RunManifest manifest;
  manifest.command = "complete";
  manifest.phases = clock.phases();
  manifest.config = cfg.to_text();
  result.manifest = write_run_manifest(out, manifest, outputs);
  return result;
}

// ---------------------------------------------------------------------------
// theory

struct TheoryOutcome {
  SweepSummary sweep;
  std::optional<EmpiricalGeometry> empirical;
  std::filesystem::path manifest;
};

inline std::string sweep_summary_text(const SweepSummary& s) {
  std::ostringstream out;
  out << "configs " << s.rows.size() << "\n";
  out << "feasible " << s.feasible << "\n";
  out << "recursion " << s.recursion_pass << "/" << s.feasible << "\n";
  out << "closed_form " << s.identity_pass << "/" << s.feasible << "\n";
  out << "half_bound " << s.bound_pass << "/" << s.feasible << "\n";
  out << "monotone " << s.monotone_pass << "/" << s.feasible << "\n";
  out << "result " << (s.all_pass() ? "PASS" : "FAIL") << "\n";
  return out.str();
}

inline TheoryOutcome run_theory(const ExperimentConfig& cfg, const LogSink& sink = {}) {
  cfg.validate();
  const auto& out = cfg.out_dir;
  std::filesystem::create_directories(out);
  PhaseClock clock;
  std::vector<std::filesystem::path> outputs;
  TheoryOutcome result;

  clock.start("sweep");
  result.sweep = run_theory_sweep(cfg.theory.configs, cfg.seed, cfg.theory.max_stages);
  write_file_atomic(out / "theory_sweep.csv", sweep_csv(result.sweep));
  write_file_atomic(out / "theory_summary.txt", sweep_summary_text(result.sweep));
  outputs.push_back(out / "theory_sweep.csv");
  outputs.push_back(out / "theory_summary.txt");
  detail::log(sink, LogLevel::info, "theory sweep: " + std::string(result.sweep.all_pass() ? "all identities hold" : "FAILURES"));

  if (!cfg.theory.chain_dir.empty()) {
    clock.start("empirical");
    const GoGANChain chain = load_chain(cfg.theory.chain_dir);
    const DataSplit split = build_split(cfg);
    if (split.test.dim() != chain.arch.data_dim) throw ConfigError("theory.chain_dir data_dim does not match the dataset");
    const EvalBatch eval = eval_batch(cfg, split.test, chain.arch);
    result.empirical = empirical_geometry(chain, eval.real, eval.noise);
    write_file_atomic(out / "empirical_geometry.txt", empirical_geometry_text(*result.empirical));
    outputs.push_back(out / "empirical_geometry.txt");
  }
  clock.stop();

  RunManifest manifest;
  manifest.command = "theory";
  manifest.phases = clock.phases();
  manifest.config = cfg.to_text();
  result.manifest = write_run_manifest(out, manifest, outputs);
  return result;
}

// ---------------------------------------------------------------------------
// report

// Mean of consecutive non-overlapping windows of `stride` entries; a
// trailing partial window is dropped.
inline std::vector<GapRecord> smooth_trace(const std::vector<GapRecord>& trace, std::size_t stride) {
  if (stride == 0) throw ConfigError("smoothing stride must be positive");
  std::vector<GapRecord> out;
  for (std::size_t start = 0; start + stride <= trace.size(); start += stride) {
    double s = 0.0;
    for (std::size_t i = start; i < start + stride; ++i) s += trace[i].gamma;
    out.push_back({trace[start + stride - 1].iteration, s / static_cast<double>(stride)});
  }
  return out;
}

struct ReportOutcome {
  std::vector<double> final_gamma;  // last logged Gamma per stage
  std::size_t curve_rows = 0;
  std::filesystem::path manifest;
};

inline ReportOutcome run_report(const std::filesystem::path& run_dir, const LogSink& sink = {}) {
  const auto train_manifest = manifest_path(run_dir, "train");
  if (!std::filesystem::exists(train_manifest)) {
    throw ConfigError("no train manifest in '" + run_dir.string() + "'");
  }
  PhaseClock clock;
  clock.start("report");
  const RunManifest m = read_run_manifest(train_manifest);
  const ExperimentConfig cfg = parse_config(m.config, train_manifest.string() + " (config snapshot)");
  const std::size_t stride = cfg.report.stride;
  const auto out = run_dir / "report";
  std::filesystem::create_directories(out);
  std::vector<std::filesystem::path> outputs;
  ReportOutcome result;

  std::string curve = "stage,iteration,global_iteration,gamma_smoothed\n";
  std::ostringstream summary;
  summary << "stride " << stride << "\n";
  std::size_t offset = 0;
  std::vector<std::size_t> stage_end;
  for (std::size_t k = 1; k <= cfg.stages; ++k) {
    const auto path = gap_trace_path(run_dir, k);
    const auto trace = parse_gap_trace_csv(read_text_file(path), path.string());
    if (trace.empty()) throw FormatError(path.string() + ": empty gap trace");
    for (const auto& r : smooth_trace(trace, stride)) {
      curve += std::to_string(k) + "," + std::to_string(r.iteration) + "," + std::to_string(offset + r.iteration) + "," +
               format_real(r.gamma) + "\n";
      ++result.curve_rows;
    }
    result.final_gamma.push_back(trace.back().gamma);
    summary << "stage " << k << " logged " << trace.size() << " final_gamma " << format_real(trace.back().gamma) << "\n";
    offset += trace.size();
    stage_end.push_back(offset);
  }
  write_file_atomic(out / "gap_curve.csv", curve);
  outputs.push_back(out / "gap_curve.csv");

  // Completion metrics are available per stage checkpoint, so the metric
  // curve has one point per stage at the iteration that stage finished.
  const auto summary_csv = run_dir / "completion_summary.csv";
  if (std::filesystem::exists(summary_csv)) {
    std::string metric = "stage,global_iteration,fraction,psnr,ssim\n";
    std::map<std::string, std::vector<std::string>> rows;
    std::vector<std::string> header;
    std::size_t lineno = 0;
    for (const auto& line : split(read_text_file(summary_csv), '\n')) {
      if (line.empty()) continue;
      auto fields = split(line, ',');
      if (lineno++ == 0) {
        header = fields;
        continue;
      }
      rows[fields.at(0) + "," + fields.at(1)] = fields;
    }
    for (std::size_t k = 1; k <= cfg.stages; ++k) {
      const auto p = rows.find("stage" + std::to_string(k) + ",psnr");
      const auto s = rows.find("stage" + std::to_string(k) + ",ssim");
      if (p == rows.end() || s == rows.end()) continue;
      for (std::size_t c = 2; c < header.size(); ++c) {
        metric += std::to_string(k) + "," + std::to_string(stage_end[k - 1]) + "," + header[c] + "," + p->second.at(c) +
                  "," + s->second.at(c) + "\n";
      }
    }
    write_file_atomic(out / "metric_curve.csv", metric);
    outputs.push_back(out / "metric_curve.csv");
    summary << "completion summary\n" << read_text_file(run_dir / "completion_summary.txt");
  }
  write_file_atomic(out / "summary.txt", summary.str());
  outputs.push_back(out / "summary.txt");
  clock.stop();
  detail::log(sink, LogLevel::info, "report: " + std::to_string(result.curve_rows) + " smoothed rows");

  RunManifest rm;
  rm.command = "report";
  rm.phases = clock.phases();
  rm.config = m.config;
  result.manifest = write_run_manifest(run_dir, rm, outputs);
  return result;
}

// ---------------------------------------------------------------------------
// verify-manifest

// Verifies one manifest file, or every manifest.*.txt in a directory.
inline std::vector<std::string> verify_manifests(const std::filesystem::path& target) {
  std::vector<std::filesystem::path> files;
  if (std::filesystem::is_directory(target)) {
    for (const auto& e : std::filesystem::directory_iterator(target)) {
      const std::string name = e.path().filename().string();
      if (name.starts_with("manifest.") && name.ends_with(".txt")) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw ConfigError("no manifest.*.txt files in '" + target.string() + "'");
  } else if (std::filesystem::is_regular_file(target)) {
    files.push_back(target);
  } else {
    throw ConfigError("manifest path not found: " + target.string());
  }
  std::vector<std::string> problems;
  for (const auto& f : files) {
    for (const auto& p : verify_run_manifest(f)) problems.push_back(f.filename().string() + ": " + p);
  }
  return problems;
}

}  // namespace gogan
