// gogan: train, complete, theory, report, verify-manifest.
// Exit codes: 0 success, 1 manifest verification failed, 2 config/usage,
// 3 numeric failure.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "gogan/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

gogan::LogLevel log_level_from_env() {
  const char* env = std::getenv("GOGAN_LOG_LEVEL");
  if (!env || !*env) return gogan::LogLevel::info;
  const std::string v(env);
  if (v == "error") return gogan::LogLevel::error;
  if (v == "info") return gogan::LogLevel::info;
  if (v == "debug") return gogan::LogLevel::debug;
  throw gogan::ConfigError("GOGAN_LOG_LEVEL must be error, info or debug (got '" + v + "')");
}

gogan::LogSink make_sink(gogan::LogLevel level) {
  auto logger = spdlog::stderr_color_mt("gogan");
  logger->set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
  switch (level) {
    case gogan::LogLevel::error: logger->set_level(spdlog::level::err); break;
    case gogan::LogLevel::info: logger->set_level(spdlog::level::info); break;
    case gogan::LogLevel::debug: logger->set_level(spdlog::level::debug); break;
  }
  return [logger](gogan::LogLevel l, const std::string& msg) {
    switch (l) {
      case gogan::LogLevel::error: logger->error(msg); break;
      case gogan::LogLevel::info: logger->info(msg); break;
      case gogan::LogLevel::debug: logger->debug(msg); break;
    }
  };
}

struct CommonFlags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool config_required) {
  auto* opt = cmd->add_option("--config", f.config, "experiment config file");
  if (config_required) opt->required();
  cmd->add_option("--out", f.out, "output directory (overrides run.out_dir)");
  cmd->add_option("--seed", f.seed, "master seed (overrides run.seed)");
  cmd->add_option("--workers", f.workers, "worker threads for completion (overrides run.workers)")
      ->check(CLI::PositiveNumber);
}

gogan::ExperimentConfig resolve_config(const CommonFlags& f) {
  gogan::ExperimentConfig cfg = f.config.empty() ? gogan::ExperimentConfig{} : gogan::load_config(f.config);
  if (!f.out.empty()) cfg.out_dir = f.out;
  if (f.seed) cfg.seed = *f.seed;
  if (f.workers) cfg.workers = *f.workers;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Staged margin GAN training, completion evaluation and gap-reduction checks"};
  app.set_version_flag("--version", std::string(gogan::kVersion));
  app.require_subcommand(1);

  CommonFlags train_flags, complete_flags, theory_flags;
  std::string checkpoints, chain_dir, report_dir, verify_target;

  auto* train = app.add_subcommand("train", "train a stage chain");
  add_common(train, train_flags, true);

  auto* complete = app.add_subcommand("complete", "evaluate trained stages by image completion");
  add_common(complete, complete_flags, true);
  complete->add_option("--checkpoints", checkpoints, "checkpoint directory (overrides completion.checkpoint_dir)");

  auto* theory = app.add_subcommand("theory", "randomized sweep of the gap-reduction identities");
  add_common(theory, theory_flags, false);
  theory->add_option("--chain", chain_dir, "trained checkpoint directory for empirical residuals");

  auto* report = app.add_subcommand("report", "aggregate a finished run into plot-ready CSVs");
  report->add_option("run_dir", report_dir, "run directory containing manifest.train.txt")->required();

  auto* verify = app.add_subcommand("verify-manifest", "re-check manifest checksums");
  verify->add_option("path", verify_target, "manifest file or run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    const gogan::LogSink sink = make_sink(log_level_from_env());

    if (*train) {
      const auto cfg = resolve_config(train_flags);
      const auto r = gogan::run_train(cfg, sink);
      for (std::size_t k = 0; k < r.final_epoch_gap.size(); ++k) {
        std::cout << "stage " << k + 1 << " final-epoch mean gamma " << gogan::format_real(r.final_epoch_gap[k]) << "\n";
      }
      if (r.ordering) std::cout << "ordering " << (r.ordering->satisfied() ? "satisfied" : "violated") << "\n";
      std::cout << "manifest " << r.manifest.string() << "\n";
    } else if (*complete) {
      auto cfg = resolve_config(complete_flags);
      if (!checkpoints.empty()) cfg.completion.checkpoint_dir = checkpoints;
      const auto r = gogan::run_complete(cfg, sink);
      std::cout << r.summary.table_text();
      std::cout << "manifest " << r.manifest.string() << "\n";
    } else if (*theory) {
      auto cfg = resolve_config(theory_flags);
      if (!chain_dir.empty()) {
        if (!std::filesystem::exists(chain_dir)) throw gogan::ConfigError("--chain directory not found: " + chain_dir);
        cfg.theory.chain_dir = chain_dir;
      }
      const auto r = gogan::run_theory(cfg, sink);
      std::cout << gogan::sweep_summary_text(r.sweep);
      if (r.empirical) std::cout << gogan::empirical_geometry_text(*r.empirical);
      std::cout << "manifest " << r.manifest.string() << "\n";
      if (!r.sweep.all_pass()) return kExitNumeric;
    } else if (*report) {
      const auto r = gogan::run_report(report_dir, sink);
      for (std::size_t k = 0; k < r.final_gamma.size(); ++k) {
        std::cout << "stage " << k + 1 << " final gamma " << gogan::format_real(r.final_gamma[k]) << "\n";
      }
      std::cout << "manifest " << r.manifest.string() << "\n";
    } else if (*verify) {
      const auto problems = gogan::verify_manifests(verify_target);
      for (const auto& p : problems) std::cout << p << "\n";
      std::cout << (problems.empty() ? "OK" : "FAILED") << "\n";
      return problems.empty() ? kExitOk : kExitVerifyFailed;
    }
  } catch (const gogan::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const gogan::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitOk;
}
