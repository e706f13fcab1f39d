#pragma once

// Experiment configuration: a flat "key = value" text format grouped into
// [sections]. Blank lines and lines starting with '#' or ';' are ignored.
// Every key must be known; duplicates are rejected.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "gogan/completion.hpp"
#include "gogan/data.hpp"
#include "gogan/errors.hpp"
#include "gogan/networks.hpp"
#include "gogan/text.hpp"
#include "gogan/trainer.hpp"

namespace gogan {

struct DataSettings {
  DataMode mode = DataMode::points2d;
  std::string source = "mixture";  // mixture | procedural | file
  std::filesystem::path path;      // source = file
  long long count = 25600;
  std::size_t image_size = 16;
  std::size_t mixture_modes = 8;
  double mixture_radius = 2.0;
  double mixture_sigma = 0.02;
  double train_fraction = 0.9;
};

struct EvalSettings {
  double ordering_slack = 0.05;
  std::size_t samples = 1024;
};

struct CompletionSettings {
  std::vector<double> fractions = kOcclusionLevels;
  double lambda = 0.1;
  std::size_t steps = 1000;
  double lr_z = 0.01;
  std::size_t restarts = 3;
  std::size_t max_images = 0;        // 0 = the whole held-out split
  std::size_t reference_batch = 256;
  std::filesystem::path checkpoint_dir;  // empty = <out>/checkpoints
};

struct TheorySettings {
  std::size_t configs = 1000;
  std::size_t max_stages = 8;
  std::filesystem::path chain_dir;  // optional trained chain for empirical residuals
};

struct ReportSettings {
  std::size_t stride = 10;
};

struct ExperimentConfig {
  std::string name = "gogan";
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "out";
  std::size_t workers = 1;
  std::size_t stages = 2;
  DataSettings data;
  ArchitectureSpec arch;
  TrainConfig train;
  EvalSettings eval;
  CompletionSettings completion;
  TheorySettings theory;
  ReportSettings report;
  std::filesystem::path source_file;  // empty when built in code

  void validate() const;
  std::string to_text() const;
};

namespace detail {

inline std::uint64_t parse_u64(const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
    throw ParseError("expected a nonnegative integer, got '" + v + "'");
  }
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw ParseError("integer out of range: '" + v + "'");
  }
}

inline std::vector<double> parse_real_list(const std::string& v) {
  std::vector<double> out;
  for (const auto& item : split(v, ',')) out.push_back(parse_real(item));
  return out;
}

inline std::string real_list(const std::vector<double>& v) {
  return join(v, ",", [](double x) { return format_real(x); });
}

struct ConfigKey {
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

// Table of every accepted "section.key"; ordered so that to_text is stable.
inline const std::vector<std::pair<std::string, ConfigKey>>& config_keys() {
  using C = ExperimentConfig;
  auto u = [](auto member) {
    return ConfigKey{[member](C& c, const std::string& v) { member(c) = static_cast<std::remove_reference_t<decltype(member(c))>>(parse_u64(v)); },
                     [member](const C& c) { return std::to_string(member(c)); }};
  };
  auto r = [](auto member) {
    return ConfigKey{[member](C& c, const std::string& v) { member(c) = parse_real(v); },
                     [member](const C& c) { return format_real(member(c)); }};
  };
  auto p = [](auto member) {
    return ConfigKey{[member](C& c, const std::string& v) { member(c) = v; },
                     [member](const C& c) { return member(c).generic_string(); }};
  };
  auto sizes = [](auto member) {
    return ConfigKey{[member](C& c, const std::string& v) { member(c) = parse_sizes(v); },
                     [member](const C& c) { return join_sizes(member(c)); }};
  };

  static const std::vector<std::pair<std::string, ConfigKey>> keys = {
      {"run.name", {[](C& c, const std::string& v) { c.name = v; }, [](const C& c) { return c.name; }}},
      {"run.seed", u([](auto& c) -> auto& { return c.seed; })},
      {"run.out_dir", p([](auto& c) -> auto& { return c.out_dir; })},
      {"run.workers", u([](auto& c) -> auto& { return c.workers; })},
      {"run.stages", u([](auto& c) -> auto& { return c.stages; })},

      {"data.mode", {[](C& c, const std::string& v) { c.data.mode = parse_mode(v); },
                     [](const C& c) { return std::string(mode_name(c.data.mode)); }}},
      {"data.source", {[](C& c, const std::string& v) { c.data.source = v; }, [](const C& c) { return c.data.source; }}},
      {"data.path", p([](auto& c) -> auto& { return c.data.path; })},
      {"data.count", {[](C& c, const std::string& v) { c.data.count = static_cast<long long>(parse_u64(v)); },
                      [](const C& c) { return std::to_string(c.data.count); }}},
      {"data.image_size", u([](auto& c) -> auto& { return c.data.image_size; })},
      {"data.mixture_modes", u([](auto& c) -> auto& { return c.data.mixture_modes; })},
      {"data.mixture_radius", r([](auto& c) -> auto& { return c.data.mixture_radius; })},
      {"data.mixture_sigma", r([](auto& c) -> auto& { return c.data.mixture_sigma; })},
      {"data.train_fraction", r([](auto& c) -> auto& { return c.data.train_fraction; })},

      {"model.latent_dim", u([](auto& c) -> auto& { return c.arch.latent_dim; })},
      {"model.generator_hidden", sizes([](auto& c) -> auto& { return c.arch.generator_hidden; })},
      {"model.critic_hidden", sizes([](auto& c) -> auto& { return c.arch.critic_hidden; })},
      {"model.leaky_slope", r([](auto& c) -> auto& { return c.arch.leaky_slope; })},
      {"model.prior", {[](C& c, const std::string& v) { c.arch.prior = parse_prior(v); },
                       [](const C& c) { return std::string(prior_name(c.arch.prior)); }}},

      {"train.batch_size", u([](auto& c) -> auto& { return c.train.batch_size; })},
      {"train.n_critic", u([](auto& c) -> auto& { return c.train.n_critic; })},
      {"train.lr", r([](auto& c) -> auto& { return c.train.lr; })},
      {"train.rms_decay", r([](auto& c) -> auto& { return c.train.rms_decay; })},
      {"train.rms_eps", r([](auto& c) -> auto& { return c.train.rms_eps; })},
      {"train.clip", r([](auto& c) -> auto& { return c.train.clip; })},
      {"train.epochs", u([](auto& c) -> auto& { return c.train.epochs; })},
      {"train.iterations_per_epoch", u([](auto& c) -> auto& { return c.train.iterations_per_epoch; })},
      {"train.lambda1", r([](auto& c) -> auto& { return c.train.lambda1; })},
      {"train.lambda2", r([](auto& c) -> auto& { return c.train.lambda2; })},
      {"train.epsilon", r([](auto& c) -> auto& { return c.train.epsilon; })},

      {"eval.ordering_slack", r([](auto& c) -> auto& { return c.eval.ordering_slack; })},
      {"eval.samples", u([](auto& c) -> auto& { return c.eval.samples; })},

      {"completion.fractions", {[](C& c, const std::string& v) { c.completion.fractions = parse_real_list(v); },
                                [](const C& c) { return real_list(c.completion.fractions); }}},
      {"completion.lambda", r([](auto& c) -> auto& { return c.completion.lambda; })},
      {"completion.steps", u([](auto& c) -> auto& { return c.completion.steps; })},
      {"completion.lr_z", r([](auto& c) -> auto& { return c.completion.lr_z; })},
      {"completion.restarts", u([](auto& c) -> auto& { return c.completion.restarts; })},
      {"completion.max_images", u([](auto& c) -> auto& { return c.completion.max_images; })},
      {"completion.reference_batch", u([](auto& c) -> auto& { return c.completion.reference_batch; })},
      {"completion.checkpoint_dir", p([](auto& c) -> auto& { return c.completion.checkpoint_dir; })},

      {"theory.configs", u([](auto& c) -> auto& { return c.theory.configs; })},
      {"theory.max_stages", u([](auto& c) -> auto& { return c.theory.max_stages; })},
      {"theory.chain_dir", p([](auto& c) -> auto& { return c.theory.chain_dir; })},

      {"report.stride", u([](auto& c) -> auto& { return c.report.stride; })},
  };
  return keys;
}

inline const ConfigKey* find_key(const std::string& full) {
  for (const auto& [name, key] : config_keys()) {
    if (name == full) return &key;
  }
  return nullptr;
}

}  // namespace detail

inline void ExperimentConfig::validate() const {
  if (stages == 0) throw ConfigError("run.stages must be at least 1");
  if (workers == 0) throw ConfigError("run.workers must be at least 1");
  if (data.source != "mixture" && data.source != "procedural" && data.source != "file") {
    throw ConfigError("data.source must be mixture, procedural or file");
  }
  if (data.source == "mixture" && data.mode != DataMode::points2d) throw ConfigError("mixture data requires mode points2d");
  if (data.source == "procedural" && data.mode != DataMode::images) throw ConfigError("procedural data requires mode images");
  if (data.source == "file" && data.path.empty()) throw ConfigError("data.source = file needs data.path");
  if (data.count <= 0) throw ConfigError("data.count must be positive");
  if (data.mode == DataMode::images && data.image_size < kMinImageSize) {
    throw ConfigError("data.image_size must be at least " + std::to_string(kMinImageSize));
  }
  if (data.mixture_modes == 0) throw ConfigError("data.mixture_modes must be positive");
  if (!(data.mixture_sigma > 0.0)) throw ConfigError("data.mixture_sigma must be positive");
  if (!(data.train_fraction > 0.0 && data.train_fraction < 1.0)) throw ConfigError("data.train_fraction must lie in (0, 1)");
  if (arch.latent_dim == 0) throw ConfigError("model.latent_dim must be positive");
  if (!(arch.leaky_slope > 0.0 && arch.leaky_slope < 1.0)) throw ConfigError("model.leaky_slope must lie in (0, 1)");
  for (std::size_t w : arch.generator_hidden) if (w == 0) throw ConfigError("model.generator_hidden widths must be positive");
  for (std::size_t w : arch.critic_hidden) if (w == 0) throw ConfigError("model.critic_hidden widths must be positive");
  train.validate();
  if (!(eval.ordering_slack >= 0.0 && eval.ordering_slack < 1.0)) throw ConfigError("eval.ordering_slack must lie in [0, 1)");
  if (eval.samples == 0) throw ConfigError("eval.samples must be positive");
  if (completion.fractions.empty()) throw ConfigError("completion.fractions must not be empty");
  for (double f : completion.fractions) {
    if (!(f > 0.0 && f < 1.0)) throw ConfigError("completion.fractions entries must lie in (0, 1)");
  }
  if (completion.lambda < 0.0) throw ConfigError("completion.lambda must be nonnegative");
  if (completion.steps == 0) throw ConfigError("completion.steps must be at least 1");
  if (!(completion.lr_z > 0.0)) throw ConfigError("completion.lr_z must be positive");
  if (completion.restarts == 0) throw ConfigError("completion.restarts must be at least 1");
  if (completion.reference_batch == 0) throw ConfigError("completion.reference_batch must be positive");
  if (theory.configs == 0) throw ConfigError("theory.configs must be positive");
  if (theory.max_stages == 0) throw ConfigError("theory.max_stages must be positive");
  if (report.stride == 0) throw ConfigError("report.stride must be positive");
}

// Canonical snapshot: every key, one section header each, fixed order.
inline std::string ExperimentConfig::to_text() const {
  std::string out;
  std::string section;
  for (const auto& [name, key] : detail::config_keys()) {
    const std::string sec = name.substr(0, name.find('.'));
    if (sec != section) {
      if (!section.empty()) out += "\n";
      out += "[" + sec + "]\n";
      section = sec;
    }
    out += name.substr(sec.size() + 1) + " = " + key.get(*this) + "\n";
  }
  return out;
}

// Parses config text. Relative paths resolve against base_dir; input paths
// (data.path, completion.checkpoint_dir, theory.chain_dir) must exist.
inline ExperimentConfig parse_config(std::string_view text, const std::string& where,
                                     const std::filesystem::path& base_dir = {}) {
  ExperimentConfig cfg;
  std::string section;
  std::map<std::string, std::size_t> seen;
  std::size_t lineno = 0;
  for (const std::string& raw : split(text, '\n')) {
    ++lineno;
    const std::string line = trim(raw);
    const std::string loc = where + ":" + std::to_string(lineno);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(loc + ": malformed section header '" + line + "'");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (section.empty()) throw ConfigError(loc + ": empty section name");
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(loc + ": expected 'key = value', got '" + line + "'");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (section.empty()) throw ConfigError(loc + ": key '" + key + "' outside any section");
    const std::string full = section + "." + key;
    const detail::ConfigKey* k = detail::find_key(full);
    if (!k) throw ConfigError(loc + ": unknown key '" + full + "'");
    if (auto it = seen.find(full); it != seen.end()) {
      throw ConfigError(loc + ": duplicate key '" + full + "' (first set on line " + std::to_string(it->second) + ")");
    }
    seen.emplace(full, lineno);
    try {
      k->set(cfg, value);
    } catch (const ParseError& e) {
      throw ConfigError(loc + ": " + full + ": " + e.what());
    } catch (const ConfigError& e) {
      throw ConfigError(loc + ": " + full + ": " + e.what());
    }
  }

  auto resolve = [&](std::filesystem::path& p) {
    if (!p.empty() && p.is_relative() && !base_dir.empty()) p = base_dir / p;
  };
  auto must_exist = [&](const std::filesystem::path& p, const char* key) {
    if (!p.empty() && !std::filesystem::exists(p)) {
      throw ConfigError(where + ": " + key + " does not exist: " + p.string());
    }
  };
  resolve(cfg.out_dir);
  resolve(cfg.data.path);
  resolve(cfg.completion.checkpoint_dir);
  resolve(cfg.theory.chain_dir);
  if (cfg.data.source == "file") must_exist(cfg.data.path, "data.path");
  must_exist(cfg.completion.checkpoint_dir, "completion.checkpoint_dir");
  must_exist(cfg.theory.chain_dir, "theory.chain_dir");
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
  ExperimentConfig cfg = parse_config(read_text_file(path), path.string(), path.parent_path());
  cfg.source_file = path;
  return cfg;
}

// Derived shapes that depend on the data section.
inline ArchitectureSpec resolved_architecture(const ExperimentConfig& cfg, std::size_t data_dim) {
  ArchitectureSpec a = cfg.arch;
  a.data_dim = data_dim;
  a.image_output = cfg.data.mode == DataMode::images;
  return a;
}

}  // namespace gogan
