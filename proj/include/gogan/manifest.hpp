#pragma once

// Run manifest: config snapshot, version, per-phase wall-clock and a
// checksummed inventory of every output file, relative to the manifest's
// directory.
//
//   gogan-run-manifest 1
//   version <string>
//   command <name>
//   phase <name> <seconds>
//   file <sha256> <bytes> <relative path>
//   config-begin
//   ...verbatim config snapshot...
//   config-end

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gogan/checksum.hpp"
#include "gogan/errors.hpp"
#include "gogan/text.hpp"

#ifndef GOGAN_VERSION
#define GOGAN_VERSION "0.1.0"
#endif

namespace gogan {

inline constexpr const char* kVersion = GOGAN_VERSION;

struct ManifestFile {
  std::string path;  // relative, generic separators
  std::string sha256;
  std::uintmax_t bytes = 0;
};

struct RunManifest {
  std::string version = kVersion;
  std::string command;
  std::vector<std::pair<std::string, double>> phases;
  std::vector<ManifestFile> files;
  std::string config;

  std::string to_text() const {
    std::ostringstream out;
    out << "gogan-run-manifest 1\n";
    out << "version " << version << "\n";
    out << "command " << command << "\n";
    for (const auto& [name, secs] : phases) out << "phase " << name << " " << format_real(secs) << "\n";
    for (const auto& f : files) out << "file " << f.sha256 << " " << f.bytes << " " << f.path << "\n";
    out << "config-begin\n" << config;
    if (!config.empty() && config.back() != '\n') out << "\n";
    out << "config-end\n";
    return out.str();
  }
};

inline std::filesystem::path manifest_path(const std::filesystem::path& dir, const std::string& command) {
  return dir / ("manifest." + command + ".txt");
}

// Wall-clock per named phase.
class PhaseClock {
 public:
  void start(std::string name) {
    stop();
    name_ = std::move(name);
    begin_ = std::chrono::steady_clock::now();
  }

  void stop() {
    if (name_.empty()) return;
    phases_.emplace_back(name_, std::chrono::duration<double>(std::chrono::steady_clock::now() - begin_).count());
    name_.clear();
  }

  const std::vector<std::pair<std::string, double>>& phases() const { return phases_; }

 private:
  std::string name_;
  std::chrono::steady_clock::time_point begin_;
  std::vector<std::pair<std::string, double>> phases_;
};

// Checksums the listed files (each under dir) and writes the manifest
// atomically. Every listed file must exist.
inline std::filesystem::path write_run_manifest(const std::filesystem::path& dir, RunManifest manifest,
                                                const std::vector<std::filesystem::path>& outputs) {
  manifest.files.clear();
  for (const auto& p : outputs) {
    if (!std::filesystem::is_regular_file(p)) throw Error("manifest: output file missing: " + p.string());
    ManifestFile f;
    f.path = std::filesystem::relative(p, dir).generic_string();
    if (f.path.empty() || f.path.starts_with("..")) throw UsageError("manifest: " + p.string() + " is outside " + dir.string());
    f.sha256 = sha256_file(p);
    f.bytes = std::filesystem::file_size(p);
    manifest.files.push_back(std::move(f));
  }
  const auto path = manifest_path(dir, manifest.command);
  write_file_atomic(path, manifest.to_text());
  return path;
}

inline RunManifest parse_run_manifest(const std::string& text, const std::string& where) {
  RunManifest m;
  m.version.clear();
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& what) { return ParseError(where + ":" + std::to_string(lineno) + ": " + what); };
  if (!std::getline(in, line) || (++lineno, line != "gogan-run-manifest 1")) throw fail("not a run manifest");
  bool in_config = false, saw_end = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (in_config) {
      if (line == "config-end") {
        in_config = false;
        saw_end = true;
      } else {
        m.config += line + "\n";
      }
      continue;
    }
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string tag;
    fields >> tag;
    if (tag == "version") {
      fields >> m.version;
    } else if (tag == "command") {
      fields >> m.command;
    } else if (tag == "phase") {
      std::string name, secs;
      if (!(fields >> name >> secs)) throw fail("malformed phase line");
      m.phases.emplace_back(name, parse_real(secs));
    } else if (tag == "file") {
      ManifestFile f;
      if (!(fields >> f.sha256 >> f.bytes)) throw fail("malformed file line");
      std::getline(fields, f.path);
      f.path = trim(f.path);
      if (f.path.empty()) throw fail("file line without a path");
      m.files.push_back(std::move(f));
    } else if (tag == "config-begin") {
      in_config = true;
    } else {
      throw fail("unknown manifest entry '" + tag + "'");
    }
  }
  if (in_config || !saw_end) throw fail("unterminated config block");
  return m;
}

inline RunManifest read_run_manifest(const std::filesystem::path& path) {
  return parse_run_manifest(read_text_file(path), path.string());
}

// One line per problem; empty when every file is present and matches.
inline std::vector<std::string> verify_run_manifest(const std::filesystem::path& path) {
  const RunManifest m = read_run_manifest(path);
  const auto dir = path.parent_path();
  std::vector<std::string> problems;
  for (const auto& f : m.files) {
    const auto full = dir / f.path;
    if (!std::filesystem::is_regular_file(full)) {
      problems.push_back("missing: " + f.path);
      continue;
    }
    if (std::filesystem::file_size(full) != f.bytes) problems.push_back("size mismatch: " + f.path);
    else if (sha256_file(full) != f.sha256) problems.push_back("checksum mismatch: " + f.path);
  }
  return problems;
}

}  // namespace gogan
