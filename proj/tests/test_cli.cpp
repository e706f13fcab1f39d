#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sys/wait.h>

#include "gogan/config.hpp"
#include "gogan/experiment.hpp"
#include "gogan/manifest.hpp"
#include "support.hpp"

using namespace gogan;
using gogan::testing::TempDir;

namespace {

std::string points_config(const std::filesystem::path& out, std::size_t stages) {
  return "[run]\nname = points\nseed = 3\nstages = " + std::to_string(stages) + "\nout_dir = " + out.string() +
         "\n[data]\ncount = 400\n[model]\nlatent_dim = 4\ngenerator_hidden = 8\ncritic_hidden = 8\n"
         "[train]\nbatch_size = 16\nn_critic = 2\niterations_per_epoch = 10\nepsilon = 0.01\n"
         "[eval]\nsamples = 32\n[report]\nstride = 3\n";
}

std::string images_config(const std::filesystem::path& out, double train_fraction = 0.9) {
  return "[run]\nname = images\nseed = 5\nstages = 2\nworkers = 2\nout_dir = " + out.string() +
         "\n[data]\nmode = images\nsource = procedural\ncount = 60\nimage_size = 12\ntrain_fraction = " +
         format_real(train_fraction) +
         "\n[model]\nlatent_dim = 4\ngenerator_hidden = 16\ncritic_hidden = 16\n"
         "[train]\nbatch_size = 8\nn_critic = 2\niterations_per_epoch = 4\n"
         "[eval]\nsamples = 4\n"
         "[completion]\nfractions = 0.25, 0.49\nsteps = 5\nrestarts = 1\nmax_images = 3\nreference_batch = 16\n";
}

ExperimentConfig parse(const std::string& text) { return parse_config(text, "test.cfg"); }

int run_cli(const std::string& args) {
  const std::string cmd = std::string(GOGAN_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::size_t line_count(const std::string& text) {
  std::size_t n = 0;
  for (char c : text) n += c == '\n';
  return n;
}

}  // namespace

// ---------------------------------------------------------------------------
// config

TEST(Config, DefaultsValidateAndRoundTrip) {
  const ExperimentConfig def;
  EXPECT_NO_THROW(def.validate());
  const ExperimentConfig back = parse(def.to_text());
  EXPECT_EQ(back.to_text(), def.to_text());
}

TEST(Config, ParsesSectionsAndComments) {
  const ExperimentConfig c = parse("# top\n[run]\n; note\nseed = 17\nstages = 3\n[train]\nepsilon = 0.25\n");
  EXPECT_EQ(c.seed, 17u);
  EXPECT_EQ(c.stages, 3u);
  EXPECT_EQ(c.train.epsilon, 0.25);
}

TEST(Config, ErrorsNameTheLine) {
  try {
    parse("[run]\nfoo = 1\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("test.cfg:2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse("seed = 1\n"), ConfigError);
  EXPECT_THROW(parse("[run]\nseed = 1\nseed = 2\n"), ConfigError);
  EXPECT_THROW(parse("[run]\nseed = abc\n"), ConfigError);
  EXPECT_THROW(parse("[train]\nepsilon = -1\n"), ConfigError);
  EXPECT_THROW(parse("[run]\nstages = 0\n"), ConfigError);
  EXPECT_THROW(parse("[data]\nsource = file\n"), ConfigError);
}

TEST(Config, InputPathsMustExist) {
  EXPECT_THROW(parse("[completion]\ncheckpoint_dir = /nonexistent/gogan\n"), ConfigError);
  EXPECT_THROW(parse("[theory]\nchain_dir = /nonexistent/gogan\n"), ConfigError);
}

TEST(Config, LoadMissingFileIsConfigError) {
  EXPECT_THROW(load_config("/nonexistent/gogan.cfg"), ConfigError);
}

// ---------------------------------------------------------------------------
// manifest

TEST(Manifest, RoundTripAndVerification) {
  TempDir dir("manifest");
  write_file_atomic(dir / "a.txt", "alpha");
  std::filesystem::create_directories(dir / "sub");
  write_file_atomic(dir / "sub" / "b.txt", "beta");
  RunManifest m;
  m.command = "unit";
  m.phases = {{"one", 0.5}};
  m.config = "[run]\nseed = 1\n";
  const auto path = write_run_manifest(dir.path(), m, {dir / "a.txt", dir / "sub" / "b.txt"});
  EXPECT_EQ(path, manifest_path(dir.path(), "unit"));

  const RunManifest back = read_run_manifest(path);
  EXPECT_EQ(back.command, "unit");
  EXPECT_EQ(back.version, kVersion);
  ASSERT_EQ(back.files.size(), 2u);
  EXPECT_EQ(back.files[1].path, "sub/b.txt");
  EXPECT_EQ(back.files[0].sha256, sha256_hex("alpha"));
  EXPECT_EQ(back.config, m.config);
  EXPECT_TRUE(verify_run_manifest(path).empty());

  write_file_atomic(dir / "a.txt", "alphA");
  write_file_atomic(dir / "sub" / "b.txt", "longer");
  const auto problems = verify_run_manifest(path);
  ASSERT_EQ(problems.size(), 2u);
  EXPECT_EQ(problems[0], "checksum mismatch: a.txt");
  EXPECT_EQ(problems[1], "size mismatch: sub/b.txt");
  std::filesystem::remove(dir / "a.txt");
  EXPECT_EQ(verify_run_manifest(path)[0], "missing: a.txt");
}

TEST(Manifest, OutputsMustLieUnderTheDirectory) {
  TempDir dir("manifest2");
  TempDir other("manifest3");
  write_file_atomic(other / "x.txt", "x");
  RunManifest m;
  m.command = "unit";
  EXPECT_THROW(write_run_manifest(dir.path(), m, {other / "x.txt"}), UsageError);
  EXPECT_THROW(write_run_manifest(dir.path(), m, {dir / "missing.txt"}), Error);
}

TEST(Manifest, MalformedTextIsParseError) {
  EXPECT_THROW(parse_run_manifest("nope\n", "m"), ParseError);
  EXPECT_THROW(parse_run_manifest("gogan-run-manifest 1\nconfig-begin\n", "m"), ParseError);
  EXPECT_THROW(parse_run_manifest("gogan-run-manifest 1\nbogus\nconfig-begin\nconfig-end\n", "m"), ParseError);
}

// ---------------------------------------------------------------------------
// experiment drivers

TEST(Experiment, MinimalSingleStageRunWritesAllArtifacts) {
  TempDir dir("train1");
  const auto r = run_train(parse(points_config(dir.path(), 1)));
  for (const char* f : {"dataset.txt", "gap_trace_stage1.csv", "ordering.txt", "manifest.train.txt",
                        "checkpoints/stage1/manifest.txt", "checkpoints/stage1/manifest.bin"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  EXPECT_FALSE(r.ordering.has_value());
  EXPECT_EQ(r.chain.gap_trace[0].size(), 10u);
  EXPECT_TRUE(verify_manifests(dir.path()).empty());
}

TEST(Experiment, TwoStageRunWritesTwoCheckpointsAndTraces) {
  TempDir dir("train2");
  const auto r = run_train(parse(points_config(dir.path(), 2)));
  std::size_t ckpts = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir / "checkpoints")) ckpts += e.is_directory();
  EXPECT_EQ(ckpts, 2u);
  EXPECT_TRUE(std::filesystem::exists(dir / "gap_trace_stage2.csv"));
  EXPECT_FALSE(std::filesystem::exists(dir / "gap_trace_stage3.csv"));
  ASSERT_TRUE(r.ordering.has_value());
  EXPECT_EQ(r.final_epoch_gap.size(), 2u);
}

TEST(Experiment, RerunReproducesCheckpointsAndTraces) {
  TempDir a("rerun-a"), b("rerun-b");
  run_train(parse(points_config(a.path(), 2)));
  run_train(parse(points_config(b.path(), 2)));
  for (const char* f : {"gap_trace_stage1.csv", "gap_trace_stage2.csv", "checkpoints/stage1/manifest.bin",
                        "checkpoints/stage2/manifest.bin", "ordering.txt"}) {
    EXPECT_EQ(sha256_file(a / f), sha256_file(b / f)) << f;
  }
}

TEST(Experiment, ReportRowsFinalGammaAndIdempotence) {
  TempDir dir("report");
  const auto t = run_train(parse(points_config(dir.path(), 2)));
  const auto r = run_report(dir.path());
  EXPECT_EQ(r.curve_rows, 2u * (10u / 3u));
  EXPECT_EQ(line_count(read_text_file(dir / "report" / "gap_curve.csv")), 1 + r.curve_rows);
  ASSERT_EQ(r.final_gamma.size(), 2u);
  for (std::size_t k = 0; k < 2; ++k) EXPECT_EQ(r.final_gamma[k], t.chain.gap_trace[k].back().gamma);
  const std::string first = read_text_file(dir / "report" / "gap_curve.csv");
  const std::string summary = read_text_file(dir / "report" / "summary.txt");
  run_report(dir.path());
  EXPECT_EQ(read_text_file(dir / "report" / "gap_curve.csv"), first);
  EXPECT_EQ(read_text_file(dir / "report" / "summary.txt"), summary);
}

TEST(Experiment, ReportWithoutManifestIsConfigError) {
  TempDir dir("noreport");
  EXPECT_THROW(run_report(dir.path()), ConfigError);
}

TEST(Experiment, SmoothingDropsThePartialWindow) {
  const std::vector<GapRecord> trace{{0, 1}, {1, 3}, {2, 5}, {3, 7}, {4, 100}};
  const auto s = smooth_trace(trace, 2);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].gamma, 2.0);
  EXPECT_EQ(s[1].gamma, 6.0);
  EXPECT_EQ(s[1].iteration, 3u);
}

TEST(Experiment, CompletionSummaryHasTableShape) {
  TempDir dir("complete");
  const ExperimentConfig cfg = parse(images_config(dir.path()));
  run_train(cfg);
  const auto r = run_complete(cfg);
  // models: occluded + 2 stages; 2 fractions x 3 images each.
  EXPECT_EQ(r.summary.models, (std::vector<std::string>{"occluded", "stage1", "stage2"}));
  EXPECT_EQ(r.rows.size(), 3u * 2u * 3u);
  for (const auto& row : r.rows) EXPECT_TRUE(row.observed_preserved);
  const std::string csv = read_text_file(dir / "completion_summary.csv");
  const auto lines = split(trim(csv), '\n');
  ASSERT_EQ(lines.size(), 1u + 3u * 2u);
  for (const auto& l : lines) EXPECT_EQ(split(l, ',').size(), 4u);
  EXPECT_NE(r.summary.table_text().find("stage2 SSIM"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(dir / "completions" / "stage1" / "f25" / "img_000000.pgm"));
  EXPECT_TRUE(verify_manifests(dir.path()).empty());

  const auto rep = run_report(dir.path());
  EXPECT_TRUE(std::filesystem::exists(dir / "report" / "metric_curve.csv"));
  EXPECT_EQ(line_count(read_text_file(dir / "report" / "metric_curve.csv")), 1u + 2u * 2u);
  EXPECT_EQ(rep.final_gamma.size(), 2u);
}

TEST(Experiment, ZeroTestImagesIsAnError) {
  TempDir dir("zero");
  run_train(parse(images_config(dir.path())));
  ExperimentConfig cfg = parse(images_config(dir.path(), 0.995));
  EXPECT_THROW(run_complete(cfg), ConfigError);
}

TEST(Experiment, CompletionWithoutCheckpointsIsConfigError) {
  TempDir dir("nockpt");
  EXPECT_THROW(run_complete(parse(images_config(dir.path()))), ConfigError);
}

TEST(Experiment, TheorySweepAndChainResiduals) {
  TempDir dir("theory");
  run_train(parse(points_config(dir / "run", 2)));
  ExperimentConfig cfg = parse(points_config(dir / "run", 2) + "[theory]\nconfigs = 200\nchain_dir = " +
                               (dir / "run" / "checkpoints").string() + "\n");
  cfg.out_dir = dir / "theory";
  const auto r = run_theory(cfg);
  EXPECT_TRUE(r.sweep.all_pass());
  EXPECT_EQ(r.sweep.rows[0].geometry.etas, std::vector<double>{0.0});
  ASSERT_TRUE(r.empirical.has_value());
  for (double v : r.empirical->residuals) EXPECT_TRUE(std::isfinite(v));
  EXPECT_NE(read_text_file(dir / "theory" / "theory_summary.txt").find("result PASS"), std::string::npos);
}

// ---------------------------------------------------------------------------
// command line

TEST(Cli, ExitCodes) {
  TempDir dir("cli");
  write_file_atomic(dir / "p.cfg", points_config(dir / "run", 2));
  EXPECT_EQ(run_cli("--version"), 0);
  EXPECT_EQ(run_cli(""), 2);
  EXPECT_EQ(run_cli("train"), 2);
  EXPECT_EQ(run_cli("train --config " + (dir / "missing.cfg").string()), 2);
  EXPECT_EQ(run_cli("report " + (dir / "nothing").string()), 2);
  EXPECT_EQ(run_cli("train --config " + (dir / "p.cfg").string()), 0);
  EXPECT_EQ(run_cli("verify-manifest " + (dir / "run").string()), 0);
  EXPECT_EQ(run_cli("report " + (dir / "run").string()), 0);
  EXPECT_EQ(run_cli("theory --out " + (dir / "th").string()), 0);
  write_file_atomic(dir / "run" / "ordering.txt", "tampered\n");
  EXPECT_EQ(run_cli("verify-manifest " + (dir / "run").string()), 1);
  EXPECT_EQ(run_cli("complete --config " + (dir / "p.cfg").string()), 2);
}

TEST(Cli, InvalidLogLevelIsUsageError) {
  EXPECT_EQ(run_cli("theory --out /tmp/gogan-never-written"), 0);
  const std::string cmd = std::string("GOGAN_LOG_LEVEL=loud ") + GOGAN_CLI_PATH + " theory --out /tmp/gogan-never >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  EXPECT_EQ(WEXITSTATUS(status), 2);
  std::error_code ec;
  std::filesystem::remove_all("/tmp/gogan-never-written", ec);
}
