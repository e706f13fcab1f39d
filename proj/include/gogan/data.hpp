#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gogan/errors.hpp"
#include "gogan/rng.hpp"
#include "gogan/tensor.hpp"

namespace gogan {

enum class DataMode { points2d, images };

inline const char* mode_name(DataMode m) { return m == DataMode::points2d ? "points2d" : "images"; }

inline DataMode parse_mode(const std::string& s) {
  if (s == "points2d" || s == "points") return DataMode::points2d;
  if (s == "images") return DataMode::images;
  throw ConfigError("unknown data mode '" + s + "' (expected points2d or images)");
}

// n samples stored as the rows of an (n x d) tensor. Image rows are
// row-major height x width pixels in [0, 1].
struct Dataset {
  DataMode mode = DataMode::points2d;
  Tensor samples{Shape{0, 2}};
  std::size_t height = 0;
  std::size_t width = 0;
  std::string metadata;

  std::size_t size() const { return samples.rows(); }
  std::size_t dim() const { return samples.cols(); }

  Tensor image(std::size_t i) const {
    if (mode != DataMode::images) throw UsageError("image() on a point dataset");
    return samples.row_at(i).reshaped({height, width});
  }
};

class EmptyDatasetError : public DomainError {
 public:
  using DomainError::DomainError;
};

// ---------------------------------------------------------------------------
// Gaussian mixtures

struct MixtureComponent {
  std::array<double, 2> mean{0.0, 0.0};
  double sigma = 1.0;
};

struct MixtureSpec {
  std::vector<MixtureComponent> modes;
  std::vector<double> weights;

  void validate() const {
    if (modes.empty()) throw ConfigError("mixture needs at least one mode");
    if (weights.size() != modes.size()) throw ConfigError("mixture weights do not match modes");
    double total = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0)) throw ConfigError("mixture weights must be nonnegative");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("mixture weights must sum to 1");
    for (const auto& m : modes) {
      if (!(m.sigma > 0.0)) throw ConfigError("mixture sigma must be positive");
      if (!std::isfinite(m.mean[0]) || !std::isfinite(m.mean[1])) throw ConfigError("mixture mean must be finite");
    }
  }

  // k equally weighted modes evenly spaced on a circle.
  static MixtureSpec ring(std::size_t k, double radius, double sigma) {
    MixtureSpec spec;
    const double pi = std::acos(-1.0);
    for (std::size_t i = 0; i < k; ++i) {
      const double a = 2.0 * pi * static_cast<double>(i) / static_cast<double>(k);
      spec.modes.push_back({{radius * std::cos(a), radius * std::sin(a)}, sigma});
      spec.weights.push_back(1.0 / static_cast<double>(k));
    }
    return spec;
  }
};

inline Dataset sample_gaussian_mixture(const MixtureSpec& spec, long long n, std::uint64_t seed) {
  spec.validate();
  if (n <= 0) throw UsageError("sample count must be positive");
  Rng rng(seed);
  std::discrete_distribution<std::size_t> pick(spec.weights.begin(), spec.weights.end());
  std::normal_distribution<double> noise(0.0, 1.0);
  Dataset ds;
  ds.mode = DataMode::points2d;
  ds.samples = Tensor({static_cast<std::size_t>(n), 2});
  for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) {
    const auto& m = spec.modes[pick(rng)];
    ds.samples.at(i, 0) = m.mean[0] + m.sigma * noise(rng);
    ds.samples.at(i, 1) = m.mean[1] + m.sigma * noise(rng);
  }
  std::ostringstream meta;
  meta << "mixture modes=" << spec.modes.size() << " n=" << n << " seed=" << seed;
  ds.metadata = meta.str();
  return ds;
}

// ---------------------------------------------------------------------------
// Procedural images

inline constexpr std::size_t kMinImageSize = 12;

// One grayscale image: a plain background with one anti-aliased ellipse or
// rectangle. Coverage is estimated with 4x4 supersampling.
inline Tensor draw_procedural_image(std::size_t size, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double s = static_cast<double>(size);
  const double background = 0.15 + 0.7 * unit(rng);
  Tensor img({size, size}, background);

  const bool ellipse = unit(rng) < 0.5;
  // Centers anywhere in the frame so a center hole hides only part of the scene.
  const double cx = s * (0.1 + 0.8 * unit(rng));
  const double cy = s * (0.1 + 0.8 * unit(rng));
  const double rx = s * (0.1 + 0.2 * unit(rng));
  const double ry = s * (0.1 + 0.2 * unit(rng));
  // Shape intensity is kept at least 0.25 away from the background.
  double level = unit(rng);
  if (std::abs(level - background) < 0.25) level = background < 0.5 ? std::min(1.0, background + 0.4)
                                                                   : std::max(0.0, background - 0.4);
  constexpr int kSuper = 4;
  for (std::size_t r = 0; r < size; ++r) {
    for (std::size_t c = 0; c < size; ++c) {
      int inside = 0;
      for (int sr = 0; sr < kSuper; ++sr) {
        for (int sc = 0; sc < kSuper; ++sc) {
          const double y = static_cast<double>(r) + (sr + 0.5) / kSuper;
          const double x = static_cast<double>(c) + (sc + 0.5) / kSuper;
          const double dx = (x - cx) / rx, dy = (y - cy) / ry;
          const bool hit = ellipse ? dx * dx + dy * dy <= 1.0 : std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
          inside += hit ? 1 : 0;
        }
      }
      const double cover = static_cast<double>(inside) / (kSuper * kSuper);
      img.at(r, c) = (1.0 - cover) * img.at(r, c) + cover * level;
    }
  }
  return img;
}

inline Dataset gen_procedural_images(long long n, std::size_t size, std::uint64_t seed) {
  if (size < kMinImageSize) {
    throw ConfigError("procedural images need size >= " + std::to_string(kMinImageSize) + " (SSIM window)");
  }
  if (n <= 0) throw UsageError("image count must be positive");
  Rng rng(seed);
  Dataset ds;
  ds.mode = DataMode::images;
  ds.height = ds.width = size;
  ds.samples = Tensor({static_cast<std::size_t>(n), size * size});
  for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) {
    const Tensor img = draw_procedural_image(size, rng);
    std::copy(img.data().begin(), img.data().end(), ds.samples.data().begin() + static_cast<std::ptrdiff_t>(i * size * size));
  }
  std::ostringstream meta;
  meta << "procedural n=" << n << " size=" << size << " seed=" << seed;
  ds.metadata = meta.str();
  return ds;
}

// ---------------------------------------------------------------------------
// PGM (P5, maxval 65535, big-endian samples)

inline std::uint16_t quantize16(double v) {
  return static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * 65535.0));
}

inline void write_pgm(const std::filesystem::path& path, const Tensor& image) {
  if (image.rank() != 2) throw DimensionError("write_pgm expects an H x W tensor");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UsageError("cannot write '" + path.string() + "'");
  out << "P5\n" << image.cols() << ' ' << image.rows() << "\n65535\n";
  for (double v : image.data()) {
    const std::uint16_t q = quantize16(v);
    const char bytes[2] = {static_cast<char>(q >> 8), static_cast<char>(q & 0xFF)};
    out.write(bytes, 2);
  }
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

inline Tensor read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open '" + path.string() + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string name = path.string();
  std::size_t pos = 0;

  auto fail = [&](const std::string& what) -> ParseError {
    return ParseError(name + ": " + what + " at byte offset " + std::to_string(pos));
  };
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_uint = [&](const char* what) {
    skip_space();
    if (pos >= bytes.size() || !std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      throw fail(std::string("expected ") + what);
    }
    std::size_t v = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + static_cast<std::size_t>(bytes[pos] - '0');
      if (v > (1u << 24)) throw fail(std::string(what) + " too large");
      ++pos;
    }
    return v;
  };

  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw fail("missing P5 magic");
  pos = 2;
  const std::size_t width = read_uint("width");
  const std::size_t height = read_uint("height");
  const std::size_t maxval = read_uint("maxval");
  if (width == 0 || height == 0) throw fail("zero image dimension");
  if (maxval == 0 || maxval > 65535) throw fail("maxval out of range");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) throw fail("expected whitespace");
  ++pos;

  const std::size_t bps = maxval > 255 ? 2 : 1;
  if (bytes.size() - pos < width * height * bps) throw fail("truncated pixel data");
  Tensor img({height, width});
  for (std::size_t i = 0; i < width * height; ++i) {
    std::size_t q = static_cast<unsigned char>(bytes[pos]);
    if (bps == 2) q = (q << 8) | static_cast<unsigned char>(bytes[pos + 1]);
    if (q > maxval) throw fail("sample exceeds maxval");
    img[i] = static_cast<double>(q) / static_cast<double>(maxval);
    pos += bps;
  }
  return img;
}

// ---------------------------------------------------------------------------
// Loading and splitting

inline Dataset load_points_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open '" + path.string() + "'");
  std::vector<double> values;
  std::string line;
  std::size_t offset = 0, lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t line_start = offset;
    offset += line.size() + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t field_start = 0;
    int fields = 0;
    while (field_start <= line.size()) {
      const std::size_t comma = line.find(',', field_start);
      const std::size_t end = comma == std::string::npos ? line.size() : comma;
      const std::string token = line.substr(field_start, end - field_start);
      const std::size_t at = line_start + field_start;
      double v = 0.0;
      try {
        std::size_t used = 0;
        v = std::stod(token, &used);
        while (used < token.size() && std::isspace(static_cast<unsigned char>(token[used]))) ++used;
        if (used != token.size()) throw std::invalid_argument(token);
      } catch (const std::exception&) {
        throw ParseError(path.string() + ": non-numeric token '" + token + "' at line " + std::to_string(lineno) +
                         ", byte offset " + std::to_string(at));
      }
      if (!std::isfinite(v)) {
        throw ParseError(path.string() + ": non-finite value at line " + std::to_string(lineno) + ", byte offset " +
                         std::to_string(at));
      }
      values.push_back(v);
      ++fields;
      if (comma == std::string::npos) break;
      field_start = comma + 1;
    }
    if (fields != 2) {
      throw ParseError(path.string() + ": expected 2 fields at line " + std::to_string(lineno) + ", byte offset " +
                       std::to_string(line_start));
    }
  }
  if (values.empty()) throw EmptyDatasetError("dataset '" + path.string() + "' is empty");
  Dataset ds;
  ds.mode = DataMode::points2d;
  const std::size_t rows = values.size() / 2;
  ds.samples = Tensor({rows, 2}, std::move(values));
  ds.metadata = "csv " + path.string();
  return ds;
}

inline Dataset load_image_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw UsageError("'" + dir.string() + "' is not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pgm") files.push_back(entry.path());
  }
  if (files.empty()) throw EmptyDatasetError("no .pgm images in '" + dir.string() + "'");
  std::sort(files.begin(), files.end());

  Dataset ds;
  ds.mode = DataMode::images;
  std::vector<double> pixels;
  for (const auto& f : files) {
    const Tensor img = read_pgm(f);
    if (ds.height == 0) {
      ds.height = img.rows();
      ds.width = img.cols();
    } else if (img.rows() != ds.height || img.cols() != ds.width) {
      throw FormatError("image '" + f.string() + "' is " + std::to_string(img.rows()) + "x" +
                        std::to_string(img.cols()) + ", expected " + std::to_string(ds.height) + "x" +
                        std::to_string(ds.width));
    }
    pixels.insert(pixels.end(), img.data().begin(), img.data().end());
  }
  ds.samples = Tensor({files.size(), ds.height * ds.width}, std::move(pixels));
  ds.metadata = "pgm-dir " + dir.string();
  return ds;
}

inline Dataset load_dataset(const std::filesystem::path& path, DataMode mode) {
  if (!std::filesystem::exists(path)) throw UsageError("dataset path '" + path.string() + "' does not exist");
  return mode == DataMode::points2d ? load_points_csv(path) : load_image_dir(path);
}

inline void write_points_csv(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::trunc);
  out.precision(17);
  for (std::size_t i = 0; i < ds.size(); ++i) out << ds.samples.at(i, 0) << ',' << ds.samples.at(i, 1) << '\n';
}

inline void write_image_dir(const std::filesystem::path& dir, const Dataset& ds) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    std::ostringstream name;
    name << "img_" << std::setw(6) << std::setfill('0') << i << ".pgm";
    write_pgm(dir / name.str(), ds.image(i));
  }
}

inline Dataset subset(const Dataset& ds, std::span<const std::size_t> rows, const std::string& tag) {
  Dataset out = ds;
  out.samples = gather_rows(ds.samples, rows);
  out.metadata = ds.metadata + " " + tag;
  return out;
}

// Deterministic shuffled split into (train, test); train gets round(n * fraction) rows.
inline std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train fraction must lie in (0, 1)");
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(ds.size())));
  const std::span<const std::size_t> all(order);
  return {subset(ds, all.first(n_train), "train"), subset(ds, all.subspan(n_train), "test")};
}

inline void write_dataset_manifest(const std::filesystem::path& path, const Dataset& ds, std::uint64_t seed) {
  std::ofstream out(path, std::ios::trunc);
  out << "count " << ds.size() << "\n";
  out << "mode " << mode_name(ds.mode) << "\n";
  if (ds.mode == DataMode::images) {
    out << "shape " << ds.height << "x" << ds.width << "\n";
  } else {
    out << "shape " << ds.dim() << "\n";
  }
  out << "seed " << seed << "\n";
  out << "spec " << ds.metadata << "\n";
}

}  // namespace gogan
