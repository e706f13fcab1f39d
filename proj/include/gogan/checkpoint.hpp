#pragma once

// Checkpoint format: a plain-text manifest plus a binary blob.
//
//   gogan-checkpoint 1
//   blob <file name, relative to the manifest>
//   dtype f64le
//   header <key> <value...>          (zero or more, in write order)
//   tensor <name> <shape> <offset> <count>
//
// <shape> is dims joined by 'x' ("-" for a scalar); <offset> is a byte
// offset into the blob, which holds little-endian IEEE-754 doubles
// concatenated in manifest order.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gogan/errors.hpp"
#include "gogan/params.hpp"
#include "gogan/tensor.hpp"

namespace gogan {

struct Checkpoint {
  std::vector<std::pair<std::string, std::string>> header;
  std::vector<std::pair<std::string, Tensor>> tensors;

  void set(std::string key, std::string value) {
    for (auto& [k, v] : header) {
      if (k == key) {
        v = std::move(value);
        return;
      }
    }
    header.emplace_back(std::move(key), std::move(value));
  }

  const std::string& get(const std::string& key) const {
    for (const auto& [k, v] : header) {
      if (k == key) return v;
    }
    throw FormatError("checkpoint header lacks '" + key + "'");
  }

  bool has(const std::string& key) const {
    for (const auto& [k, v] : header) {
      if (k == key) return true;
    }
    return false;
  }

  const Tensor& tensor(const std::string& name) const {
    for (const auto& [n, t] : tensors) {
      if (n == name) return t;
    }
    throw FormatError("checkpoint lacks tensor '" + name + "'");
  }

  void add_params(const ParamSet& params, const std::string& prefix) {
    for (const auto& p : params) tensors.emplace_back(prefix + p.name, p.value);
  }

  // Overwrite values of `params` from tensors named prefix + name.
  void load_params(ParamSet& params, const std::string& prefix) const {
    for (auto& p : params) {
      const Tensor& t = tensor(prefix + p.name);
      if (t.shape() != p.value.shape()) {
        throw FormatError("checkpoint tensor '" + prefix + p.name + "' has shape " + shape_string(t.shape()) +
                          ", expected " + shape_string(p.value.shape()));
      }
      p.value = t;
    }
    params.reset_accumulators();
  }
};

namespace detail {

inline void put_f64le(std::string& out, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

inline double get_f64le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | p[i];
  return std::bit_cast<double>(bits);
}

inline std::string encode_shape(const Shape& shape) {
  if (shape.empty()) return "-";
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += 'x';
    s += std::to_string(shape[i]);
  }
  return s;
}

inline Shape decode_shape(const std::string& text, const std::string& where) {
  Shape shape;
  if (text == "-") return shape;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, 'x')) {
    try {
      std::size_t used = 0;
      shape.push_back(std::stoull(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw ParseError(where + ": bad shape '" + text + "'");
    }
  }
  return shape;
}

}  // namespace detail

// Blob bytes exactly as written to disk.
inline std::string encode_blob(const Checkpoint& ckpt) {
  std::string blob;
  for (const auto& [name, t] : ckpt.tensors) {
    for (double v : t.data()) detail::put_f64le(blob, v);
  }
  return blob;
}

inline std::string encode_manifest(const Checkpoint& ckpt, const std::string& blob_name) {
  std::ostringstream m;
  m << "gogan-checkpoint 1\n";
  m << "blob " << blob_name << "\n";
  m << "dtype f64le\n";
  for (const auto& [k, v] : ckpt.header) {
    if (k.find_first_of(" \t\n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw UsageError("checkpoint header entries must be single-line with whitespace-free keys");
    }
    m << "header " << k << ' ' << v << "\n";
  }
  std::size_t offset = 0;
  for (const auto& [name, t] : ckpt.tensors) {
    if (name.find_first_of(" \t\n") != std::string::npos) throw UsageError("tensor names cannot contain spaces");
    m << "tensor " << name << ' ' << detail::encode_shape(t.shape()) << ' ' << offset << ' ' << t.size() << "\n";
    offset += 8 * t.size();
  }
  return m.str();
}

inline void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& manifest_path) {
  const std::string blob_name = manifest_path.stem().string() + ".bin";
  const auto blob_path = manifest_path.parent_path() / blob_name;
  if (!manifest_path.parent_path().empty()) std::filesystem::create_directories(manifest_path.parent_path());
  {
    std::ofstream out(blob_path, std::ios::binary | std::ios::trunc);
    const std::string blob = encode_blob(ckpt);
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw Error("failed writing '" + blob_path.string() + "'");
  }
  std::ofstream out(manifest_path, std::ios::trunc);
  out << encode_manifest(ckpt, blob_name);
  if (!out) throw Error("failed writing '" + manifest_path.string() + "'");
}

inline Checkpoint read_checkpoint(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw UsageError("cannot open checkpoint manifest '" + manifest_path.string() + "'");
  const std::string where = manifest_path.string();

  Checkpoint ckpt;
  std::string blob_name;
  struct Entry {
    std::string name;
    Shape shape;
    std::size_t offset, count;
  };
  std::vector<Entry> entries;

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string at = where + ":" + std::to_string(lineno);
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (lineno == 1) {
      std::string version;
      ls >> version;
      if (kind != "gogan-checkpoint" || version != "1") throw ParseError(at + ": not a gogan checkpoint manifest");
    } else if (kind == "blob") {
      ls >> blob_name;
    } else if (kind == "dtype") {
      std::string dtype;
      ls >> dtype;
      if (dtype != "f64le") throw FormatError(at + ": unsupported dtype '" + dtype + "'");
    } else if (kind == "header") {
      std::string key;
      ls >> key;
      std::string value;
      std::getline(ls >> std::ws, value);
      ckpt.header.emplace_back(key, value);
    } else if (kind == "tensor") {
      Entry e;
      std::string shape;
      if (!(ls >> e.name >> shape >> e.offset >> e.count)) throw ParseError(at + ": malformed tensor line");
      e.shape = detail::decode_shape(shape, at);
      if (shape_size(e.shape) != e.count) throw FormatError(at + ": count disagrees with shape");
      entries.push_back(std::move(e));
    } else {
      throw ParseError(at + ": unknown manifest entry '" + kind + "'");
    }
  }
  if (lineno == 0) throw ParseError(where + ": empty manifest");
  if (blob_name.empty()) throw ParseError(where + ": manifest names no blob");

  const auto blob_path = manifest_path.parent_path() / blob_name;
  std::ifstream bin(blob_path, std::ios::binary);
  if (!bin) throw UsageError("cannot open checkpoint blob '" + blob_path.string() + "'");
  std::string blob((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());

  for (auto& e : entries) {
    if (e.offset + 8 * e.count > blob.size()) {
      throw FormatError(blob_path.string() + ": tensor '" + e.name + "' extends past end of blob");
    }
    std::vector<double> data(e.count);
    const auto* base = reinterpret_cast<const unsigned char*>(blob.data()) + e.offset;
    for (std::size_t i = 0; i < e.count; ++i) data[i] = detail::get_f64le(base + 8 * i);
    ckpt.tensors.emplace_back(e.name, Tensor(std::move(e.shape), std::move(data)));
  }
  return ckpt;
}

}  // namespace gogan
