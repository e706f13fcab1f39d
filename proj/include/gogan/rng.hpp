#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace gogan {

using Rng = std::mt19937_64;

// 64-bit FNV-1a; stable across platforms and builds.
constexpr std::uint64_t stable_hash(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed of the named substream of `master`. Streams are independent of each
// other, so adding a component never shifts another component's draws.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view component) {
  return splitmix64(master ^ splitmix64(stable_hash(component)));
}

inline Rng substream(std::uint64_t master, std::string_view component) {
  return Rng(derive_seed(master, component));
}

}  // namespace gogan
