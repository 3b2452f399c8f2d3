#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace decnn {

using Rng = std::mt19937_64;

// splitmix64 finalizer; decorrelates nearby seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives a named sub-seed ("init", "dropout", "shuffle", ...) from a root
/// seed so every random stream in a run is reproducible from one number.
constexpr std::uint64_t sub_seed(std::uint64_t root, std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char ch : name) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  return mix_seed(root ^ mix_seed(h));
}

inline Rng make_rng(std::uint64_t root, std::string_view name) {
  return Rng(sub_seed(root, name));
}

/// Uniform double in [0, 1) from 53 random bits. Unlike
/// std::uniform_real_distribution this is identical on every standard library.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace decnn
