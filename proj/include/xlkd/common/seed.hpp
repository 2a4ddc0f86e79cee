// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace xlkd {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
constexpr uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr uint64_t fnv1a(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Every job draws from its own namespace: (master seed, job name) -> seed.
constexpr uint64_t derive_seed(uint64_t master, std::string_view job) {
  return mix64(master ^ mix64(fnv1a(job)));
}

inline Rng make_rng(uint64_t master, std::string_view job) {
  return Rng(derive_seed(master, job));
}

// Uniform double in [0, 1) with 53 random bits; independent of the
// standard library's distribution implementations.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
}

template <class It>
void shuffle(It first, It last, Rng& rng) {
  auto n = static_cast<std::size_t>(last - first);
  for (std::size_t i = n; i > 1; --i) {
    std::size_t j = uniform_index(rng, i);
    std::swap(first[i - 1], first[j]);
  }
}

}  // namespace xlkd
