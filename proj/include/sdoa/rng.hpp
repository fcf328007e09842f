#pragma once

#include <cstdint>
#include <random>

namespace sdoa {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used as a counter-based seed splitter so every
/// sample/trial owns an independent stream regardless of execution order.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for element `index` of stream `stream` under `master`.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                    std::uint64_t index) {
  return mix64(mix64(master ^ mix64(stream)) + index);
}

// Named streams, so that e.g. the noise of trial i never shares a generator
// with the imperfection draw of trial i.
enum class SeedStream : std::uint64_t {
  Sources = 1,
  Imperfections = 2,
  Noise = 3,
  Snr = 4,
  Init = 5,
  Epoch = 6,
};

constexpr std::uint64_t derive_seed(std::uint64_t master, SeedStream stream,
                                    std::uint64_t index) {
  return derive_seed(master, static_cast<std::uint64_t>(stream), index);
}

}  // namespace sdoa
