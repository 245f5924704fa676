#pragma once

#include <cstdint>
#include <random>

namespace ssimgen {

/// All randomness in the project flows through mt19937_64 engines with the
/// standard library distributions. Streams are derived from (seed, index)
/// pairs via seed_seq so independent work items never share an engine.
using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

}  // namespace ssimgen
