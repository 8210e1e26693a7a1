#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace batchrl {

using Rng = std::mt19937_64;

// Mixes a master seed with stream coordinates (phase, epoch, episode, ...)
// into an independent seed. Stable across platforms.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> coordinates);

inline Rng make_rng(std::uint64_t master, std::initializer_list<std::uint64_t> coordinates) {
  return Rng(derive_seed(master, coordinates));
}

double standard_normal(Rng& rng);

}  // namespace batchrl
