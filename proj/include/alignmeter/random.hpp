#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace alignmeter {

using Rng = std::mt19937_64;

/// Named random streams. Every Monte-Carlo loop draws iteration k from
/// substream(seed, stream, k) so results do not depend on scheduling.
enum class Stream : std::uint64_t {
  permutation = 1,
  bootstrap = 2,
  quartile = 3,
  baseline = 4,
  dcor_permutation = 5,
  ensemble = 6,
  sampler = 7,
  synthetic = 8,
  battery = 9,
};

std::uint64_t splitmix64(std::uint64_t x);

/// Independent generator for (seed, stream, index).
Rng substream(std::uint64_t seed, Stream stream, std::uint64_t index);

/// Derive a child seed from a parent seed and a label (stable across runs/platforms).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label);

}  // namespace alignmeter
