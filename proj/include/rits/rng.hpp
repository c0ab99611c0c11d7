#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace rits {

using Rng = std::mt19937_64;

/// Purpose tags for derived random streams. Values are part of the
/// reproducibility contract; do not renumber.
enum class Stream : std::uint64_t {
  kPopulation = 1,      // covariates and potential outcomes of simulated participants
  kTrial = 2,           // per-replication trial seed
  kPosteriorDraws = 3,  // Thompson posterior samples for one allocation
  kArmDraw = 4,         // multinomial arm draw for one allocation
  kBootstrap = 5,       // bootstrap resample of a historical dataset
  kHistoricalArm = 6,   // historical arm labels of a synthetic dataset
};

/// Deterministic stream derived from a seed and a path of integers
/// (replication index, participant index, purpose, ...).
Rng derive_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

/// First 64-bit output of derive_rng(seed, path).
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

constexpr std::uint64_t tag(Stream s) noexcept { return static_cast<std::uint64_t>(s); }

}  // namespace rits
