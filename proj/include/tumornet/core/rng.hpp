#pragma once

#include <cstdint>
#include <random>

namespace tumornet {

// Engine used everywhere randomness is needed. Distributions below are
// written by hand so that draws do not depend on the standard library's
// implementation-defined distribution algorithms.
using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

// Stream seed for item `index` of a run seeded with `global_seed`.
std::uint64_t derive_seed(std::uint64_t global_seed, std::uint64_t index, std::uint64_t salt = 0);

// Uniform on [0, 1) with 53 random bits.
double uniform01(Rng& rng);
double uniform(Rng& rng, double lo, double hi);
double log_uniform(Rng& rng, double lo, double hi);
double standard_normal(Rng& rng);
// Uniform integer in [0, n).
std::uint64_t uniform_index(Rng& rng, std::uint64_t n);

}  // namespace tumornet
