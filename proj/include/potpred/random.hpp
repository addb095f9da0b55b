#pragma once

#include <cstdint>
#include <random>

namespace potpred {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; a bijection on 64-bit words with full avalanche.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/**
 * @brief Seed for an independent stream.
 *
 * The root seed, a stream tag (one per experiment arm or purpose) and a
 * replication index are mixed through SplitMix64, so replication r always
 * sees the same seed regardless of execution order or thread count.
 */
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream, std::uint64_t index) noexcept;

Rng make_rng(std::uint64_t root, std::uint64_t stream, std::uint64_t index);

/// Uniform draw on the open interval (0, 1).
double uniform_open(Rng& rng);

}  // namespace potpred
