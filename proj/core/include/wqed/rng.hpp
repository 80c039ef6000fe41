#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace wqed {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Counter-based seed derivation: every component draws from its own stream
/// keyed by (base seed, component tag, index), so results do not depend on
/// evaluation order or thread count.
std::uint64_t derive_seed(std::uint64_t base, std::string_view component,
                          std::uint64_t index = 0) noexcept;

inline Rng make_rng(std::uint64_t base, std::string_view component, std::uint64_t index = 0) {
  return Rng(derive_seed(base, component, index));
}

}  // namespace wqed
