#include "wqed/rng.hpp"

namespace wqed {

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view component,
                          std::uint64_t index) noexcept {
  std::uint64_t tag = 0xcbf29ce484222325ULL;
  for (unsigned char c : component) {
    tag ^= c;
    tag *= 0x100000001b3ULL;
  }
  return mix64(mix64(base ^ mix64(tag)) + index);
}

}  // namespace wqed
