#pragma once

#include <cstdint>
#include <initializer_list>

namespace affectfuse::rng {

// splitmix64 finaliser
constexpr std::uint64_t mix(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent stream seed from a base seed and a tuple of ids.
template <typename... Ids>
constexpr std::uint64_t derive(std::uint64_t seed, Ids... ids) noexcept {
  std::uint64_t h = mix(seed);
  for (std::uint64_t id : {static_cast<std::uint64_t>(ids)...}) h = mix(h ^ mix(id + 0x632be59bd9b4e019ULL));
  return h;
}

}  // namespace affectfuse::rng
