#pragma once

#include <cstdint>
#include <string_view>

namespace alm_audit {

// splitmix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) { return splitmix64(seed ^ splitmix64(salt)); }

// FNV-1a, 64 bit. Stable across platforms and runs.
constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

// Per-sample attack seed, independent of processing order.
constexpr std::uint64_t derive_seed(std::uint64_t run_seed, std::string_view sample_id, std::string_view recipe,
                                    std::uint64_t recipe_seed = 0) {
  std::uint64_t h = mix_seed(run_seed, fnv1a64(sample_id));
  h = mix_seed(h, fnv1a64(recipe));
  return mix_seed(h, recipe_seed);
}

}  // namespace alm_audit
