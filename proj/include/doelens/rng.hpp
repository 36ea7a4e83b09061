#pragma once

#include <cstdint>
#include <random>

namespace doelens {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a master seed and an index.
/// Per-sample seeds make parallel and serial dataset builds bit-identical.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(splitmix64(master) ^ (index * 0xD1B54A32D192ED03ull + 0x8CB92BA72F3D8DD7ull));
}

inline Rng make_rng(std::uint64_t master, std::uint64_t index = 0) {
  return Rng(derive_seed(master, index));
}

// Named streams so stages of one pipeline never share random sequences.
namespace stream {
inline constexpr std::uint64_t biased_train = 0x101;
inline constexpr std::uint64_t splits = 0x102;
inline constexpr std::uint64_t model_init = 0x201;
inline constexpr std::uint64_t shuffle = 0x202;
inline constexpr std::uint64_t type1 = 0x301;
inline constexpr std::uint64_t type2 = 0x302;
inline constexpr std::uint64_t probe = 0x401;
inline constexpr std::uint64_t exp3_train = 0x501;
inline constexpr std::uint64_t exp3_audit = 0x502;
}  // namespace stream

}  // namespace doelens
