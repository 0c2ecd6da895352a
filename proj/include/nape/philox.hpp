#pragma once

// Philox4x64-10 counter-based generator: a keyed bijection on 256-bit
// counters, so any (key, counter) pair can be evaluated independently.

#include <array>
#include <cstdint>

namespace nape {

using Philox4x64Counter = std::array<std::uint64_t, 4>;
using Philox4x64Key = std::array<std::uint64_t, 2>;

constexpr Philox4x64Counter philox4x64(Philox4x64Counter c, Philox4x64Key k) {
  constexpr std::uint64_t M0 = 0xD2E7470EE14C6C93ULL, M1 = 0xCA5A826395121157ULL;
  constexpr std::uint64_t W0 = 0x9E3779B97F4A7C15ULL, W1 = 0xBB67AE8584CAA73BULL;
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      k[0] += W0;
      k[1] += W1;
    }
    const unsigned __int128 p0 = static_cast<unsigned __int128>(M0) * c[0];
    const unsigned __int128 p1 = static_cast<unsigned __int128>(M1) * c[2];
    const auto hi0 = static_cast<std::uint64_t>(p0 >> 64), lo0 = static_cast<std::uint64_t>(p0);
    const auto hi1 = static_cast<std::uint64_t>(p1 >> 64), lo1 = static_cast<std::uint64_t>(p1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
  return c;
}

/// Uniform in (0, 1] from the top 53 bits.
constexpr double uniform_open0(std::uint64_t u) { return (static_cast<double>(u >> 11) + 1.0) * 0x1.0p-53; }

}  // namespace nape
