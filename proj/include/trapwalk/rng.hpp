#pragma once

// Counter-based random numbers for dephasing phases. Each phase is a pure
// function of (stream seed, step, site), so ensembles are reproducible under
// any scheduling of realizations across threads.

#include <array>
#include <cstdint>
#include <numbers>

namespace trapwalk {

using Philox4x32Counter = std::array<std::uint32_t, 4>;
using Philox4x32Key = std::array<std::uint32_t, 2>;

/// Philox4x32 with 10 rounds (Salmon et al., SC'11).
inline Philox4x32Counter philox4x32_10(Philox4x32Counter ctr, Philox4x32Key key) {
  constexpr std::uint32_t kMul0 = 0xD2511F53u;
  constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
    ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
           static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
  }
  return ctr;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Seed of realization `index` within an ensemble keyed by `master`.
inline std::uint64_t derive_stream_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(master ^ splitmix64(index));
}

/// i.i.d. Uniform(-pi, pi) phases indexed by (step, site offset).
class PhaseField {
 public:
  explicit PhaseField(std::uint64_t seed)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

  /// Fills phases[k] for offsets k = 0..size-1 at `step`. One Philox block
  /// yields the phases of two adjacent offsets.
  template <class Span>
  void fill(std::uint64_t step, Span&& phases) const {
    const std::size_t n = phases.size();
    for (std::size_t k = 0; k < n; k += 2) {
      const auto block = draw(step, k / 2);
      phases[k] = to_phase(block[0], block[1]);
      if (k + 1 < n) phases[k + 1] = to_phase(block[2], block[3]);
    }
  }

  double phase(std::uint64_t step, std::size_t offset) const {
    const auto block = draw(step, offset / 2);
    return (offset & 1u) ? to_phase(block[2], block[3]) : to_phase(block[0], block[1]);
  }

 private:
  Philox4x32Counter draw(std::uint64_t step, std::size_t pair) const {
    const auto p = static_cast<std::uint64_t>(pair);
    return philox4x32_10({static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32),
                          static_cast<std::uint32_t>(p), static_cast<std::uint32_t>(p >> 32)},
                         key_);
  }

  // 53 random bits -> midpoint of one of 2^53 equal cells of (0, 1), so the
  // phase never hits -pi or pi exactly.
  static double to_phase(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
    const double u = (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
    return std::numbers::pi * (2.0 * u - 1.0);
  }

  Philox4x32Key key_;
};

}  // namespace trapwalk
