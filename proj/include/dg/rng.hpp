#pragma once

#include <array>
#include <cstdint>

namespace dg {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
/// A stream is fully determined by (seed, stream); draws within a stream
/// consume counter blocks sequentially, so results are independent of
/// thread count or evaluation order across streams.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  /// Stream dedicated to one (chain, step) pair of a sampling loop.
  static Rng for_chain_step(std::uint64_t seed, std::uint32_t chain, std::uint32_t step) {
    return Rng(seed, (static_cast<std::uint64_t>(chain) << 32) | step);
  }

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  /// Uniform in [0, 1) with 53 random bits.
  double next_double();

  /// Standard normal via Box-Muller; pairs are cached.
  double next_normal();

  /// Uniform index in [0, n), n >= 1.
  std::size_t next_index(std::size_t n);

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> counter_;
  std::array<std::uint32_t, 4> block_{};
  int block_pos_ = 4;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

/// SplitMix64 step; used to derive decorrelated seeds for subsystems.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace dg
