#pragma once

#include <array>
#include <cstdint>

namespace wnsf {

/// Philox4x32-10 counter-based generator.
///
/// The 64-bit seed is the key. The counter holds a 64-bit block index in its low
/// words and a 64-bit stream id in its high words, so every (seed, stream) pair
/// is an independent sequence and trials can be generated in any order.
class Philox {
 public:
  using Block = std::array<std::uint32_t, 4>;

  Philox(std::uint64_t seed, std::uint64_t stream);

  static Block generate(Block counter, std::array<std::uint32_t, 2> key);

  std::uint32_t next_u32();
  /// Uniform on the open interval (0, 1) with 53 random bits.
  double uniform();
  /// Standard normal by Box-Muller; fully deterministic across platforms with IEEE libm.
  double normal();

 private:
  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  Block buffer_{};
  int used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Stream ids used by the simulators. A trial index occupies the upper bits.
enum class StreamPurpose : std::uint64_t { Excitation = 0, Innovation = 1, Dither = 2, System = 3 };

std::uint64_t stream_id(std::uint64_t trial, StreamPurpose purpose, std::uint64_t channel = 0);

}  // namespace wnsf
