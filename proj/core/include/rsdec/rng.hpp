#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace rsdec {

// Philox4x32-10 counter-based generator. A stream is fully determined by
// (seed, stream id), so Monte Carlo replicas can be generated in any order
// or on any thread and still reproduce bit for bit.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept;

  std::uint64_t next_u64() noexcept;
  // Uniform on the open interval (0, 1).
  double uniform() noexcept;
  // Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal() noexcept;
  void fill_normal(std::span<double> out) noexcept;

 private:
  void refill() noexcept;

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> counter_;
  std::array<std::uint32_t, 4> block_{};
  int block_pos_ = 4;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

// Purposes multiplexed onto one seed: each replica owns a handful of
// independent streams.
enum class StreamPurpose : std::uint64_t {
  Noise = 0,
  Coupling = 1,
  SampleX = 2,
  SampleY = 3,
};

inline std::uint64_t stream_id(std::uint64_t replica, StreamPurpose purpose) noexcept {
  return replica * 4 + static_cast<std::uint64_t>(purpose);
}

}  // namespace rsdec
