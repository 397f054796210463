#pragma once

#include <cstdint>
#include <limits>

namespace wdr {

/// Seedable random stream based on PCG64 (XSL-RR 128/64).
///
/// A (seed, stream_id) pair fully determines the draw sequence. Distinct
/// stream ids select distinct PCG increments, giving statistically
/// independent streams for parallel chains or workers.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

  /// Derive an independent child stream; deterministic in (this stream's
  /// identity, child_id).
  RngStream substream(std::uint64_t child_id) const;

  std::uint64_t next_u64();

  /// Uniform on [0, 1).
  double uniform();

  /// Uniform on (0, 1); safe to pass through log().
  double uniform_pos();

  /// Standard normal via the Marsaglia polar method.
  double normal();

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

 private:
  using u128 = unsigned __int128;
  u128 state_;
  u128 inc_;
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace wdr
