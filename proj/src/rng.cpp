#include "wdr/rng.hpp"

#include <cmath>

namespace wdr {

namespace {

constexpr std::uint64_t kSplitmixGamma = 0x9e3779b97f4a7c15ULL;

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += kSplitmixGamma);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

using u128 = unsigned __int128;

// Default PCG 128-bit LCG multiplier.
constexpr u128 pcg_mult() {
  return (u128(2549297995355413924ULL) << 64) | 4865540595714422341ULL;
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id) {
  std::uint64_t s = seed;
  u128 initstate = (u128(splitmix64(s)) << 64) | splitmix64(s);
  std::uint64_t t = stream_id ^ 0xda3e39cb94b95bdbULL;
  u128 initseq = (u128(splitmix64(t)) << 64) | splitmix64(t);
  inc_ = (initseq << 1) | 1;
  state_ = 0;
  next_u64();
  state_ += initstate;
  next_u64();
}

RngStream RngStream::substream(std::uint64_t child_id) const {
  std::uint64_t mix = stream_id_;
  std::uint64_t salt = splitmix64(mix);
  return RngStream(seed_ ^ salt, (stream_id_ << 20) ^ (child_id + 1));
}

std::uint64_t RngStream::next_u64() {
  state_ = state_ * pcg_mult() + inc_;
  std::uint64_t hi = static_cast<std::uint64_t>(state_ >> 64);
  std::uint64_t lo = static_cast<std::uint64_t>(state_);
  std::uint64_t xored = hi ^ lo;
  unsigned rot = static_cast<unsigned>(state_ >> 122);
  return (xored >> rot) | (xored << ((-rot) & 63u));
}

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform_pos() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  double f = std::sqrt(-2.0 * std::log(s) / s);
  cached_normal_ = v * f;
  has_cached_normal_ = true;
  return u * f;
}

}  // namespace wdr
