#include "laid/rng.hpp"

#include <cmath>
#include <numbers>

namespace laid {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline std::uint32_t lo32(std::uint64_t x) { return static_cast<std::uint32_t>(x); }
inline std::uint32_t hi32(std::uint64_t x) { return static_cast<std::uint32_t>(x >> 32); }
inline std::uint64_t join(std::uint32_t lo, std::uint32_t hi) {
  return (static_cast<std::uint64_t>(hi) << 32) | lo;
}

}  // namespace

std::array<std::uint32_t, 4> Rng::philox(std::array<std::uint32_t, 4> ctr,
                                         std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
    ctr = {hi32(p1) ^ ctr[1] ^ key[0], lo32(p1), hi32(p0) ^ ctr[3] ^ key[1], lo32(p0)};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

std::uint64_t Rng::next_u64() {
  if (have_half_) {
    have_half_ = false;
    return join(block_[2], block_[3]);
  }
  block_ = philox({lo32(counter_), hi32(counter_), lo32(stream_), hi32(stream_)},
                  {lo32(key_), hi32(key_)});
  ++counter_;
  have_half_ = true;
  return join(block_[0], block_[1]);
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::below(std::uint64_t n) {
  // Rejection on the top of the range keeps the draw unbiased.
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % n;
}

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<std::int64_t>(below(span));
}

double Rng::normal() {
  // Box-Muller; 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Rng Rng::child(std::uint64_t index) const {
  // Philox is a bijection on the 128-bit counter for a fixed key, so distinct
  // indices map to distinct (key, stream) pairs.
  const auto out = philox({lo32(index), hi32(index), lo32(stream_), hi32(stream_) ^ 0x5EEDu},
                          {lo32(key_), hi32(key_)});
  Rng r(join(out[0], out[1]));
  r.stream_ = join(out[2], out[3]);
  return r;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  return Rng(seed).child(index).next_u64();
}

}  // namespace laid
