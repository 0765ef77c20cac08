#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace laid {

// Counter-based generator (Philox4x32-10). The stream is a pure function of
// (key, stream id, counter), so it is identical on every platform and child
// streams can be derived without touching the parent.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : key_(seed) {}

  std::uint64_t next_u64();
  std::uint32_t next_u32() { return static_cast<std::uint32_t>(next_u64() >> 32); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n), unbiased. n must be > 0.
  std::uint64_t below(std::uint64_t n);
  // Uniform integer in the closed range [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

  // Independent stream for `index`; distinct indices give distinct streams.
  Rng child(std::uint64_t index) const;

  std::uint64_t key() const { return key_; }
  std::uint64_t stream() const { return stream_; }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  static std::array<std::uint32_t, 4> philox(std::array<std::uint32_t, 4> ctr,
                                             std::array<std::uint32_t, 2> key);

 private:
  std::uint64_t key_ = 0;
  std::uint64_t stream_ = 0;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> block_{};
  bool have_half_ = false;
};

// Seed-mixing helper for deriving per-sample seeds from (run seed, index).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace laid
