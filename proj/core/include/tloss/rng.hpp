#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <utility>

namespace tloss {

/// One splitmix64 step: advances `state` and returns the mixed output.
std::uint64_t splitmix64_next(std::uint64_t& state) noexcept;

/// Independent sub-seed for stream `index` of a master seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept;

/// xoshiro256** seeded by splitmix64 expansion of a 64-bit seed. The integer
/// stream is identical on every platform; normals use Box-Muller.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) noexcept;

  std::uint64_t next_u64() noexcept;
  result_type operator()() noexcept { return next_u64(); }
  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Uniform integer on [lo, hi] (inclusive), rejection-sampled so it is unbiased.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) noexcept;

  bool bernoulli(double p) noexcept { return uniform() < p; }

  /// Standard normal deviate; Box-Muller pairs, second value cached.
  double normal() noexcept;

  /// Fisher-Yates shuffle driven by uniform_int.
  template <typename T>
  void shuffle(std::span<T> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::array<std::uint64_t, 4> s_{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace tloss
