#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "opcert/core/tensor.hpp"

namespace opcert {

/// Counter-based generator: draw i of stream (seed, stream) is a pure function
/// of (seed, stream, i), so results never depend on scheduling.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }
  std::uint64_t position() const noexcept { return counter_; }

  std::uint64_t next_u64() noexcept;
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n) noexcept;
  /// Standard normal via Box-Muller.
  double normal() noexcept;

  /// Independent child stream keyed by (this stream, sub).
  SeededRng derive(std::uint64_t sub) const noexcept;

  template <class T>
  void shuffle(std::vector<T>& v) noexcept {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t mix64(std::uint64_t x) noexcept;

/// n standard-normal draws as a rank-1 tensor.
Tensor gaussian_draws(SeededRng& rng, std::size_t n);

}  // namespace opcert
