#include "opcert/core/rng.hpp"

#include <cmath>
#include <numbers>

#include "opcert/core/error.hpp"

namespace opcert {

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

SeededRng::SeededRng(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), key_(mix64(mix64(seed) ^ mix64(stream ^ 0x5851f42d4c957f2dULL))) {}

std::uint64_t SeededRng::next_u64() noexcept {
  const std::uint64_t c = counter_++;
  return mix64(key_ ^ mix64(c * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL));
}

double SeededRng::uniform() noexcept {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::size_t SeededRng::index(std::size_t n) noexcept {
  // Multiply-shift; the bias is below 2^-64 * n.
  const unsigned __int128 wide = static_cast<unsigned __int128>(next_u64()) * n;
  return static_cast<std::size_t>(wide >> 64);
}

double SeededRng::normal() noexcept {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

SeededRng SeededRng::derive(std::uint64_t sub) const noexcept {
  return SeededRng(seed_, mix64(stream_ * 0x9e3779b97f4a7c15ULL + sub + 1));
}

Tensor gaussian_draws(SeededRng& rng, std::size_t n) {
  require(n >= 1, ErrorCode::invalid_argument, "gaussian_draws needs n >= 1");
  Tensor out({n});
  for (std::size_t i = 0; i < n; ++i) out[i] = rng.normal();
  return out;
}

}  // namespace opcert
