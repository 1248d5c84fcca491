#include "mmn/rng.hpp"

#include <cmath>

#include "mmn/error.hpp"

namespace mmn {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kStreamSalt = 0x632BE59BD9B4E019ULL;
constexpr double kTwoPi = 6.283185307179586476925286766559;

std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

}  // namespace

std::uint64_t Rng::next_u64() {
  state_ += kGolden;
  return mix64(state_);
}

double Rng::next_unit() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::next_gaussian() {
  const double u1 = next_unit();
  const double u2 = next_unit();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

std::vector<double> Rng::gaussian_draws(std::int64_t n) {
  if (n < 0) throw InvalidArgument("gaussian_draws: negative count");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n));
  while (static_cast<std::int64_t>(out.size()) < n) {
    const double u1 = next_unit();
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    out.push_back(r * std::cos(kTwoPi * u2));
    if (static_cast<std::int64_t>(out.size()) < n)
      out.push_back(r * std::sin(kTwoPi * u2));
  }
  return out;
}

std::uint64_t Rng::next_below(std::uint64_t bound) {
  if (bound == 0) throw InvalidArgument("next_below: zero bound");
  return next_u64() % bound;
}

Rng Rng::derive(std::uint64_t stream_index) const {
  return Rng(mix64(state_ ^ mix64(stream_index + kStreamSalt)));
}

}  // namespace mmn
