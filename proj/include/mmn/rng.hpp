#pragma once

#include <cstdint>
#include <vector>

namespace mmn {

// Counter-based deterministic generator (splitmix64). The state is a
// 64-bit counter advanced by the golden-ratio increment; each output is
// the finalizer mix of the new counter value. The integer stream is
// bit-exact across platforms for a given seed.
//
// Gaussian draws use Box-Muller on two 53-bit uniforms in (0,1) with a
// fixed consumption order: every pair of Gaussian values costs exactly
// two integer draws, and an odd-length request discards the second
// member of its last pair. The uniform mapping is
// u = ((x >> 11) + 0.5) * 2^-53. Gaussian values inherit the platform's
// libm rounding of log/cos/sin; the integer stream does not.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();

  // Uniform in (0, 1), never exactly 0 or 1.
  double next_unit();

  // One standard-normal draw; consumes two integer draws.
  double next_gaussian();

  // n standard-normal draws; consumes 2 * ceil(n / 2) integer draws.
  std::vector<double> gaussian_draws(std::int64_t n);

  // Uniform integer in [0, bound) by modulo reduction; bound must be > 0.
  std::uint64_t next_below(std::uint64_t bound);

  // Independent child stream k: seeded with mix64(state ^ mix64(k + C))
  // where C = 0x632BE59BD9B4E019. Same (state, k) always yields the same
  // child on every platform.
  Rng derive(std::uint64_t stream_index) const;

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
};

}  // namespace mmn
