#pragma once

#include <gmpxx.h>

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <string_view>

namespace kep {

// ChaCha20 keystream generator. Seeded instances are fully deterministic,
// which the test-suite relies on for reproducible transcripts.
class Rng {
 public:
  using result_type = uint64_t;
  using Seed = std::array<uint8_t, 32>;

  explicit Rng(const Seed& seed);

  // Derives a 256-bit key from (seed, stream) so that independent streams
  // for parties, dealer and scheduler never overlap.
  static Rng FromSeed(uint64_t seed, uint64_t stream = 0);
  static Rng FromOs();

  void Fill(std::span<uint8_t> out);
  uint64_t NextU64();

  // Uniform in [0, bound). bound must be nonzero.
  uint64_t Uniform(uint64_t bound);
  // Uniform in [0, bound) for bound > 0.
  mpz_class UniformBelow(const mpz_class& bound);
  mpz_class RandomBits(size_t bits);

  // Independent child generator; consumes 32 bytes of this stream.
  Rng Fork();

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return NextU64(); }

 private:
  void Refill();

  Seed key_;
  uint64_t nonce_ = 0;
  std::array<uint8_t, 512> buffer_{};
  size_t pos_ = 512;
};

}  // namespace kep
