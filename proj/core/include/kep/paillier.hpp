#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <span>
#include <vector>

#include "kep/bytes.hpp"
#include "kep/random.hpp"

// (tau, iota)-threshold Paillier with a trusted dealer, following the
// Fouque-Poupard-Stern share structure: N = p*q with safe primes, the
// decryption exponent d (d = 0 mod p'q', d = 1 mod N) Shamir-shared over
// Z_{N p'q'}, partial decryptions c^{2 Delta d_i} and Lagrange combination
// in the exponent with Delta = iota!. Correctness proofs for partial
// decryptions are not produced (semi-honest setting).
namespace kep::paillier {

using PartyIndex = uint32_t;

class PublicKey {
 public:
  PublicKey() = default;
  PublicKey(mpz_class modulus, uint32_t threshold, uint32_t parties);

  const mpz_class& n() const { return n_; }
  const mpz_class& n_squared() const { return n2_; }
  // Always n + 1.
  const mpz_class& g() const { return g_; }
  // iota!
  const mpz_class& delta() const { return delta_; }
  uint32_t threshold() const { return threshold_; }
  uint32_t parties() const { return parties_; }
  size_t key_bits() const { return mpz_sizeinbase(n_.get_mpz_t(), 2); }
  // (4 Delta^2)^-1 mod N, the final factor of share combination.
  const mpz_class& combine_factor() const { return inv_four_delta_sq_; }

  // Fields in declared order: N, g, Delta, tau, iota.
  Bytes Serialize() const;
  static PublicKey Deserialize(std::span<const uint8_t> bytes);
  Digest Fingerprint() const;

  friend bool operator==(const PublicKey& a, const PublicKey& b) {
    return a.n_ == b.n_ && a.threshold_ == b.threshold_ && a.parties_ == b.parties_;
  }

 private:
  mpz_class n_;
  mpz_class n2_;
  mpz_class g_;
  mpz_class delta_;
  mpz_class inv_four_delta_sq_;  // (4 Delta^2)^-1 mod N
  uint32_t threshold_ = 0;
  uint32_t parties_ = 0;
};

struct KeyShare {
  PartyIndex party_index = 0;
  mpz_class share;

  Bytes Serialize() const;
  static KeyShare Deserialize(std::span<const uint8_t> bytes);
};

struct Ciphertext {
  mpz_class value;

  Bytes Serialize() const;
  static Ciphertext Deserialize(std::span<const uint8_t> bytes);

  friend bool operator==(const Ciphertext& a, const Ciphertext& b) { return a.value == b.value; }
};

struct PartialDecryption {
  PartyIndex party_index = 0;
  mpz_class value;
};

struct KeyMaterial {
  PublicKey public_key;
  std::vector<KeyShare> shares;
};

inline constexpr size_t kMinKeyBits = 512;

// Trusted-dealer key generation. key_bits >= 512, iota >= 2,
// 1 <= tau <= iota.
KeyMaterial Keygen(uint32_t parties, uint32_t threshold, size_t key_bits, Rng& rng);

// Generates a safe prime p = 2p' + 1 of exactly `bits` bits whose two top
// bits are set. Exposed for tests.
mpz_class GenerateSafePrime(size_t bits, Rng& rng);

// 0 <= m < N, otherwise InputError.
Ciphertext Encrypt(const PublicKey& pk, const mpz_class& m, Rng& rng);
// The deterministic encryption (1 + N)^m with unit randomness. Only for
// public constants that every party must hold bit-identically.
Ciphertext EncryptPublic(const PublicKey& pk, const mpz_class& m);

// Throws InputError unless 0 < c < N^2 and gcd(c, N) = 1.
void Validate(const PublicKey& pk, const Ciphertext& c);

Ciphertext Add(const PublicKey& pk, const Ciphertext& a, const Ciphertext& b);
Ciphertext Sub(const PublicKey& pk, const Ciphertext& a, const Ciphertext& b);
// k is reduced mod N; negative values are accepted.
Ciphertext ScalarMul(const PublicKey& pk, const Ciphertext& a, const mpz_class& k);
Ciphertext Negate(const PublicKey& pk, const Ciphertext& a);
Ciphertext Rerandomize(const PublicKey& pk, const Ciphertext& a, Rng& rng);

PartialDecryption PartialDecrypt(const PublicKey& pk, const KeyShare& share, const Ciphertext& c);

// Uses the tau partials with smallest indices. ThresholdError when fewer
// than tau distinct indices are present; InputError on duplicates or
// indices outside [1, iota].
mpz_class Combine(const PublicKey& pk, const Ciphertext& c,
                  std::span<const PartialDecryption> partials);

// Convenience for tests and the dealer: partially decrypts with every share
// and combines.
mpz_class DecryptWithShares(const PublicKey& pk, std::span<const KeyShare> shares,
                            const Ciphertext& c);

}  // namespace kep::paillier
