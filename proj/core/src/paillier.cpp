#include "kep/paillier.hpp"

#include <algorithm>
#include <set>
#include <string>

#include "kep/errors.hpp"

namespace kep::paillier {
namespace {

constexpr size_t kSieveWindow = 8192;
constexpr uint32_t kSieveLimit = 20000;
constexpr int kPrimalityReps = 30;

const std::vector<uint32_t>& SmallOddPrimes() {
  static const std::vector<uint32_t> primes = [] {
    std::vector<bool> composite(kSieveLimit + 1, false);
    std::vector<uint32_t> out;
    for (uint32_t i = 2; i <= kSieveLimit; ++i) {
      if (composite[i]) continue;
      if (i > 2) out.push_back(i);
      for (uint64_t j = static_cast<uint64_t>(i) * i; j <= kSieveLimit; j += i) {
        composite[j] = true;
      }
    }
    return out;
  }();
  return primes;
}

mpz_class Factorial(uint32_t n) {
  mpz_class out;
  mpz_fac_ui(out.get_mpz_t(), n);
  return out;
}

mpz_class PowMod(const mpz_class& base, const mpz_class& exp, const mpz_class& mod) {
  mpz_class out;
  mpz_powm(out.get_mpz_t(), base.get_mpz_t(), exp.get_mpz_t(), mod.get_mpz_t());
  return out;
}

mpz_class InvertMod(const mpz_class& a, const mpz_class& mod) {
  mpz_class out;
  if (mpz_invert(out.get_mpz_t(), a.get_mpz_t(), mod.get_mpz_t()) == 0) {
    throw InputError("value is not invertible");
  }
  return out;
}

// r^N mod N^2 for r uniform in Z*_N.
mpz_class RandomNthPower(const PublicKey& pk, Rng& rng) {
  for (;;) {
    mpz_class r = rng.UniformBelow(pk.n());
    if (r == 0) continue;
    mpz_class g;
    mpz_gcd(g.get_mpz_t(), r.get_mpz_t(), pk.n().get_mpz_t());
    if (g != 1) continue;
    return PowMod(r, pk.n(), pk.n_squared());
  }
}

// Exponentiation by an exponent taken mod N, choosing the shorter of k and
// N - k (and inverting for the latter).
mpz_class ExpByResidue(const PublicKey& pk, const mpz_class& c, const mpz_class& k) {
  mpz_class kk = k % pk.n();
  if (kk < 0) kk += pk.n();
  const mpz_class neg = pk.n() - kk;
  if (neg < kk) {
    return PowMod(InvertMod(c, pk.n_squared()), neg, pk.n_squared());
  }
  return PowMod(c, kk, pk.n_squared());
}

}  // namespace

PublicKey::PublicKey(mpz_class modulus, uint32_t threshold, uint32_t parties)
    : n_(std::move(modulus)), threshold_(threshold), parties_(parties) {
  if (n_ <= 1 || parties_ < 1 || threshold_ < 1 || threshold_ > parties_) {
    throw InputError("invalid public key parameters");
  }
  n2_ = n_ * n_;
  g_ = n_ + 1;
  delta_ = Factorial(parties_);
  inv_four_delta_sq_ = InvertMod(4 * delta_ * delta_ % n_, n_);
}

Bytes PublicKey::Serialize() const {
  Bytes out;
  AppendBigInt(n_, &out);
  AppendBigInt(g_, &out);
  AppendBigInt(delta_, &out);
  AppendBigInt(mpz_class(threshold_), &out);
  AppendBigInt(mpz_class(parties_), &out);
  return out;
}

PublicKey PublicKey::Deserialize(std::span<const uint8_t> bytes) {
  ByteReader reader(bytes);
  mpz_class n = reader.ReadBigInt();
  mpz_class g = reader.ReadBigInt();
  mpz_class delta = reader.ReadBigInt();
  mpz_class tau = reader.ReadBigInt();
  mpz_class iota = reader.ReadBigInt();
  if (!reader.done()) {
    throw InputError("trailing bytes after public key");
  }
  if (!tau.fits_uint_p() || !iota.fits_uint_p()) {
    throw InputError("public key party counts out of range");
  }
  PublicKey pk(n, static_cast<uint32_t>(tau.get_ui()), static_cast<uint32_t>(iota.get_ui()));
  if (pk.g() != g || pk.delta() != delta) {
    throw InputError("public key fields are inconsistent");
  }
  return pk;
}

Digest PublicKey::Fingerprint() const { return Sha256(Serialize()); }

Bytes KeyShare::Serialize() const {
  Bytes out;
  AppendBigInt(mpz_class(party_index), &out);
  AppendBigInt(share, &out);
  return out;
}

KeyShare KeyShare::Deserialize(std::span<const uint8_t> bytes) {
  ByteReader reader(bytes);
  mpz_class index = reader.ReadBigInt();
  KeyShare out;
  out.share = reader.ReadBigInt();
  if (!reader.done() || !index.fits_uint_p()) {
    throw InputError("malformed key share");
  }
  out.party_index = static_cast<PartyIndex>(index.get_ui());
  return out;
}

Bytes Ciphertext::Serialize() const {
  Bytes out;
  AppendBigInt(value, &out);
  return out;
}

Ciphertext Ciphertext::Deserialize(std::span<const uint8_t> bytes) {
  ByteReader reader(bytes);
  Ciphertext c{reader.ReadBigInt()};
  if (!reader.done()) {
    throw InputError("trailing bytes after ciphertext");
  }
  return c;
}

mpz_class GenerateSafePrime(size_t bits, Rng& rng) {
  if (bits < 16) {
    throw InputError("safe prime bit length too small");
  }
  const auto& small = SmallOddPrimes();
  std::vector<bool> struck(kSieveWindow);
  for (;;) {
    // p' has bits-1 bits with its two top bits set, so p = 2p'+1 has
    // exactly `bits` bits with its two top bits set.
    mpz_class base = rng.RandomBits(bits - 1);
    mpz_setbit(base.get_mpz_t(), bits - 2);
    mpz_setbit(base.get_mpz_t(), bits - 3);
    mpz_setbit(base.get_mpz_t(), 0);

    std::fill(struck.begin(), struck.end(), false);
    for (uint32_t s : small) {
      const uint64_t r = mpz_fdiv_ui(base.get_mpz_t(), s);
      const uint64_t inv2 = (s + 1) / 2;
      // p' + 2t = 0 (mod s)
      const uint64_t t1 = ((s - r) % s) * inv2 % s;
      // 2(p' + 2t) + 1 = 0 (mod s), i.e. p' + 2t = (s-1)/2 (mod s)
      const uint64_t t2 = ((((s - 1) / 2) + s - r) % s) * inv2 % s;
      for (uint64_t t = t1; t < kSieveWindow; t += s) struck[t] = true;
      for (uint64_t t = t2; t < kSieveWindow; t += s) struck[t] = true;
    }
    for (size_t t = 0; t < kSieveWindow; ++t) {
      if (struck[t]) continue;
      mpz_class q = base + 2 * static_cast<unsigned long>(t);
      if (mpz_sizeinbase(q.get_mpz_t(), 2) != bits - 1) break;
      if (mpz_probab_prime_p(q.get_mpz_t(), 1) == 0) continue;
      mpz_class p = 2 * q + 1;
      if (mpz_probab_prime_p(p.get_mpz_t(), 1) == 0) continue;
      if (mpz_probab_prime_p(q.get_mpz_t(), kPrimalityReps) == 0) continue;
      if (mpz_probab_prime_p(p.get_mpz_t(), kPrimalityReps) == 0) continue;
      return p;
    }
  }
}

KeyMaterial Keygen(uint32_t parties, uint32_t threshold, size_t key_bits, Rng& rng) {
  if (key_bits < kMinKeyBits) {
    throw InputError("key_bits must be at least " + std::to_string(kMinKeyBits));
  }
  if (parties < 2) {
    throw InputError("at least two parties are required");
  }
  if (threshold < 1 || threshold > parties) {
    throw InputError("threshold must satisfy 1 <= tau <= iota");
  }
  const size_t p_bits = key_bits / 2;
  const size_t q_bits = key_bits - p_bits;
  mpz_class p = GenerateSafePrime(p_bits, rng);
  mpz_class q;
  do {
    q = GenerateSafePrime(q_bits, rng);
  } while (q == p);

  mpz_class n = p * q;
  // Smallest prime factor of N exceeds iota, so gcd(N, iota!) = 1.
  if (mpz_sizeinbase(n.get_mpz_t(), 2) != key_bits) {
    throw InvariantError("modulus has the wrong bit length");
  }
  const mpz_class p_prime = (p - 1) / 2;
  const mpz_class q_prime = (q - 1) / 2;
  const mpz_class m = p_prime * q_prime;
  const mpz_class nm = n * m;
  // d = 0 (mod m), d = 1 (mod N)
  const mpz_class d = m * InvertMod(m, n);

  std::vector<mpz_class> coeffs{d};
  for (uint32_t k = 1; k < threshold; ++k) {
    coeffs.push_back(rng.UniformBelow(nm));
  }

  KeyMaterial out{PublicKey(n, threshold, parties), {}};
  for (uint32_t i = 1; i <= parties; ++i) {
    mpz_class acc = 0;
    for (size_t k = coeffs.size(); k-- > 0;) {
      acc = (acc * i + coeffs[k]) % nm;
    }
    out.shares.push_back(KeyShare{i, acc});
  }
  return out;
}

void Validate(const PublicKey& pk, const Ciphertext& c) {
  if (c.value <= 0 || c.value >= pk.n_squared()) {
    throw InputError("ciphertext outside (0, N^2)");
  }
  mpz_class g;
  mpz_gcd(g.get_mpz_t(), c.value.get_mpz_t(), pk.n().get_mpz_t());
  if (g != 1) {
    throw InputError("ciphertext not a unit modulo N");
  }
}

Ciphertext EncryptPublic(const PublicKey& pk, const mpz_class& m) {
  mpz_class mm = m % pk.n();
  if (mm < 0) mm += pk.n();
  // (1 + N)^m = 1 + mN (mod N^2)
  return Ciphertext{(1 + mm * pk.n()) % pk.n_squared()};
}

Ciphertext Encrypt(const PublicKey& pk, const mpz_class& m, Rng& rng) {
  if (m < 0 || m >= pk.n()) {
    throw InputError("plaintext outside [0, N)");
  }
  mpz_class c = EncryptPublic(pk, m).value * RandomNthPower(pk, rng);
  return Ciphertext{c % pk.n_squared()};
}

Ciphertext Add(const PublicKey& pk, const Ciphertext& a, const Ciphertext& b) {
  Validate(pk, a);
  Validate(pk, b);
  return Ciphertext{a.value * b.value % pk.n_squared()};
}

Ciphertext Sub(const PublicKey& pk, const Ciphertext& a, const Ciphertext& b) {
  return Add(pk, a, Negate(pk, b));
}

Ciphertext ScalarMul(const PublicKey& pk, const Ciphertext& a, const mpz_class& k) {
  return Ciphertext{ExpByResidue(pk, a.value, k)};
}

Ciphertext Negate(const PublicKey& pk, const Ciphertext& a) {
  // Inverse in Z*_{N^2}; decrypts to N - m like a^(N-1), at the cost of one
  // extended gcd.
  return Ciphertext{InvertMod(a.value, pk.n_squared())};
}

Ciphertext Rerandomize(const PublicKey& pk, const Ciphertext& a, Rng& rng) {
  return Ciphertext{a.value * RandomNthPower(pk, rng) % pk.n_squared()};
}

PartialDecryption PartialDecrypt(const PublicKey& pk, const KeyShare& share, const Ciphertext& c) {
  const mpz_class exp = 2 * pk.delta() * share.share;
  return PartialDecryption{share.party_index, PowMod(c.value, exp, pk.n_squared())};
}

mpz_class Combine(const PublicKey& pk, const Ciphertext& c,
                  std::span<const PartialDecryption> partials) {
  std::vector<const PartialDecryption*> sorted;
  std::set<PartyIndex> seen;
  for (const auto& p : partials) {
    if (p.party_index < 1 || p.party_index > pk.parties()) {
      throw InputError("partial decryption from unknown party " + std::to_string(p.party_index));
    }
    if (!seen.insert(p.party_index).second) {
      throw InputError("duplicate partial decryption from party " + std::to_string(p.party_index));
    }
    sorted.push_back(&p);
  }
  if (seen.size() < pk.threshold()) {
    throw ThresholdError("need " + std::to_string(pk.threshold()) + " partial decryptions, got " +
                         std::to_string(seen.size()));
  }
  (void)c;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto* a, const auto* b) { return a->party_index < b->party_index; });
  sorted.resize(pk.threshold());

  mpz_class acc = 1;
  for (const auto* pj : sorted) {
    // mu_j = Delta * prod_{j' != j} j' / (j' - j), an integer.
    mpz_class num = pk.delta();
    mpz_class den = 1;
    for (const auto* pk2 : sorted) {
      if (pk2 == pj) continue;
      num *= static_cast<long>(pk2->party_index);
      den *= static_cast<long>(pk2->party_index) - static_cast<long>(pj->party_index);
    }
    mpz_class mu;
    mpz_divexact(mu.get_mpz_t(), num.get_mpz_t(), den.get_mpz_t());
    mpz_class exp = 2 * abs(mu);
    mpz_class term = PowMod(pj->value, exp, pk.n_squared());
    if (mu < 0) {
      term = InvertMod(term, pk.n_squared());
    }
    acc = acc * term % pk.n_squared();
  }
  // acc = (1 + N)^{4 Delta^2 m}
  mpz_class l = (acc - 1) / pk.n();
  return l * pk.combine_factor() % pk.n();
}

mpz_class DecryptWithShares(const PublicKey& pk, std::span<const KeyShare> shares,
                            const Ciphertext& c) {
  std::vector<PartialDecryption> partials;
  partials.reserve(shares.size());
  for (const auto& s : shares) {
    partials.push_back(PartialDecrypt(pk, s, c));
  }
  return Combine(pk, c, partials);
}

}  // namespace kep::paillier
