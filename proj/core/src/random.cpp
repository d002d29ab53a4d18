#include "kep/random.hpp"

#include <sodium.h>

#include <cstring>
#include <mutex>
#include <stdexcept>
#include <vector>

#include "kep/bytes.hpp"
#include "kep/errors.hpp"

namespace kep {
namespace {

void EnsureSodium() {
  static std::once_flag flag;
  std::call_once(flag, [] {
    if (sodium_init() < 0) {
      throw std::runtime_error("libsodium initialisation failed");
    }
  });
}

}  // namespace

Rng::Rng(const Seed& seed) : key_(seed) { EnsureSodium(); }

Rng Rng::FromSeed(uint64_t seed, uint64_t stream) {
  Bytes material;
  const std::string_view domain = "kep/rng/v1";
  material.insert(material.end(), domain.begin(), domain.end());
  AppendU64Be(seed, &material);
  AppendU64Be(stream, &material);
  return Rng(Sha256(material));
}

Rng Rng::FromOs() {
  EnsureSodium();
  Seed seed;
  randombytes_buf(seed.data(), seed.size());
  return Rng(seed);
}

void Rng::Refill() {
  std::array<uint8_t, crypto_stream_chacha20_NONCEBYTES> nonce{};
  uint64_t n = nonce_++;
  for (size_t i = 0; i < nonce.size(); ++i) {
    nonce[i] = static_cast<uint8_t>(n >> (8 * i));
  }
  crypto_stream_chacha20(buffer_.data(), buffer_.size(), nonce.data(), key_.data());
  pos_ = 0;
}

void Rng::Fill(std::span<uint8_t> out) {
  size_t done = 0;
  while (done < out.size()) {
    if (pos_ == buffer_.size()) {
      Refill();
    }
    const size_t n = std::min(out.size() - done, buffer_.size() - pos_);
    std::memcpy(out.data() + done, buffer_.data() + pos_, n);
    pos_ += n;
    done += n;
  }
}

uint64_t Rng::NextU64() {
  std::array<uint8_t, 8> b;
  Fill(b);
  uint64_t v = 0;
  for (uint8_t x : b) {
    v = (v << 8) | x;
  }
  return v;
}

uint64_t Rng::Uniform(uint64_t bound) {
  if (bound == 0) {
    throw InputError("Rng::Uniform requires a positive bound");
  }
  // Rejection sampling on the largest multiple of bound.
  const uint64_t limit = max() - (max() % bound);
  for (;;) {
    const uint64_t v = NextU64();
    if (v < limit) {
      return v % bound;
    }
  }
}

mpz_class Rng::RandomBits(size_t bits) {
  std::vector<uint8_t> buf((bits + 7) / 8);
  Fill(buf);
  if (bits % 8 != 0 && !buf.empty()) {
    buf[0] &= static_cast<uint8_t>((1u << (bits % 8)) - 1);
  }
  return DecodeMagnitude(buf);
}

mpz_class Rng::UniformBelow(const mpz_class& bound) {
  if (sgn(bound) <= 0) {
    throw InputError("Rng::UniformBelow requires a positive bound");
  }
  const size_t bits = mpz_sizeinbase(bound.get_mpz_t(), 2);
  for (;;) {
    mpz_class v = RandomBits(bits);
    if (v < bound) {
      return v;
    }
  }
}

Rng Rng::Fork() {
  Seed child;
  Fill(child);
  return Rng(child);
}

}  // namespace kep
