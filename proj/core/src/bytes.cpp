#include "kep/bytes.hpp"

#include <sodium.h>

#include "kep/errors.hpp"

namespace kep {

void AppendU16Be(uint16_t value, Bytes* out) {
  out->push_back(static_cast<uint8_t>(value >> 8));
  out->push_back(static_cast<uint8_t>(value));
}

void AppendU32Be(uint32_t value, Bytes* out) {
  for (int shift = 24; shift >= 0; shift -= 8) {
    out->push_back(static_cast<uint8_t>(value >> shift));
  }
}

void AppendU64Be(uint64_t value, Bytes* out) {
  for (int shift = 56; shift >= 0; shift -= 8) {
    out->push_back(static_cast<uint8_t>(value >> shift));
  }
}

Bytes EncodeMagnitude(const mpz_class& value) {
  if (sgn(value) < 0) {
    throw InputError("cannot encode a negative integer");
  }
  if (value == 0) {
    return {};
  }
  const size_t len = (mpz_sizeinbase(value.get_mpz_t(), 2) + 7) / 8;
  Bytes out(len);
  size_t written = 0;
  mpz_export(out.data(), &written, 1, 1, 1, 0, value.get_mpz_t());
  out.resize(written);
  return out;
}

mpz_class DecodeMagnitude(std::span<const uint8_t> bytes) {
  mpz_class value;
  if (!bytes.empty()) {
    mpz_import(value.get_mpz_t(), bytes.size(), 1, 1, 1, 0, bytes.data());
  }
  return value;
}

void AppendBigInt(const mpz_class& value, Bytes* out) {
  const Bytes mag = EncodeMagnitude(value);
  AppendU32Be(static_cast<uint32_t>(mag.size()), out);
  out->insert(out->end(), mag.begin(), mag.end());
}

std::span<const uint8_t> ByteReader::ReadBytes(size_t n) {
  if (n > remaining()) {
    throw InputError("truncated byte string");
  }
  auto out = data_.subspan(offset_, n);
  offset_ += n;
  return out;
}

uint16_t ByteReader::ReadU16() {
  auto b = ReadBytes(2);
  return static_cast<uint16_t>((b[0] << 8) | b[1]);
}

uint32_t ByteReader::ReadU32() {
  auto b = ReadBytes(4);
  return (static_cast<uint32_t>(b[0]) << 24) | (static_cast<uint32_t>(b[1]) << 16) |
         (static_cast<uint32_t>(b[2]) << 8) | static_cast<uint32_t>(b[3]);
}

uint64_t ByteReader::ReadU64() {
  const uint64_t hi = ReadU32();
  const uint64_t lo = ReadU32();
  return (hi << 32) | lo;
}

mpz_class ByteReader::ReadBigInt() {
  const uint32_t len = ReadU32();
  return DecodeMagnitude(ReadBytes(len));
}

Digest Sha256(std::span<const uint8_t> data) {
  Digest out{};
  crypto_hash_sha256(out.data(), data.data(), data.size());
  return out;
}

Digest Sha256(std::string_view text) {
  return Sha256(std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(text.data()), text.size()));
}

std::string ToHex(std::span<const uint8_t> data) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(data.size() * 2);
  for (uint8_t b : data) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xF]);
  }
  return out;
}

}  // namespace kep
