#pragma once

#include <gmpxx.h>

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace kep {

using Bytes = std::vector<uint8_t>;
using Digest = std::array<uint8_t, 32>;

void AppendU16Be(uint16_t value, Bytes* out);
void AppendU32Be(uint32_t value, Bytes* out);
void AppendU64Be(uint64_t value, Bytes* out);

// Minimal-length big-endian magnitude; zero encodes as the empty string.
Bytes EncodeMagnitude(const mpz_class& value);
mpz_class DecodeMagnitude(std::span<const uint8_t> bytes);

// 4-byte big-endian length prefix followed by the minimal magnitude.
void AppendBigInt(const mpz_class& value, Bytes* out);

// Sequential reader over a byte string. All reads throw InputError on
// truncation.
class ByteReader {
 public:
  explicit ByteReader(std::span<const uint8_t> data) : data_(data) {}

  uint16_t ReadU16();
  uint32_t ReadU32();
  uint64_t ReadU64();
  mpz_class ReadBigInt();
  std::span<const uint8_t> ReadBytes(size_t n);

  size_t remaining() const { return data_.size() - offset_; }
  bool done() const { return remaining() == 0; }

 private:
  std::span<const uint8_t> data_;
  size_t offset_ = 0;
};

Digest Sha256(std::span<const uint8_t> data);
Digest Sha256(std::string_view text);
std::string ToHex(std::span<const uint8_t> data);

}  // namespace kep
