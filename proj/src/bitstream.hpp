#pragma once

// "LICB" container, little-endian:
//   magic "LICB" (4) | version u8 | model_id u8 | orig_w u16 | orig_h u16 |
//   pad_w u16 | pad_h u16 | z_len u32 | z bytes | y_len u32 | y bytes | crc32 u32
// The CRC-32 covers every byte before it.

#include <cstdint>
#include <span>
#include <vector>

namespace latentsearch::codec {

inline constexpr uint8_t kBitstreamVersion = 1;
inline constexpr std::size_t kBitstreamFixedBytes = 4 + 1 + 1 + 2 * 4 + 4 + 4 + 4;

struct BitstreamHeader {
  uint8_t version = kBitstreamVersion;
  uint8_t model_id = 0;
  uint16_t orig_width = 0;
  uint16_t orig_height = 0;
  uint16_t pad_width = 0;
  uint16_t pad_height = 0;
};

struct Bitstream {
  BitstreamHeader header;
  std::vector<uint8_t> z_payload;
  std::vector<uint8_t> y_payload;

  std::size_t payload_bytes() const { return z_payload.size() + y_payload.size(); }
};

std::vector<uint8_t> serialize(const Bitstream& bs);

/// Full parse with integrity checks. Errors: kBadMagic, kUnsupportedVersion,
/// kTruncated, kCorruptStream (trailing data or bad dimensions),
/// kChecksumMismatch.
Bitstream parse_bitstream(std::span<const uint8_t> bytes);

/// Reads the fixed header fields only; payloads are neither copied nor verified.
BitstreamHeader peek_header(std::span<const uint8_t> bytes);

uint32_t crc32(std::span<const uint8_t> bytes);

}  // namespace latentsearch::codec
