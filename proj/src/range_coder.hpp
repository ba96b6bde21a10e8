#pragma once

// Byte-oriented range coder over 16-bit quantized cumulative frequencies.
//
// Carries are resolved through a one-byte cache plus a run of pending 0xFF
// bytes (a 64-bit low register, 32-bit range). The stream omits the leading
// byte (always zero) and ends with the shortest tail that still pins the
// final interval; the decoder reads implicit zero bytes past the end.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace latentsearch::codec {

inline constexpr unsigned kCdfPrecision = 16;
inline constexpr uint32_t kCdfTotal = 1u << kCdfPrecision;

/// Cumulative frequency table over the symbol values [offset, offset + n).
/// cum has n + 1 entries, cum[0] == 0, cum[n] == kCdfTotal, and every
/// symbol has frequency >= 1.
struct QuantizedCdf {
  int32_t offset = 0;
  std::vector<uint32_t> cum;

  int32_t num_symbols() const { return static_cast<int32_t>(cum.size()) - 1; }
  int32_t min_symbol() const { return offset; }
  int32_t max_symbol() const { return offset + num_symbols() - 1; }
  uint32_t freq(int32_t index) const { return cum[index + 1] - cum[index]; }

  /// Throws kInvalidArgument if the table is malformed.
  void validate() const;

  /// Builds a table from non-negative weights; every symbol receives
  /// frequency >= 1 and the remainder goes to the heaviest symbol.
  static QuantizedCdf from_weights(std::span<const double> weights, int32_t offset);
};

class RangeEncoder {
 public:
  /// Encodes the interval [cum, cum + freq) out of 2^total_bits.
  void encode(uint32_t cum, uint32_t freq, unsigned total_bits);
  /// Encodes nbits (<= 16) raw bits.
  void encode_bits(uint32_t value, unsigned nbits);
  void encode_symbol(const QuantizedCdf& cdf, int32_t value);
  std::vector<uint8_t> finish();

 private:
  void shift_low();
  void normalize();

  uint64_t low_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  uint8_t cache_ = 0;
  uint64_t cache_size_ = 1;
  bool first_byte_ = true;
  std::vector<uint8_t> out_;
};

class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const uint8_t> bytes);

  /// Returns the target value in [0, 2^total_bits); throws kCorruptStream if
  /// the code lies outside every symbol interval.
  uint32_t decode_target(unsigned total_bits);
  void consume(uint32_t cum, uint32_t freq);
  uint32_t decode_bits(unsigned nbits);
  int32_t decode_symbol(const QuantizedCdf& cdf);
  /// Verifies the stream was consumed exactly (no trailing bytes and no more
  /// implicit zero bytes than the encoder's tail can elide).
  void finish() const;

 private:
  uint8_t next_byte();
  void normalize();

  std::span<const uint8_t> bytes_;
  std::size_t pos_ = 0;
  std::size_t implicit_ = 0;
  uint32_t code_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  uint32_t step_ = 0;
};

using CdfSelector = std::function<const QuantizedCdf&(std::size_t)>;

/// Encodes symbols[i] with the table selector(i).
std::vector<uint8_t> range_encode(std::span<const int32_t> symbols, const CdfSelector& selector);
/// Decodes count symbols; selector(i) must match the encoder's.
std::vector<int32_t> range_decode(std::span<const uint8_t> bytes, const CdfSelector& selector, std::size_t count);

}  // namespace latentsearch::codec
