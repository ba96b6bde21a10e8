#pragma once

// Storage codecs for search embeddings.
//
// raw:     f32 values verbatim.
// entropy: 16-bit fixed point, then range-coded magnitude classes against a
//          per-database frequency table plus uniform mantissa bits.
//          Payload: table generation u16 | coded length u32 | coded bytes.
// fastlz:  16-bit fixed point, then zlib deflate at its fastest level.

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "range_coder.hpp"

namespace latentsearch::store {

enum class EmbedCodec : uint8_t { kRaw = 0, kEntropy = 1, kFastLz = 2 };

const char* codec_name(EmbedCodec codec);
/// Parses "raw" | "entropy" | "fastlz"; throws kInvalidArgument otherwise.
EmbedCodec parse_codec_name(const std::string& name);
/// Throws kInvalidArgument for tags outside the enum.
EmbedCodec codec_from_tag(uint8_t tag);

inline constexpr int kFixedPointScale = 32767;

int16_t to_fixed(float v);
float from_fixed(int16_t q);
std::vector<int16_t> to_fixed(std::span<const float> values);
std::vector<float> from_fixed(std::span<const int16_t> values);

/// Magnitude-class alphabet: 0, then +k / -k for bit lengths k = 1..15.
inline constexpr int kClassSymbols = 31;
int class_symbol(int16_t q);

/// A frozen symbol table for the entropy codec.
struct ClassTable {
  uint16_t generation = 0;
  codec::QuantizedCdf cdf;

  /// Fits class frequencies expected for unit vectors of dimension dim
  /// (coordinates ~ N(0, 1/dim)).
  static ClassTable analytic(uint16_t generation, int dim);
  /// Counts classes over the given fixed-point values (add-one smoothed).
  static ClassTable fitted(uint16_t generation, std::span<const int16_t> values);
};

/// Holds every table generation a database has issued; the newest encodes.
class ClassTableSet {
 public:
  void add(ClassTable table);
  const ClassTable& current() const;
  const ClassTable& generation(uint16_t gen) const;
  bool empty() const { return tables_.empty(); }
  std::vector<const ClassTable*> all() const;

 private:
  std::map<uint16_t, ClassTable> tables_;
};

std::vector<uint8_t> compress_embedding(std::span<const float> embedding, EmbedCodec codec,
                                        const ClassTableSet& tables);
/// Decodes dim values. Errors: kTruncated / kCorruptStream for malformed
/// payloads, kNotFound for an unknown table generation.
std::vector<float> decompress_embedding(std::span<const uint8_t> bytes, EmbedCodec codec, std::size_t dim,
                                        const ClassTableSet& tables);

/// Fixed-point values carried by a payload (raw payloads are quantized).
std::vector<int16_t> decompress_fixed(std::span<const uint8_t> bytes, EmbedCodec codec, std::size_t dim,
                                      const ClassTableSet& tables);

}  // namespace latentsearch::store
