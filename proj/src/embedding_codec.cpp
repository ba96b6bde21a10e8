#include "embedding_codec.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

#include "byte_io.hpp"
#include "error.hpp"

namespace latentsearch::store {

const char* codec_name(EmbedCodec codec) {
  switch (codec) {
    case EmbedCodec::kRaw:
      return "raw";
    case EmbedCodec::kEntropy:
      return "entropy";
    case EmbedCodec::kFastLz:
      return "fastlz";
  }
  return "unknown";
}

EmbedCodec parse_codec_name(const std::string& name) {
  if (name == "raw") return EmbedCodec::kRaw;
  if (name == "entropy") return EmbedCodec::kEntropy;
  if (name == "fastlz") return EmbedCodec::kFastLz;
  fail(ErrorCode::kInvalidArgument, "unknown embedding codec '" + name + "' (expected raw|entropy|fastlz)");
}

EmbedCodec codec_from_tag(uint8_t tag) {
  require(tag <= static_cast<uint8_t>(EmbedCodec::kFastLz), ErrorCode::kInvalidArgument,
          "unknown embedding codec tag " + std::to_string(tag));
  return static_cast<EmbedCodec>(tag);
}

int16_t to_fixed(float v) {
  const float c = std::clamp(v, -1.0f, 1.0f);
  return static_cast<int16_t>(std::lround(static_cast<double>(c) * kFixedPointScale));
}

float from_fixed(int16_t q) { return static_cast<float>(static_cast<double>(q) / kFixedPointScale); }

std::vector<int16_t> to_fixed(std::span<const float> values) {
  std::vector<int16_t> out(values.size());
  std::transform(values.begin(), values.end(), out.begin(), [](float v) { return to_fixed(v); });
  return out;
}

std::vector<float> from_fixed(std::span<const int16_t> values) {
  std::vector<float> out(values.size());
  std::transform(values.begin(), values.end(), out.begin(), [](int16_t q) { return from_fixed(q); });
  return out;
}

int class_symbol(int16_t q) {
  if (q == 0) return 0;
  const auto mag = static_cast<uint16_t>(q < 0 ? -q : q);
  const int k = std::bit_width(mag);
  return q > 0 ? k : 15 + k;
}

ClassTable ClassTable::analytic(uint16_t generation, int dim) {
  require(dim >= 1, ErrorCode::kInvalidArgument, "embedding dim must be positive");
  const double sd = kFixedPointScale / std::sqrt(static_cast<double>(dim));
  // P(|x| < t) for x ~ N(0, sd^2)
  const auto inside = [sd](double t) { return std::erf(t / (sd * std::sqrt(2.0))); };
  std::vector<double> w(kClassSymbols, 0.0);
  w[0] = inside(0.5);
  for (int k = 1; k <= 15; ++k) {
    const double lo = std::ldexp(1.0, k - 1) - 0.5;
    const double hi = std::ldexp(1.0, k) - 0.5;
    const double half = 0.5 * (inside(hi) - inside(lo));
    w[k] = half;
    w[15 + k] = half;
  }
  return {generation, codec::QuantizedCdf::from_weights(w, 0)};
}

ClassTable ClassTable::fitted(uint16_t generation, std::span<const int16_t> values) {
  std::vector<double> w(kClassSymbols, 1.0);
  for (int16_t q : values) w[class_symbol(q)] += 1.0;
  return {generation, codec::QuantizedCdf::from_weights(w, 0)};
}

void ClassTableSet::add(ClassTable table) {
  table.cdf.validate();
  require(table.cdf.num_symbols() == kClassSymbols && table.cdf.offset == 0, ErrorCode::kInvalidArgument,
          "class table must cover the 31-symbol alphabet");
  const uint16_t gen = table.generation;
  tables_.insert_or_assign(gen, std::move(table));
}

const ClassTable& ClassTableSet::current() const {
  require(!tables_.empty(), ErrorCode::kInvalidArgument, "no entropy table available");
  return tables_.rbegin()->second;
}

const ClassTable& ClassTableSet::generation(uint16_t gen) const {
  const auto it = tables_.find(gen);
  require(it != tables_.end(), ErrorCode::kNotFound, "entropy table generation " + std::to_string(gen) + " unknown");
  return it->second;
}

std::vector<const ClassTable*> ClassTableSet::all() const {
  std::vector<const ClassTable*> out;
  for (const auto& [gen, t] : tables_) out.push_back(&t);
  return out;
}

namespace {

std::vector<uint8_t> entropy_encode(std::span<const int16_t> q, const ClassTable& table) {
  codec::RangeEncoder enc;
  for (int16_t v : q) {
    const int sym = class_symbol(v);
    enc.encode_symbol(table.cdf, sym);
    const int k = sym > 15 ? sym - 15 : sym;
    if (k > 1) {
      const auto mag = static_cast<uint32_t>(v < 0 ? -v : v);
      enc.encode_bits(mag - (1u << (k - 1)), static_cast<unsigned>(k - 1));
    }
  }
  const auto coded = enc.finish();
  std::vector<uint8_t> out;
  ByteWriter w(out);
  w.put<uint16_t>(table.generation);
  w.put<uint32_t>(static_cast<uint32_t>(coded.size()));
  w.bytes(coded);
  return out;
}

std::vector<int16_t> entropy_decode(std::span<const uint8_t> bytes, std::size_t dim, const ClassTableSet& tables) {
  ByteReader r(bytes, "entropy embedding");
  const auto gen = r.get<uint16_t>();
  const auto len = r.get<uint32_t>();
  if (r.remaining() < len) fail(ErrorCode::kTruncated, "entropy embedding payload truncated");
  if (r.remaining() > len) fail(ErrorCode::kCorruptStream, "entropy embedding payload has trailing bytes");
  const ClassTable& table = tables.generation(gen);
  codec::RangeDecoder dec(r.bytes(len));
  std::vector<int16_t> out(dim);
  for (auto& v : out) {
    const int sym = dec.decode_symbol(table.cdf);
    if (sym == 0) {
      v = 0;
      continue;
    }
    const int k = sym > 15 ? sym - 15 : sym;
    const uint32_t mag = (1u << (k - 1)) + dec.decode_bits(static_cast<unsigned>(k - 1));
    v = static_cast<int16_t>(sym > 15 ? -static_cast<int32_t>(mag) : static_cast<int32_t>(mag));
  }
  dec.finish();
  return out;
}

std::vector<uint8_t> fastlz_encode(std::span<const int16_t> q) {
  const auto* src = reinterpret_cast<const Bytef*>(q.data());
  const uLong src_len = static_cast<uLong>(q.size() * sizeof(int16_t));
  uLongf dst_len = compressBound(src_len);
  std::vector<uint8_t> out(dst_len);
  const int rc = compress2(out.data(), &dst_len, src, src_len, Z_BEST_SPEED);
  require(rc == Z_OK, ErrorCode::kInternal, "deflate failed");
  out.resize(dst_len);
  return out;
}

std::vector<int16_t> fastlz_decode(std::span<const uint8_t> bytes, std::size_t dim) {
  std::vector<int16_t> out(dim);
  uLongf dst_len = static_cast<uLongf>(dim * sizeof(int16_t));
  const int rc = uncompress(reinterpret_cast<Bytef*>(out.data()), &dst_len, bytes.data(),
                            static_cast<uLong>(bytes.size()));
  if (rc == Z_BUF_ERROR && dst_len == dim * sizeof(int16_t)) {
    fail(ErrorCode::kCorruptStream, "fastlz embedding inflates beyond its dimension");
  }
  if (rc == Z_BUF_ERROR) fail(ErrorCode::kTruncated, "fastlz embedding payload truncated");
  if (rc != Z_OK) fail(ErrorCode::kCorruptStream, "fastlz embedding payload corrupt");
  require(dst_len == dim * sizeof(int16_t), ErrorCode::kCorruptStream, "fastlz embedding has the wrong length");
  return out;
}

std::vector<float> raw_decode(std::span<const uint8_t> bytes, std::size_t dim) {
  if (bytes.size() < dim * sizeof(float)) fail(ErrorCode::kTruncated, "raw embedding payload truncated");
  require(bytes.size() == dim * sizeof(float), ErrorCode::kCorruptStream, "raw embedding payload too long");
  std::vector<float> out(dim);
  std::memcpy(out.data(), bytes.data(), bytes.size());
  return out;
}

}  // namespace

std::vector<uint8_t> compress_embedding(std::span<const float> embedding, EmbedCodec codec,
                                        const ClassTableSet& tables) {
  switch (codec) {
    case EmbedCodec::kRaw: {
      std::vector<uint8_t> out(embedding.size() * sizeof(float));
      std::memcpy(out.data(), embedding.data(), out.size());
      return out;
    }
    case EmbedCodec::kEntropy:
      return entropy_encode(to_fixed(embedding), tables.current());
    case EmbedCodec::kFastLz:
      return fastlz_encode(to_fixed(embedding));
  }
  fail(ErrorCode::kInvalidArgument, "unknown embedding codec");
}

std::vector<int16_t> decompress_fixed(std::span<const uint8_t> bytes, EmbedCodec codec, std::size_t dim,
                                      const ClassTableSet& tables) {
  switch (codec) {
    case EmbedCodec::kRaw:
      return to_fixed(raw_decode(bytes, dim));
    case EmbedCodec::kEntropy:
      return entropy_decode(bytes, dim, tables);
    case EmbedCodec::kFastLz:
      return fastlz_decode(bytes, dim);
  }
  fail(ErrorCode::kInvalidArgument, "unknown embedding codec");
}

std::vector<float> decompress_embedding(std::span<const uint8_t> bytes, EmbedCodec codec, std::size_t dim,
                                        const ClassTableSet& tables) {
  if (codec == EmbedCodec::kRaw) return raw_decode(bytes, dim);
  return from_fixed(decompress_fixed(bytes, codec, dim, tables));
}

}  // namespace latentsearch::store
