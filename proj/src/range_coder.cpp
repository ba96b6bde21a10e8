#include "range_coder.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "error.hpp"

namespace latentsearch::codec {

namespace {
constexpr uint32_t kTop = 1u << 24;
// With range >= 2^24 the flush never needs more than one byte of tail, but
// the decoder primes four bytes up front.
constexpr std::size_t kMaxImplicitBytes = 4;
}  // namespace

void QuantizedCdf::validate() const {
  require(cum.size() >= 2, ErrorCode::kInvalidArgument, "cdf needs at least one symbol");
  require(cum.front() == 0 && cum.back() == kCdfTotal, ErrorCode::kInvalidArgument,
          "cdf must start at 0 and end at 2^16");
  for (std::size_t i = 1; i < cum.size(); ++i) {
    require(cum[i] > cum[i - 1], ErrorCode::kInvalidArgument,
            "cdf not strictly increasing at index " + std::to_string(i));
  }
}

QuantizedCdf QuantizedCdf::from_weights(std::span<const double> weights, int32_t offset) {
  const std::size_t n = weights.size();
  require(n >= 1 && n <= kCdfTotal, ErrorCode::kInvalidArgument, "cdf symbol count out of range");
  double total = 0.0;
  for (double w : weights) {
    require(w >= 0.0 && std::isfinite(w), ErrorCode::kInvalidArgument, "cdf weight must be finite and >= 0");
    total += w;
  }
  const double spread = static_cast<double>(kCdfTotal - n);
  std::vector<uint32_t> freq(n, 1);
  std::size_t heaviest = 0;
  uint64_t assigned = n;
  for (std::size_t i = 0; i < n; ++i) {
    const double share = total > 0.0 ? weights[i] / total : 1.0 / static_cast<double>(n);
    const auto extra = static_cast<uint32_t>(std::floor(share * spread));
    freq[i] += extra;
    assigned += extra;
    if (weights[i] > weights[heaviest]) heaviest = i;
  }
  freq[heaviest] += static_cast<uint32_t>(kCdfTotal - assigned);

  QuantizedCdf cdf;
  cdf.offset = offset;
  cdf.cum.resize(n + 1);
  cdf.cum[0] = 0;
  for (std::size_t i = 0; i < n; ++i) cdf.cum[i + 1] = cdf.cum[i] + freq[i];
  return cdf;
}

void RangeEncoder::shift_low() {
  if (static_cast<uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
    const auto carry = static_cast<uint8_t>(low_ >> 32);
    uint8_t pending = cache_;
    do {
      const auto byte = static_cast<uint8_t>(pending + carry);
      // The first byte only ever holds the zero cache seed.
      if (first_byte_) {
        first_byte_ = false;
      } else {
        out_.push_back(byte);
      }
      pending = 0xFF;
    } while (--cache_size_ != 0);
    cache_ = static_cast<uint8_t>(low_ >> 24);
  }
  ++cache_size_;
  low_ = (low_ & 0x00FFFFFFu) << 8;
}

void RangeEncoder::normalize() {
  while (range_ < kTop) {
    range_ <<= 8;
    shift_low();
  }
}

void RangeEncoder::encode(uint32_t cum, uint32_t freq, unsigned total_bits) {
  const uint32_t r = range_ >> total_bits;
  low_ += static_cast<uint64_t>(r) * cum;
  range_ = r * freq;
  normalize();
}

void RangeEncoder::encode_bits(uint32_t value, unsigned nbits) {
  if (nbits == 0) return;
  require(nbits <= kCdfPrecision && value < (1u << nbits), ErrorCode::kOutOfRange, "encode_bits: value too wide");
  encode(value, 1, nbits);
}

void RangeEncoder::encode_symbol(const QuantizedCdf& cdf, int32_t value) {
  if (value < cdf.min_symbol() || value > cdf.max_symbol()) {
    fail(ErrorCode::kOutOfRange, "symbol " + std::to_string(value) + " outside cdf range [" +
                                     std::to_string(cdf.min_symbol()) + ", " + std::to_string(cdf.max_symbol()) +
                                     "]");
  }
  const int32_t idx = value - cdf.offset;
  encode(cdf.cum[idx], cdf.freq(idx), kCdfPrecision);
}

std::vector<uint8_t> RangeEncoder::finish() {
  // Shortest value V in [low, low + range) whose trailing bytes are zero.
  int nbytes = 0;
  uint64_t value = low_;
  for (; nbytes <= 4; ++nbytes) {
    const uint64_t mask = nbytes == 4 ? 0 : (0xFFFFFFFFull >> (8 * nbytes));
    const uint64_t candidate = (low_ + mask) & ~mask;
    if (candidate - low_ < range_) {
      value = candidate;
      break;
    }
  }
  low_ = value;
  for (int i = 0; i < nbytes + 1; ++i) shift_low();
  return std::move(out_);
}

RangeDecoder::RangeDecoder(std::span<const uint8_t> bytes) : bytes_(bytes) {
  for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
}

uint8_t RangeDecoder::next_byte() {
  if (pos_ < bytes_.size()) return bytes_[pos_++];
  if (++implicit_ > kMaxImplicitBytes) fail(ErrorCode::kTruncated, "range decoder: stream truncated");
  return 0;
}

void RangeDecoder::normalize() {
  while (range_ < kTop) {
    code_ = (code_ << 8) | next_byte();
    range_ <<= 8;
  }
}

uint32_t RangeDecoder::decode_target(unsigned total_bits) {
  step_ = range_ >> total_bits;
  const uint32_t v = code_ / step_;
  if (v >= (1u << total_bits)) fail(ErrorCode::kCorruptStream, "range decoder: code outside coding interval");
  return v;
}

void RangeDecoder::consume(uint32_t cum, uint32_t freq) {
  code_ -= step_ * cum;
  range_ = step_ * freq;
  normalize();
}

uint32_t RangeDecoder::decode_bits(unsigned nbits) {
  if (nbits == 0) return 0;
  require(nbits <= kCdfPrecision, ErrorCode::kOutOfRange, "decode_bits: too many bits");
  const uint32_t v = decode_target(nbits);
  consume(v, 1);
  return v;
}

int32_t RangeDecoder::decode_symbol(const QuantizedCdf& cdf) {
  const uint32_t v = decode_target(kCdfPrecision);
  const auto it = std::upper_bound(cdf.cum.begin(), cdf.cum.end(), v);
  const auto idx = static_cast<int32_t>(it - cdf.cum.begin()) - 1;
  consume(cdf.cum[idx], cdf.freq(idx));
  return cdf.offset + idx;
}

void RangeDecoder::finish() const {
  if (pos_ != bytes_.size()) {
    fail(ErrorCode::kCorruptStream,
         "range decoder: " + std::to_string(bytes_.size() - pos_) + " trailing bytes after last symbol");
  }
}

std::vector<uint8_t> range_encode(std::span<const int32_t> symbols, const CdfSelector& selector) {
  RangeEncoder enc;
  for (std::size_t i = 0; i < symbols.size(); ++i) enc.encode_symbol(selector(i), symbols[i]);
  return enc.finish();
}

std::vector<int32_t> range_decode(std::span<const uint8_t> bytes, const CdfSelector& selector, std::size_t count) {
  RangeDecoder dec(bytes);
  std::vector<int32_t> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = dec.decode_symbol(selector(i));
  dec.finish();
  return out;
}

}  // namespace latentsearch::codec
