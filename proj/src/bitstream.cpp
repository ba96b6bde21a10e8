#include "bitstream.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstring>
#include <string>

#include "byte_io.hpp"
#include "error.hpp"

namespace latentsearch::codec {

namespace {
constexpr char kMagic[4] = {'L', 'I', 'C', 'B'};
}

uint32_t crc32(std::span<const uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; chunk to stay portable for large buffers.
  std::size_t off = 0;
  while (off < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - off, 1u << 30);
    crc = ::crc32(crc, bytes.data() + off, static_cast<uInt>(n));
    off += n;
  }
  return static_cast<uint32_t>(crc);
}

std::vector<uint8_t> serialize(const Bitstream& bs) {
  std::vector<uint8_t> out;
  out.reserve(kBitstreamFixedBytes + bs.payload_bytes());
  ByteWriter w(out);
  w.bytes({reinterpret_cast<const uint8_t*>(kMagic), 4});
  w.put<uint8_t>(bs.header.version);
  w.put<uint8_t>(bs.header.model_id);
  w.put<uint16_t>(bs.header.orig_width);
  w.put<uint16_t>(bs.header.orig_height);
  w.put<uint16_t>(bs.header.pad_width);
  w.put<uint16_t>(bs.header.pad_height);
  w.put<uint32_t>(static_cast<uint32_t>(bs.z_payload.size()));
  w.bytes(bs.z_payload);
  w.put<uint32_t>(static_cast<uint32_t>(bs.y_payload.size()));
  w.bytes(bs.y_payload);
  w.put<uint32_t>(crc32(out));
  return out;
}

BitstreamHeader peek_header(std::span<const uint8_t> bytes) {
  ByteReader r(bytes, "bitstream header");
  const auto magic = r.bytes(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) fail(ErrorCode::kBadMagic, "not a LICB bitstream");
  BitstreamHeader h;
  h.version = r.get<uint8_t>();
  if (h.version != kBitstreamVersion) {
    fail(ErrorCode::kUnsupportedVersion, "bitstream version " + std::to_string(h.version) + " unsupported (expected " +
                                             std::to_string(kBitstreamVersion) + ")");
  }
  h.model_id = r.get<uint8_t>();
  h.orig_width = r.get<uint16_t>();
  h.orig_height = r.get<uint16_t>();
  h.pad_width = r.get<uint16_t>();
  h.pad_height = r.get<uint16_t>();
  return h;
}

Bitstream parse_bitstream(std::span<const uint8_t> bytes) {
  Bitstream bs;
  bs.header = peek_header(bytes);
  ByteReader r(bytes, "bitstream");
  r.bytes(4 + 1 + 1 + 2 * 4);
  const auto z_len = r.get<uint32_t>();
  const auto z = r.bytes(z_len);
  const auto y_len = r.get<uint32_t>();
  const auto y = r.bytes(y_len);
  const std::size_t body = r.position();
  const auto stored_crc = r.get<uint32_t>();
  if (r.remaining() != 0) {
    fail(ErrorCode::kCorruptStream, "bitstream has " + std::to_string(r.remaining()) + " trailing bytes");
  }
  if (crc32(bytes.first(body)) != stored_crc) fail(ErrorCode::kChecksumMismatch, "bitstream checksum mismatch");

  const BitstreamHeader& h = bs.header;
  const bool dims_ok = h.orig_width >= 1 && h.orig_height >= 1 && h.pad_width % 64 == 0 && h.pad_height % 64 == 0 &&
                       h.pad_width >= h.orig_width && h.pad_height >= h.orig_height;
  require(dims_ok, ErrorCode::kCorruptStream, "bitstream dimensions inconsistent");
  bs.z_payload.assign(z.begin(), z.end());
  bs.y_payload.assign(y.begin(), y.end());
  return bs;
}

}  // namespace latentsearch::codec
