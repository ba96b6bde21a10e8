#include "store.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <algorithm>
#include <cstring>
#include <fstream>

#include "bitstream.hpp"
#include "byte_io.hpp"
#include "error.hpp"
#include "log.hpp"

namespace latentsearch::store {

namespace {

constexpr char kManifestMagic[4] = {'L', 'I', 'C', 'D'};
// id u64 | w u16 | h u16 | tag u8 | embed_len u32 | bs_len u32 | crc u32
constexpr uint32_t kRecordOverhead = 8 + 2 + 2 + 1 + 4 + 4 + 4;
constexpr uint32_t kMaxRecordBytes = 1u << 30;
// Byte positions inside a record, counted from its rec_len field.
constexpr std::size_t kTagAt = 4 + 8 + 2 + 2;
constexpr std::size_t kEmbedAt = kTagAt + 1 + 4;

[[noreturn]] void fail_errno(const std::string& what) {
  fail(ErrorCode::kIo, what + ": " + std::strerror(errno));
}

void write_all(int fd, const uint8_t* data, std::size_t n) {
  while (n > 0) {
    const ssize_t w = ::write(fd, data, n);
    if (w < 0) {
      if (errno == EINTR) continue;
      fail_errno("write");
    }
    data += w;
    n -= static_cast<std::size_t>(w);
  }
}

void pread_all(int fd, uint8_t* data, std::size_t n, uint64_t offset) {
  while (n > 0) {
    const ssize_t r = ::pread(fd, data, n, static_cast<off_t>(offset));
    if (r < 0) {
      if (errno == EINTR) continue;
      fail_errno("pread");
    }
    if (r == 0) fail(ErrorCode::kTruncated, "record log ended early");
    data += r;
    n -= static_cast<std::size_t>(r);
    offset += static_cast<uint64_t>(r);
  }
}

}  // namespace

UnifiedDb::UnifiedDb(const std::filesystem::path& dir, StoreOptions options)
    : dir_(dir), options_(options), dim_(options.dim), default_codec_(options.default_codec),
      rebuild_interval_(options.rebuild_interval) {
  require(options.dim >= 1, ErrorCode::kInvalidArgument, "embedding dim must be positive");
  require(options.rebuild_interval >= 1, ErrorCode::kInvalidArgument, "rebuild interval must be positive");
  std::error_code ec;
  if (!std::filesystem::exists(manifest_path(dir_), ec)) {
    require(!options.read_only, ErrorCode::kNotFound, "no database at " + dir_.string());
    std::filesystem::create_directories(dir_, ec);
    require(!ec, ErrorCode::kIo, "cannot create database directory " + dir_.string() + ": " + ec.message());
    tables_.add(ClassTable::analytic(0, dim_));
    write_manifest();
  } else {
    load_manifest();
    if (!options.read_only && dim_ != options.dim) {
      fail(ErrorCode::kModelMismatch, "database embedding dim " + std::to_string(dim_) +
                                          " does not match requested " + std::to_string(options.dim));
    }
  }
  const int flags = options.read_only ? O_RDONLY : (O_RDWR | O_CREAT);
  fd_ = ::open(log_path(dir_).c_str(), flags | O_CLOEXEC, 0644);
  if (fd_ < 0) fail_errno("open " + log_path(dir_).string());
  scan_log();
}

UnifiedDb::~UnifiedDb() {
  if (fd_ >= 0) ::close(fd_);
}

void UnifiedDb::write_manifest() const {
  std::vector<uint8_t> out;
  ByteWriter w(out);
  w.bytes({reinterpret_cast<const uint8_t*>(kManifestMagic), 4});
  w.put<uint16_t>(kManifestVersion);
  w.put<uint8_t>(static_cast<uint8_t>(default_codec_));
  w.put<uint32_t>(static_cast<uint32_t>(dim_));
  w.put<uint32_t>(rebuild_interval_);
  const auto tables = tables_.all();
  w.put<uint16_t>(static_cast<uint16_t>(tables.size()));
  for (const ClassTable* t : tables) {
    w.put<uint16_t>(t->generation);
    for (uint32_t c : t->cdf.cum) w.put<uint32_t>(c);
  }
  w.put<uint32_t>(codec::crc32(out));

  const auto tmp = dir_ / "manifest.tmp";
  {
    const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd < 0) fail_errno("open " + tmp.string());
    try {
      write_all(fd, out.data(), out.size());
      if (::fsync(fd) != 0) fail_errno("fsync manifest");
    } catch (...) {
      ::close(fd);
      throw;
    }
    ::close(fd);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, manifest_path(dir_), ec);
  require(!ec, ErrorCode::kIo, "cannot install manifest: " + ec.message());
}

void UnifiedDb::load_manifest() {
  std::ifstream f(manifest_path(dir_), std::ios::binary);
  require(static_cast<bool>(f), ErrorCode::kIo, "cannot read manifest in " + dir_.string());
  const std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  require(bytes.size() >= 8, ErrorCode::kTruncated, "manifest truncated");
  const uint32_t stored = [&] {
    uint32_t v;
    std::memcpy(&v, bytes.data() + bytes.size() - 4, 4);
    return v;
  }();
  const std::span<const uint8_t> body(bytes.data(), bytes.size() - 4);
  ByteReader r(body, "manifest");
  if (std::memcmp(r.bytes(4).data(), kManifestMagic, 4) != 0) fail(ErrorCode::kBadMagic, "not a LICD manifest");
  const auto version = r.get<uint16_t>();
  if (version != kManifestVersion) {
    fail(ErrorCode::kUnsupportedVersion, "manifest version " + std::to_string(version) + " unsupported");
  }
  if (codec::crc32(body) != stored) fail(ErrorCode::kChecksumMismatch, "manifest checksum mismatch");
  default_codec_ = codec_from_tag(r.get<uint8_t>());
  dim_ = static_cast<int>(r.get<uint32_t>());
  rebuild_interval_ = r.get<uint32_t>();
  const auto count = r.get<uint16_t>();
  for (uint16_t i = 0; i < count; ++i) {
    ClassTable t;
    t.generation = r.get<uint16_t>();
    t.cdf.offset = 0;
    for (int j = 0; j <= kClassSymbols; ++j) t.cdf.cum.push_back(r.get<uint32_t>());
    tables_.add(std::move(t));
  }
  require(!tables_.empty() && dim_ >= 1 && rebuild_interval_ >= 1, ErrorCode::kCorruptStream, "manifest inconsistent");
}

namespace {

bool all_zero(int fd, uint64_t from, uint64_t to) {
  std::vector<uint8_t> chunk(64 * 1024);
  while (from < to) {
    const auto n = static_cast<std::size_t>(std::min<uint64_t>(chunk.size(), to - from));
    pread_all(fd, chunk.data(), n, from);
    if (std::any_of(chunk.begin(), chunk.begin() + static_cast<std::ptrdiff_t>(n), [](uint8_t b) { return b != 0; }))
      return false;
    from += n;
  }
  return true;
}

}  // namespace

void UnifiedDb::scan_log() {
  struct stat st{};
  if (::fstat(fd_, &st) != 0) fail_errno("fstat");
  const auto file_size = static_cast<uint64_t>(st.st_size);

  uint64_t offset = 0;
  uint64_t last_id = 0;
  std::vector<uint8_t> buf;
  std::string problem;
  // Whether the first bad record runs to the end of the file (a torn write).
  bool torn_tail = true;
  while (offset < file_size) {
    torn_tail = true;
    if (file_size - offset < 4) {
      problem = "partial length prefix";
      break;
    }
    uint8_t len_raw[4];
    pread_all(fd_, len_raw, 4, offset);
    uint32_t rec_len;
    std::memcpy(&rec_len, len_raw, 4);
    if (rec_len < kRecordOverhead || rec_len > kMaxRecordBytes) {
      // zero fill after a crash that extended the file is still a torn tail
      problem = "implausible record length";
      torn_tail = all_zero(fd_, offset, file_size);
      break;
    }
    if (file_size - offset - 4 < rec_len) {
      problem = "record extends past end of log";
      break;
    }
    buf.resize(4 + static_cast<std::size_t>(rec_len));
    pread_all(fd_, buf.data(), buf.size(), offset);
    uint32_t stored_crc;
    std::memcpy(&stored_crc, buf.data() + buf.size() - 4, 4);
    torn_tail = offset + buf.size() >= file_size;
    if (codec::crc32({buf.data(), buf.size() - 4}) != stored_crc) {
      problem = "record checksum mismatch";
      break;
    }
    ByteReader r({buf.data() + 4, buf.size() - 8}, "record");
    Entry e;
    e.offset = offset;
    e.length = static_cast<uint32_t>(buf.size());
    const auto id = r.get<uint64_t>();
    e.width = r.get<uint16_t>();
    e.height = r.get<uint16_t>();
    const auto tag = r.get<uint8_t>();
    e.embed_len = r.get<uint32_t>();
    bool ok = tag <= static_cast<uint8_t>(EmbedCodec::kFastLz) && r.remaining() >= e.embed_len;
    if (ok) {
      r.bytes(e.embed_len);
      ok = r.remaining() >= 4;
    }
    if (ok) {
      e.bs_len = r.get<uint32_t>();
      ok = r.remaining() == e.bs_len;
    }
    if (!ok || id != last_id + 1) {
      problem = ok ? "record id out of sequence" : "record fields inconsistent";
      break;
    }
    entries_.emplace(id, e);
    last_id = id;
    offset += e.length;
  }

  report_.records = entries_.size();
  report_.valid_bytes = offset;
  report_.discarded_bytes = file_size - offset;
  end_offset_ = offset;
  if (report_.discarded_bytes == 0) return;
  if (!torn_tail) {
    // A crash can only tear the final record. Damage with intact records
    // after it is left on disk for inspection and blocks further appends.
    damaged_ = true;
    report_.mid_log_damage = true;
    warn("database " + dir_.string() + ": " + problem + " at byte " + std::to_string(offset) +
         " inside the log; serving the " + std::to_string(entries_.size()) +
         " records before it, appends disabled");
    return;
  }
  warn("database " + dir_.string() + ": " + problem + " at byte " + std::to_string(offset) + "; skipping " +
       std::to_string(report_.discarded_bytes) + " trailing bytes");
  if (!options_.read_only) {
    if (::ftruncate(fd_, static_cast<off_t>(offset)) != 0) fail_errno("ftruncate torn tail");
    if (::fsync(fd_) != 0) fail_errno("fsync");
  }
}

uint64_t UnifiedDb::put(std::span<const uint8_t> bitstream, std::span<const float> embedding,
                        std::optional<EmbedCodec> codec) {
  require(!options_.read_only, ErrorCode::kInvalidArgument, "database opened read-only");
  require(!damaged_, ErrorCode::kCorruptStream, "database log is damaged mid-file; appends disabled");
  require(embedding.size() == static_cast<std::size_t>(dim_), ErrorCode::kShapeMismatch,
          "embedding dim " + std::to_string(embedding.size()) + " does not match database dim " + std::to_string(dim_));
  const codec::BitstreamHeader header = codec::peek_header(bitstream);
  const EmbedCodec tag = codec.value_or(default_codec_);

  std::unique_lock lock(mu_);
  const std::vector<uint8_t> embed_bytes = compress_embedding(embedding, tag, tables_);
  const uint64_t id = entries_.empty() ? 1 : entries_.rbegin()->first + 1;
  const uint64_t rec_len = kRecordOverhead + embed_bytes.size() + bitstream.size();
  require(rec_len <= kMaxRecordBytes, ErrorCode::kOutOfRange, "record too large");

  std::vector<uint8_t> rec;
  rec.reserve(4 + rec_len);
  ByteWriter w(rec);
  w.put<uint32_t>(static_cast<uint32_t>(rec_len));
  w.put<uint64_t>(id);
  w.put<uint16_t>(header.orig_width);
  w.put<uint16_t>(header.orig_height);
  w.put<uint8_t>(static_cast<uint8_t>(tag));
  w.put<uint32_t>(static_cast<uint32_t>(embed_bytes.size()));
  w.bytes(embed_bytes);
  w.put<uint32_t>(static_cast<uint32_t>(bitstream.size()));
  w.bytes(bitstream);
  w.put<uint32_t>(codec::crc32(rec));

  try {
    if (::lseek(fd_, static_cast<off_t>(end_offset_), SEEK_SET) < 0) fail_errno("lseek");
    write_all(fd_, rec.data(), rec.size());
    if (::fdatasync(fd_) != 0) fail_errno("fdatasync");
  } catch (...) {
    // Drop whatever part of the record reached the file; readers never saw it.
    if (::ftruncate(fd_, static_cast<off_t>(end_offset_)) != 0) warn("could not roll back partial record");
    throw;
  }

  Entry e;
  e.offset = end_offset_;
  e.length = static_cast<uint32_t>(rec.size());
  e.width = header.orig_width;
  e.height = header.orig_height;
  e.embed_len = static_cast<uint32_t>(embed_bytes.size());
  e.bs_len = static_cast<uint32_t>(bitstream.size());
  entries_.emplace(id, e);
  end_offset_ += rec.size();
  maybe_rebuild_table();
  return id;
}

void UnifiedDb::maybe_rebuild_table() {
  if (entries_.size() % rebuild_interval_ != 0) return;
  std::vector<int16_t> values;
  values.reserve(static_cast<std::size_t>(rebuild_interval_) * dim_);
  auto it = entries_.end();
  for (uint32_t i = 0; i < rebuild_interval_; ++i) --it;
  for (; it != entries_.end(); ++it) {
    const auto raw = read_record(it->second);
    const auto tag = static_cast<EmbedCodec>(raw[kTagAt]);
    const auto embed = std::span<const uint8_t>(raw).subspan(kEmbedAt, it->second.embed_len);
    const auto fixed = decompress_fixed(embed, tag, static_cast<std::size_t>(dim_), tables_);
    values.insert(values.end(), fixed.begin(), fixed.end());
  }
  const auto next = static_cast<uint16_t>(tables_.current().generation + 1);
  tables_.add(ClassTable::fitted(next, values));
  write_manifest();
}

std::vector<uint8_t> UnifiedDb::read_record(const Entry& e) const {
  std::vector<uint8_t> buf(e.length);
  pread_all(fd_, buf.data(), buf.size(), e.offset);
  uint32_t stored_crc;
  std::memcpy(&stored_crc, buf.data() + buf.size() - 4, 4);
  if (codec::crc32({buf.data(), buf.size() - 4}) != stored_crc) {
    fail(ErrorCode::kChecksumMismatch, "record at byte " + std::to_string(e.offset) + " failed its checksum");
  }
  return buf;
}

ImageRecord UnifiedDb::get(uint64_t id) const {
  std::shared_lock lock(mu_);
  const auto it = entries_.find(id);
  require(it != entries_.end(), ErrorCode::kNotFound, "no record with id " + std::to_string(id));
  const Entry& e = it->second;
  const auto raw = read_record(e);
  const std::span<const uint8_t> bytes(raw);

  ImageRecord rec;
  rec.id = id;
  rec.width = e.width;
  rec.height = e.height;
  rec.codec = codec_from_tag(raw[kTagAt]);
  const auto embed = bytes.subspan(kEmbedAt, e.embed_len);
  rec.embedding = decompress_embedding(embed, rec.codec, static_cast<std::size_t>(dim_), tables_);
  rec.embedding_bytes = e.embed_len;
  const auto bs = bytes.subspan(kEmbedAt + e.embed_len + 4, e.bs_len);
  rec.bitstream.assign(bs.begin(), bs.end());
  return rec;
}

bool UnifiedDb::contains(uint64_t id) const {
  std::shared_lock lock(mu_);
  return entries_.contains(id);
}

std::vector<uint64_t> UnifiedDb::ids() const {
  std::shared_lock lock(mu_);
  std::vector<uint64_t> out;
  out.reserve(entries_.size());
  for (const auto& [id, e] : entries_) out.push_back(id);
  return out;
}

std::size_t UnifiedDb::size() const {
  std::shared_lock lock(mu_);
  return entries_.size();
}

DbStats UnifiedDb::stats() const {
  std::shared_lock lock(mu_);
  DbStats s;
  s.record_count = entries_.size();
  double bpp_sum = 0.0;
  for (const auto& [id, e] : entries_) {
    s.total_bitstream_bytes += e.bs_len;
    s.total_embedding_bytes += e.embed_len;
    bpp_sum += 8.0 * e.bs_len / (static_cast<double>(e.width) * e.height);
  }
  if (s.record_count > 0) s.mean_bpp = bpp_sum / static_cast<double>(s.record_count);
  return s;
}

ClassTableSet UnifiedDb::tables() const {
  std::shared_lock lock(mu_);
  return tables_;
}

}  // namespace latentsearch::store
