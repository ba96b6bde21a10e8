#pragma once

// Unified image database: one append-only log holding, per image, the LICB
// bitstream and the compressed search embedding.
//
// Directory layout:
//   manifest     "LICD" | version u16 | default codec u8 | dim u32 |
//                rebuild interval u32 | table count u16 |
//                { generation u16 | 32 x cum u32 }* | crc32 u32
//   records.log  sequence of records, little-endian:
//                rec_len u32 | id u64 | w u16 | h u16 | codec_tag u8 |
//                embed_len u32 | embed bytes | bs_len u32 | bs bytes | crc32 u32
// rec_len counts the bytes after itself; the CRC covers everything before it,
// rec_len included.

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "embedding_codec.hpp"
#include "fair_mutex.hpp"

namespace latentsearch::store {

inline constexpr uint16_t kManifestVersion = 1;
inline constexpr uint32_t kDefaultRebuildInterval = 10000;

struct StoreOptions {
  int dim = 512;  // checked against an existing manifest unless read_only
  EmbedCodec default_codec = EmbedCodec::kEntropy;
  uint32_t rebuild_interval = kDefaultRebuildInterval;
  bool read_only = false;
};

struct ImageRecord {
  uint64_t id = 0;
  uint16_t width = 0;
  uint16_t height = 0;
  EmbedCodec codec = EmbedCodec::kRaw;
  std::vector<uint8_t> bitstream;
  std::vector<float> embedding;
  std::size_t embedding_bytes = 0;
};

struct DbStats {
  uint64_t record_count = 0;
  uint64_t total_bitstream_bytes = 0;
  uint64_t total_embedding_bytes = 0;
  double mean_bpp = 0.0;
};

struct OpenReport {
  std::size_t records = 0;
  uint64_t valid_bytes = 0;
  uint64_t discarded_bytes = 0;
  bool mid_log_damage = false;  // bad record followed by more data; not truncated
};

class UnifiedDb {
 public:
  /// Opens or creates the database directory. A torn final record is
  /// reported, skipped, and (when writable) truncated away. Damage earlier in
  /// the log is reported and everything from it on is skipped, but the file is
  /// left untouched and put() is refused.
  UnifiedDb(const std::filesystem::path& dir, StoreOptions options);
  ~UnifiedDb();
  UnifiedDb(const UnifiedDb&) = delete;
  UnifiedDb& operator=(const UnifiedDb&) = delete;

  /// Appends and fsyncs a record; returns its id (previous max + 1).
  uint64_t put(std::span<const uint8_t> bitstream, std::span<const float> embedding,
               std::optional<EmbedCodec> codec = std::nullopt);
  /// Throws kNotFound for unknown ids.
  ImageRecord get(uint64_t id) const;
  bool contains(uint64_t id) const;
  std::vector<uint64_t> ids() const;
  std::size_t size() const;
  DbStats stats() const;

  int dim() const { return dim_; }
  EmbedCodec default_codec() const { return default_codec_; }
  const OpenReport& open_report() const { return report_; }
  const std::filesystem::path& directory() const { return dir_; }
  /// Copy of the table generations known to this database.
  ClassTableSet tables() const;

  static std::filesystem::path log_path(const std::filesystem::path& dir) { return dir / "records.log"; }
  static std::filesystem::path manifest_path(const std::filesystem::path& dir) { return dir / "manifest"; }

 private:
  struct Entry {
    uint64_t offset = 0;
    uint32_t length = 0;  // whole record, rec_len field included
    uint16_t width = 0;
    uint16_t height = 0;
    uint32_t embed_len = 0;
    uint32_t bs_len = 0;
  };

  void load_manifest();
  void write_manifest() const;
  void scan_log();
  std::vector<uint8_t> read_record(const Entry& e) const;
  void maybe_rebuild_table();

  std::filesystem::path dir_;
  StoreOptions options_;
  int dim_ = 0;
  EmbedCodec default_codec_ = EmbedCodec::kEntropy;
  uint32_t rebuild_interval_ = kDefaultRebuildInterval;
  ClassTableSet tables_;
  int fd_ = -1;
  uint64_t end_offset_ = 0;
  bool damaged_ = false;
  std::map<uint64_t, Entry> entries_;
  OpenReport report_;
  mutable FairSharedMutex mu_;
};

}  // namespace latentsearch::store
