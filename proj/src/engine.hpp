#pragma once

// Service core: one analysis pass per image yields the bitstream and the
// search embedding; the engine ties that to the store and the index.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "adapter.hpp"
#include "codec.hpp"
#include "fair_mutex.hpp"
#include "image_io.hpp"
#include "retrieval.hpp"
#include "store.hpp"
#include "weights.hpp"

namespace latentsearch::service {

/// Smallest side accepted for ingest and query: the adapter needs a latent of
/// at least 4 x 4.
inline constexpr int kMinSearchSide = adapter::kMinLatentExtent * codec::kLatentStride;

struct Analysis {
  codec::EncodeResult encoded;
  std::vector<uint8_t> bitstream;  // serialized LICB
  adapter::Embedding embedding;
};

/// Codec + adapter loaded from one weight archive.
class Model {
 public:
  explicit Model(weights::ModelWeights w);
  static Model load(const std::filesystem::path& archive);

  const weights::ModelConfig& config() const { return config_; }
  const codec::ImageCodec& codec() const { return codec_; }
  const adapter::AdapterWeights& adapter() const { return adapter_; }

  /// Compress + embed. Rejects images smaller than kMinSearchSide.
  Analysis analyze(const image_io::RgbImage& image) const;
  Analysis analyze(std::span<const uint8_t> image_bytes) const;
  /// Codec only; any size up to the header limit.
  codec::EncodeResult compress(const image_io::RgbImage& image) const;
  image_io::RgbImage decompress(std::span<const uint8_t> licb) const;
  /// Embedding of the y_hat carried by a stored bitstream.
  adapter::Embedding embed_bitstream(std::span<const uint8_t> licb) const;

 private:
  weights::ModelConfig config_;
  codec::ImageCodec codec_;
  adapter::AdapterWeights adapter_;
};

struct EngineConfig {
  std::filesystem::path db_path;
  std::filesystem::path weights_path;
  /// Used when creating a database and as the per-ingest default.
  std::optional<store::EmbedCodec> embed_codec;
  uint32_t rebuild_interval = store::kDefaultRebuildInterval;
};

struct IngestResult {
  uint64_t id = 0;
  double bpp = 0.0;
  double psnr = 0.0;
};

struct QueryResult {
  retrieval::SearchResult search;
  double bpp = 0.0;
  std::vector<uint8_t> bitstream;
  adapter::Embedding embedding;
};

class Engine {
 public:
  explicit Engine(const EngineConfig& config);

  const Model& model() const { return *model_; }
  const store::UnifiedDb& db() const { return *db_; }
  const retrieval::BuildSummary& build_summary() const { return build_summary_; }
  std::size_t index_size() const;

  IngestResult ingest(std::span<const uint8_t> image_bytes,
                      std::optional<store::EmbedCodec> codec = std::nullopt);
  QueryResult query(std::span<const uint8_t> image_bytes, const retrieval::QueryParams& params) const;
  retrieval::SearchResult search(std::span<const float> embedding, const retrieval::QueryParams& params) const;
  /// decode=true: PNG of the reconstruction; false: the stored LICB bytes.
  std::vector<uint8_t> fetch(uint64_t id, bool decode) const;
  store::DbStats stats() const;

 private:
  std::unique_ptr<Model> model_;
  std::unique_ptr<store::UnifiedDb> db_;
  std::optional<store::EmbedCodec> ingest_codec_;
  retrieval::BuildSummary build_summary_;
  std::mutex ingest_mu_;
  mutable FairSharedMutex index_mu_;
  retrieval::EmbeddingIndex index_;
};

}  // namespace latentsearch::service
