#pragma once

// Evaluation harness (bpp / psnr / hit-rate report over a directory of query
// images) and the embedding-codec comparison.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "embedding_codec.hpp"

namespace latentsearch::service {

class Engine;

struct EvalOptions {
  std::filesystem::path query_dir;
  /// LICE file with one entry per query (keyed by file name) and one per
  /// gallery record (keyed "id:<n>"). Without it only bpp/psnr are reported.
  std::optional<std::filesystem::path> teacher_path;
  std::vector<std::size_t> ks = {1, 5};
};

struct KHits {
  std::size_t k = 0;
  std::size_t hits = 0;
};

struct EvalReport {
  std::size_t queries = 0;
  double mean_bpp = 0.0;
  double mean_psnr = 0.0;
  bool has_oracle = false;
  std::vector<KHits> per_k;  // always holds k = 1 and k = 5, plus requested ks

  /// nullopt when k was not evaluated.
  std::optional<std::size_t> hits_at(std::size_t k) const;
  std::string text() const;
};

/// Image files (.png / .ppm) in dir, sorted by name.
std::vector<std::filesystem::path> list_query_images(const std::filesystem::path& dir);

EvalReport eval_run(const Engine& engine, const EvalOptions& options);

struct CodecBenchRow {
  store::EmbedCodec codec = store::EmbedCodec::kRaw;
  uint64_t total_bytes = 0;
  double encode_us = 0.0;
  double decode_us = 0.0;
  bool fixed_point_exact = false;
};

struct CodecBenchReport {
  std::size_t count = 0;
  std::size_t dim = 0;
  std::vector<CodecBenchRow> rows;  // raw, entropy, fastlz

  std::string text() const;
};

/// Compresses every embedding under each strategy. The entropy strategy uses a
/// class table fitted on the set itself, as a database would after a rebuild.
CodecBenchReport codec_bench(std::span<const std::vector<float>> embeddings);

/// n seeded random unit vectors of dimension dim.
std::vector<std::vector<float>> random_unit_embeddings(std::size_t n, std::size_t dim, uint64_t seed);

}  // namespace latentsearch::service
