#pragma once

// Exact top-k cosine search over the embedding library.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

namespace latentsearch::store {
class UnifiedDb;
}

namespace latentsearch::retrieval {

struct Hit {
  uint64_t id = 0;
  double distance = 0.0;

  friend bool operator==(const Hit&, const Hit&) = default;
};

struct QueryParams {
  std::size_t k = 3;
  std::optional<double> thr;  // keep hits with distance <= thr

  void validate() const;
};

struct SearchResult {
  std::vector<Hit> hits;
  double query_us = 0.0;
};

/// N x D matrix of unit rows plus the record id of each row.
class EmbeddingIndex {
 public:
  explicit EmbeddingIndex(std::size_t dim);

  /// Normalizes and appends; ids must be distinct.
  void add(uint64_t id, std::span<const float> embedding);

  std::size_t size() const { return ids_.size(); }
  std::size_t dim() const { return dim_; }
  const std::vector<uint64_t>& ids() const { return ids_; }
  std::span<const float> row(std::size_t i) const { return {matrix_.data() + i * dim_, dim_}; }

  /// Ascending cosine distance, ties broken by smaller id, then cut at k and thr.
  SearchResult search(std::span<const float> query, const QueryParams& params) const;

 private:
  std::size_t dim_;
  std::vector<float> matrix_;
  std::vector<double> norms_;
  std::vector<uint64_t> ids_;
  std::unordered_set<uint64_t> id_set_;
};

struct BuildSummary {
  std::size_t indexed = 0;
  std::vector<uint64_t> skipped;
};

/// One row per readable record, in id order. Records whose embedding fails to
/// decode or is not unit-norm within 1e-4 are skipped with a warning.
EmbeddingIndex build_index(const store::UnifiedDb& db, BuildSummary* summary = nullptr);

/// Fraction of queries whose oracle id appears in their top-k.
double recall_at_k(const EmbeddingIndex& index, std::span<const std::vector<float>> queries,
                   std::span<const uint64_t> oracle_ids, std::size_t k);

/// "hits/total", e.g. "7/24".
std::string hit_total(std::size_t hits, std::size_t total);

}  // namespace latentsearch::retrieval
