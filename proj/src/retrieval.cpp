#include "retrieval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "error.hpp"
#include "log.hpp"
#include "numerics.hpp"
#include "store.hpp"

namespace latentsearch::retrieval {

void QueryParams::validate() const {
  require(k >= 1, ErrorCode::kInvalidArgument, "k must be >= 1");
  if (thr) {
    require(*thr >= 0.0 && *thr <= 2.0, ErrorCode::kInvalidArgument, "thr must lie in [0, 2]");
  }
}

EmbeddingIndex::EmbeddingIndex(std::size_t dim) : dim_(dim) {
  require(dim >= 1, ErrorCode::kInvalidArgument, "index dim must be positive");
}

void EmbeddingIndex::add(uint64_t id, std::span<const float> embedding) {
  require(embedding.size() == dim_, ErrorCode::kShapeMismatch,
          "embedding dim " + std::to_string(embedding.size()) + " does not match index dim " + std::to_string(dim_));
  require(!id_set_.contains(id), ErrorCode::kInvalidArgument, "id " + std::to_string(id) + " already indexed");
  for (float v : embedding) require(std::isfinite(v), ErrorCode::kInvalidArgument, "embedding contains NaN/Inf");
  const std::vector<float> unit = numerics::l2_normalize(embedding);
  matrix_.insert(matrix_.end(), unit.begin(), unit.end());
  norms_.push_back(numerics::l2_norm(unit));
  ids_.push_back(id);
  id_set_.insert(id);
}

SearchResult EmbeddingIndex::search(std::span<const float> query, const QueryParams& params) const {
  params.validate();
  require(query.size() == dim_, ErrorCode::kShapeMismatch,
          "query dim " + std::to_string(query.size()) + " does not match index dim " + std::to_string(dim_));
  const auto start = std::chrono::steady_clock::now();
  const double qn = numerics::l2_norm(query);
  require(qn > 0.0, ErrorCode::kInvalidArgument, "query has zero norm");

  std::vector<Hit> all(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    const double d = 1.0 - numerics::dot(query, row(i)) / (qn * norms_[i]);
    all[i] = {ids_[i], std::clamp(d, 0.0, 2.0)};
  }
  const auto closer = [](const Hit& a, const Hit& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.id < b.id);
  };
  const std::size_t keep = std::min(params.k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(), closer);
  all.resize(keep);
  if (params.thr) {
    const double thr = *params.thr;
    std::erase_if(all, [thr](const Hit& h) { return h.distance > thr; });
  }

  SearchResult out;
  out.hits = std::move(all);
  out.query_us =
      std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - start).count();
  return out;
}

EmbeddingIndex build_index(const store::UnifiedDb& db, BuildSummary* summary) {
  EmbeddingIndex index(static_cast<std::size_t>(db.dim()));
  BuildSummary local;
  for (uint64_t id : db.ids()) {
    try {
      const store::ImageRecord rec = db.get(id);
      const double norm = numerics::l2_norm(rec.embedding);
      if (std::fabs(norm - 1.0) > 1e-4) {
        fail(ErrorCode::kCorruptStream, "embedding norm " + std::to_string(norm));
      }
      index.add(id, rec.embedding);
      ++local.indexed;
    } catch (const Error& e) {
      warn("index build: skipping record " + std::to_string(id) + ": " + e.what());
      local.skipped.push_back(id);
    }
  }
  if (summary) *summary = std::move(local);
  return index;
}

double recall_at_k(const EmbeddingIndex& index, std::span<const std::vector<float>> queries,
                   std::span<const uint64_t> oracle_ids, std::size_t k) {
  require(!queries.empty(), ErrorCode::kInvalidArgument, "recall_at_k needs at least one query");
  require(queries.size() == oracle_ids.size(), ErrorCode::kInvalidArgument,
          "recall_at_k: " + std::to_string(queries.size()) + " queries vs " + std::to_string(oracle_ids.size()) +
              " oracle ids");
  QueryParams params;
  params.k = k;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto result = index.search(queries[i], params);
    const bool hit = std::any_of(result.hits.begin(), result.hits.end(),
                                 [&](const Hit& h) { return h.id == oracle_ids[i]; });
    hits += hit ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(queries.size());
}

std::string hit_total(std::size_t hits, std::size_t total) {
  return std::to_string(hits) + "/" + std::to_string(total);
}

}  // namespace latentsearch::retrieval
