#pragma once

// JSON shapes shared by the CLI and the HTTP server, so both print the same
// bytes for the same result.

#include <latentsearch/latentsearch.h>

#include "json.hpp"
#include <stdexcept>
#include <string>

namespace lstool {

using nlohmann::json;

inline json ingest_json(const ls_ingest_result& r) {
  return {{"id", r.id}, {"bpp", r.bpp}, {"psnr", r.psnr}};
}

inline json query_json(const ls_query_result& r) {
  json hits = json::array();
  for (size_t i = 0; i < r.hit_count; ++i) hits.push_back({{"id", r.hits[i].id}, {"distance", r.hits[i].distance}});
  return {{"hits", hits}, {"bpp", r.bpp}, {"query_us", r.query_us}};
}

inline json stats_json(const ls_stats& s) {
  return {{"record_count", s.record_count},
          {"total_bitstream_bytes", s.total_bitstream_bytes},
          {"total_embedding_bytes", s.total_embedding_bytes},
          {"mean_bpp", s.mean_bpp}};
}

/// Failure carrying the library status.
class StatusError : public std::runtime_error {
 public:
  StatusError(ls_status s, const std::string& what) : std::runtime_error(what), status_(s) {}
  ls_status status() const { return status_; }

 private:
  ls_status status_;
};

inline void check(ls_status s) {
  if (s != LS_OK) throw StatusError(s, std::string(ls_status_name(s)) + ": " + ls_last_error());
}

/// Owns an ls_buffer.
struct Buffer {
  ls_buffer b{nullptr, 0};
  Buffer() = default;
  Buffer(const Buffer&) = delete;
  Buffer& operator=(const Buffer&) = delete;
  ~Buffer() { ls_buffer_free(&b); }
  std::string str() const { return std::string(reinterpret_cast<const char*>(b.data), b.len); }
};

struct QueryResult {
  ls_query_result r{};
  QueryResult() = default;
  QueryResult(const QueryResult&) = delete;
  QueryResult& operator=(const QueryResult&) = delete;
  ~QueryResult() { ls_query_result_free(&r); }
};

}  // namespace lstool
