#pragma once

// HTTP front end over the C API.
//
//   POST /images               body: PNG or PPM bytes -> {id, bpp, psnr}
//   POST /search?k=&thr=       body: PNG or PPM bytes -> {hits: [{id, distance}], bpp, query_us}
//   GET  /images/{id}?decode=  true (default): PNG of the reconstruction; false: LICB bytes
//   GET  /stats                -> {record_count, total_bitstream_bytes, total_embedding_bytes, mean_bpp}
//
// Errors come back as {"error": <status name>, "message": ...} with 400 for bad
// input, 404 for unknown ids and 500 for storage or internal failures. Bodies
// are capped at 64 MiB.

#include <latentsearch/latentsearch.h>

#include <optional>
#include <string>

#include "httplib.h"

namespace lstool {

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  size_t default_k = 3;
  std::optional<double> default_thr;
  ls_embed_codec embed_codec = LS_EMBED_DEFAULT;
};

int http_status(ls_status s);

/// Registers the routes; the engine must outlive the server.
void install_routes(httplib::Server& server, ls_engine* engine, const ServerOptions& options);

}  // namespace lstool
