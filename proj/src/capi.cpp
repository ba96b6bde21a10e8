#include <latentsearch/latentsearch.h>

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "engine.hpp"
#include "error.hpp"
#include "eval.hpp"
#include "log.hpp"
#include "weights.hpp"

using namespace latentsearch;

struct ls_engine {
  explicit ls_engine(const service::EngineConfig& c) : engine(c) {}
  service::Engine engine;
};

struct ls_model {
  explicit ls_model(service::Model m) : model(std::move(m)) {}
  service::Model model;
};

namespace {

thread_local std::string t_last_error;

template <typename F>
ls_status guarded(F&& f) {
  try {
    f();
    t_last_error.clear();
    return LS_OK;
  } catch (const Error& e) {
    t_last_error = e.what();
    return static_cast<ls_status>(e.code());
  } catch (const std::bad_alloc&) {
    t_last_error = "out of memory";
    return LS_INTERNAL;
  } catch (const std::filesystem::filesystem_error& e) {
    t_last_error = e.what();
    return LS_IO;
  } catch (const std::exception& e) {
    t_last_error = e.what();
    return LS_INTERNAL;
  }
}

void need(bool cond, const char* what) { require(cond, ErrorCode::kInvalidArgument, what); }

template <typename T>
T* copy_out(const T* src, std::size_t n) {
  if (n == 0) return nullptr;
  T* dst = static_cast<T*>(std::malloc(n * sizeof(T)));
  if (!dst) throw std::bad_alloc();
  std::memcpy(dst, src, n * sizeof(T));
  return dst;
}

void fill_buffer(ls_buffer* out, const std::vector<uint8_t>& bytes) {
  out->data = copy_out(bytes.data(), bytes.size());
  out->len = bytes.size();
}

void fill_buffer(ls_buffer* out, const std::string& text) {
  // NUL-terminated for convenience; len excludes it.
  out->data = copy_out(reinterpret_cast<const uint8_t*>(text.c_str()), text.size() + 1);
  out->len = text.size();
}

std::optional<store::EmbedCodec> to_codec(ls_embed_codec c) {
  if (c == LS_EMBED_DEFAULT) return std::nullopt;
  return store::codec_from_tag(static_cast<uint8_t>(c));
}

std::span<const uint8_t> bytes_arg(const uint8_t* data, size_t len) {
  need(data != nullptr || len == 0, "null data pointer");
  return {data, len};
}

}  // namespace

extern "C" {

const char* ls_version(void) { return "0.1.0"; }

const char* ls_status_name(ls_status status) {
  switch (status) {
    case LS_OK: return "ok";
    case LS_INVALID_ARGUMENT: return "invalid argument";
    case LS_SHAPE_MISMATCH: return "shape mismatch";
    case LS_OUT_OF_RANGE: return "out of range";
    case LS_NOT_FOUND: return "not found";
    case LS_IO: return "io error";
    case LS_BAD_MAGIC: return "bad magic";
    case LS_UNSUPPORTED_VERSION: return "unsupported version";
    case LS_CHECKSUM_MISMATCH: return "checksum mismatch";
    case LS_TRUNCATED: return "truncated";
    case LS_CORRUPT_STREAM: return "corrupt stream";
    case LS_IMAGE_DECODE: return "image decode error";
    case LS_MODEL_MISMATCH: return "model mismatch";
    case LS_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* ls_last_error(void) { return t_last_error.c_str(); }

void ls_set_warning_handler(ls_warning_fn fn, void* user) {
  if (!fn) {
    set_warning_sink({});
    return;
  }
  set_warning_sink([fn, user](const std::string& msg) { fn(msg.c_str(), user); });
}

ls_embed_codec ls_embed_codec_from_name(const char* name) {
  if (!name) return LS_EMBED_DEFAULT;
  try {
    return static_cast<ls_embed_codec>(store::parse_codec_name(name));
  } catch (const Error&) {
    return LS_EMBED_DEFAULT;
  }
}

const char* ls_embed_codec_name(ls_embed_codec codec) {
  if (codec == LS_EMBED_DEFAULT) return "default";
  try {
    return store::codec_name(store::codec_from_tag(static_cast<uint8_t>(codec)));
  } catch (const Error&) {
    return "unknown";
  }
}

ls_status ls_weights_generate(const char* path, uint64_t seed, ls_weights_preset preset) {
  return guarded([&] {
    need(path != nullptr, "null path");
    const weights::ModelConfig config;
    weights::ModelWeights w;
    switch (preset) {
      case LS_WEIGHTS_RANDOM: w = weights::generate_random(config, seed); break;
      case LS_WEIGHTS_BLOCK_MEAN: w = weights::generate_block_mean(config, seed); break;
      default: fail(ErrorCode::kInvalidArgument, "unknown weights preset");
    }
    weights::to_archive(w).save(path);
  });
}

ls_status ls_engine_open(const char* db_path, const char* weights_path, ls_embed_codec codec, ls_engine** out) {
  return guarded([&] {
    need(db_path && weights_path && out, "null argument");
    *out = nullptr;
    service::EngineConfig c;
    c.db_path = db_path;
    c.weights_path = weights_path;
    c.embed_codec = to_codec(codec);
    *out = new ls_engine(c);
  });
}

void ls_engine_close(ls_engine* engine) { delete engine; }

ls_status ls_ingest(ls_engine* engine, const uint8_t* image, size_t len, ls_embed_codec codec,
                    ls_ingest_result* out) {
  return guarded([&] {
    need(engine && out, "null argument");
    const auto r = engine->engine.ingest(bytes_arg(image, len), to_codec(codec));
    *out = {r.id, r.bpp, r.psnr};
  });
}

ls_status ls_query(ls_engine* engine, const uint8_t* image, size_t len, const ls_query_params* params,
                   ls_query_result* out) {
  return guarded([&] {
    need(engine && params && out, "null argument");
    std::memset(out, 0, sizeof *out);
    retrieval::QueryParams p;
    p.k = params->k;
    if (params->has_thr) p.thr = params->thr;
    const auto r = engine->engine.query(bytes_arg(image, len), p);
    std::vector<ls_hit> hits;
    for (const auto& h : r.search.hits) hits.push_back({h.id, h.distance});
    ls_query_result res{};
    try {
      res.hits = copy_out(hits.data(), hits.size());
      res.hit_count = hits.size();
      res.bpp = r.bpp;
      res.query_us = r.search.query_us;
      res.bitstream = copy_out(r.bitstream.data(), r.bitstream.size());
      res.bitstream_len = r.bitstream.size();
      res.embedding = copy_out(r.embedding.values().data(), r.embedding.dim());
      res.embedding_dim = r.embedding.dim();
    } catch (...) {
      ls_query_result_free(&res);
      throw;
    }
    *out = res;
  });
}

void ls_query_result_free(ls_query_result* result) {
  if (!result) return;
  std::free(result->hits);
  std::free(result->bitstream);
  std::free(result->embedding);
  std::memset(result, 0, sizeof *result);
}

ls_status ls_fetch(ls_engine* engine, uint64_t id, int decode, ls_buffer* out) {
  return guarded([&] {
    need(engine && out, "null argument");
    *out = {nullptr, 0};
    fill_buffer(out, engine->engine.fetch(id, decode != 0));
  });
}

ls_status ls_engine_stats(ls_engine* engine, ls_stats* out) {
  return guarded([&] {
    need(engine && out, "null argument");
    const auto s = engine->engine.stats();
    *out = {s.record_count, s.total_bitstream_bytes, s.total_embedding_bytes, s.mean_bpp};
  });
}

ls_status ls_db_stats(const char* db_path, ls_stats* out) {
  return guarded([&] {
    need(db_path && out, "null argument");
    store::StoreOptions opts;
    opts.read_only = true;
    const auto s = store::UnifiedDb(db_path, opts).stats();
    *out = {s.record_count, s.total_bitstream_bytes, s.total_embedding_bytes, s.mean_bpp};
  });
}

ls_status ls_eval(ls_engine* engine, const char* query_dir, const char* teacher_path, const size_t* ks, size_t nk,
                  ls_buffer* report) {
  return guarded([&] {
    need(engine && query_dir && report, "null argument");
    need(ks != nullptr || nk == 0, "null ks");
    *report = {nullptr, 0};
    service::EvalOptions opts;
    opts.query_dir = query_dir;
    if (teacher_path) opts.teacher_path = teacher_path;
    if (nk > 0) opts.ks.assign(ks, ks + nk);
    fill_buffer(report, service::eval_run(engine->engine, opts).text());
  });
}

ls_status ls_model_open(const char* weights_path, ls_model** out) {
  return guarded([&] {
    need(weights_path && out, "null argument");
    *out = nullptr;
    *out = new ls_model(service::Model::load(weights_path));
  });
}

void ls_model_close(ls_model* model) { delete model; }

ls_status ls_compress(ls_model* model, const uint8_t* image, size_t len, ls_buffer* bitstream,
                      ls_compress_stats* stats) {
  return guarded([&] {
    need(model && bitstream, "null argument");
    *bitstream = {nullptr, 0};
    const auto img = image_io::decode_image(bytes_arg(image, len));
    const auto r = model->model.compress(img);
    fill_buffer(bitstream, codec::serialize(r.bitstream));
    if (stats) {
      *stats = {r.stats.bpp, r.stats.psnr, static_cast<uint32_t>(img.width), static_cast<uint32_t>(img.height)};
    }
  });
}

ls_status ls_decompress(ls_model* model, const uint8_t* bitstream, size_t len, ls_image_format format,
                        ls_buffer* image) {
  return guarded([&] {
    need(model && image, "null argument");
    *image = {nullptr, 0};
    const auto img = model->model.decompress(bytes_arg(bitstream, len));
    switch (format) {
      case LS_IMAGE_PNG: fill_buffer(image, image_io::encode_png(img)); break;
      case LS_IMAGE_PPM: fill_buffer(image, image_io::encode_ppm(img)); break;
      default: fail(ErrorCode::kInvalidArgument, "unknown image format");
    }
  });
}

ls_status ls_codec_bench(const float* embeddings, size_t count, size_t dim, ls_bench_row rows[3],
                         ls_buffer* report) {
  return guarded([&] {
    need(embeddings && rows, "null argument");
    need(count > 0 && dim > 0, "empty embedding set");
    if (report) *report = {nullptr, 0};
    std::vector<std::vector<float>> set(count);
    for (size_t i = 0; i < count; ++i) set[i].assign(embeddings + i * dim, embeddings + (i + 1) * dim);
    const auto r = service::codec_bench(set);
    for (size_t i = 0; i < 3; ++i) {
      const auto& row = r.rows[i];
      rows[i] = {static_cast<ls_embed_codec>(row.codec), row.total_bytes, row.encode_us, row.decode_us,
                 row.fixed_point_exact ? 1 : 0};
    }
    if (report) fill_buffer(report, r.text());
  });
}

ls_status ls_db_embeddings(const char* db_path, float** out, size_t* count, size_t* dim) {
  return guarded([&] {
    need(db_path && out && count && dim, "null argument");
    *out = nullptr;
    store::StoreOptions opts;
    opts.read_only = true;
    const store::UnifiedDb db(db_path, opts);
    std::vector<float> flat;
    for (uint64_t id : db.ids()) {
      const auto rec = db.get(id);
      flat.insert(flat.end(), rec.embedding.begin(), rec.embedding.end());
    }
    *count = db.size();
    *dim = static_cast<size_t>(db.dim());
    *out = copy_out(flat.data(), flat.size());
  });
}

ls_status ls_random_embeddings(size_t count, size_t dim, uint64_t seed, float** out) {
  return guarded([&] {
    need(out != nullptr, "null argument");
    need(count > 0 && dim > 0, "empty embedding set");
    *out = nullptr;
    std::vector<float> flat;
    for (const auto& v : service::random_unit_embeddings(count, dim, seed)) flat.insert(flat.end(), v.begin(), v.end());
    *out = copy_out(flat.data(), flat.size());
  });
}

void ls_floats_free(float* data) { std::free(data); }

void ls_buffer_free(ls_buffer* buffer) {
  if (!buffer) return;
  std::free(buffer->data);
  buffer->data = nullptr;
  buffer->len = 0;
}

}  // extern "C"
