/* latentsearch C API.
 *
 * Every call returns an ls_status; on failure ls_last_error() holds a message
 * for the calling thread. Buffers and results handed out by the library are
 * released with the matching *_free function.
 */
#ifndef LATENTSEARCH_H
#define LATENTSEARCH_H

#include <stddef.h>
#include <stdint.h>

#if defined(LATENTSEARCH_BUILDING)
#define LS_API __attribute__((visibility("default")))
#else
#define LS_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ls_status {
  LS_OK = 0,
  LS_INVALID_ARGUMENT = 1,
  LS_SHAPE_MISMATCH = 2,
  LS_OUT_OF_RANGE = 3,
  LS_NOT_FOUND = 4,
  LS_IO = 5,
  LS_BAD_MAGIC = 6,
  LS_UNSUPPORTED_VERSION = 7,
  LS_CHECKSUM_MISMATCH = 8,
  LS_TRUNCATED = 9,
  LS_CORRUPT_STREAM = 10,
  LS_IMAGE_DECODE = 11,
  LS_MODEL_MISMATCH = 12,
  LS_INTERNAL = 13
} ls_status;

/* Embedding storage strategies. LS_EMBED_DEFAULT defers to the database. */
typedef enum ls_embed_codec {
  LS_EMBED_DEFAULT = -1,
  LS_EMBED_RAW = 0,
  LS_EMBED_ENTROPY = 1,
  LS_EMBED_FASTLZ = 2
} ls_embed_codec;

typedef enum ls_weights_preset {
  LS_WEIGHTS_RANDOM = 0,     /* seeded random initialization */
  LS_WEIGHTS_BLOCK_MEAN = 1  /* hand-set block-average autoencoder, random adapter */
} ls_weights_preset;

typedef enum ls_image_format { LS_IMAGE_PNG = 0, LS_IMAGE_PPM = 1 } ls_image_format;

typedef struct ls_engine ls_engine;
typedef struct ls_model ls_model;

typedef struct ls_buffer {
  uint8_t* data;
  size_t len;
} ls_buffer;

typedef struct ls_ingest_result {
  uint64_t id;
  double bpp;
  double psnr;
} ls_ingest_result;

typedef struct ls_query_params {
  size_t k;      /* >= 1 */
  int has_thr;   /* nonzero: drop hits with distance > thr */
  double thr;    /* in [0, 2] */
} ls_query_params;

typedef struct ls_hit {
  uint64_t id;
  double distance;
} ls_hit;

typedef struct ls_query_result {
  ls_hit* hits;
  size_t hit_count;
  double bpp;
  double query_us;
  uint8_t* bitstream; /* the query's own LICB stream */
  size_t bitstream_len;
  float* embedding;
  size_t embedding_dim;
} ls_query_result;

typedef struct ls_stats {
  uint64_t record_count;
  uint64_t total_bitstream_bytes;
  uint64_t total_embedding_bytes;
  double mean_bpp;
} ls_stats;

typedef struct ls_compress_stats {
  double bpp;
  double psnr;
  uint32_t width;
  uint32_t height;
} ls_compress_stats;

typedef struct ls_bench_row {
  ls_embed_codec codec;
  uint64_t total_bytes;
  double encode_us;
  double decode_us;
  int fixed_point_exact;
} ls_bench_row;

typedef void (*ls_warning_fn)(const char* message, void* user);

LS_API const char* ls_version(void);
LS_API const char* ls_status_name(ls_status status);
/* Message for the last failed call on this thread; "" if none. */
LS_API const char* ls_last_error(void);
/* NULL restores the default (stderr). */
LS_API void ls_set_warning_handler(ls_warning_fn fn, void* user);

LS_API ls_embed_codec ls_embed_codec_from_name(const char* name); /* LS_EMBED_DEFAULT if unknown */
LS_API const char* ls_embed_codec_name(ls_embed_codec codec);

/* Writes a LICW weight archive with default model dimensions. */
LS_API ls_status ls_weights_generate(const char* path, uint64_t seed, ls_weights_preset preset);

/* Engine: database + model + in-memory index. Creates the database if absent. */
LS_API ls_status ls_engine_open(const char* db_path, const char* weights_path, ls_embed_codec codec,
                                ls_engine** out);
LS_API void ls_engine_close(ls_engine* engine);

LS_API ls_status ls_ingest(ls_engine* engine, const uint8_t* image, size_t len, ls_embed_codec codec,
                           ls_ingest_result* out);
LS_API ls_status ls_query(ls_engine* engine, const uint8_t* image, size_t len, const ls_query_params* params,
                          ls_query_result* out);
LS_API void ls_query_result_free(ls_query_result* result);
/* decode != 0: PNG of the reconstruction; otherwise the stored LICB bytes. */
LS_API ls_status ls_fetch(ls_engine* engine, uint64_t id, int decode, ls_buffer* out);
LS_API ls_status ls_engine_stats(ls_engine* engine, ls_stats* out);
/* Stats of a database opened read-only; needs no weights. */
LS_API ls_status ls_db_stats(const char* db_path, ls_stats* out);
/* Text report; teacher_path may be NULL. ks may be NULL when nk is 0. */
LS_API ls_status ls_eval(ls_engine* engine, const char* query_dir, const char* teacher_path, const size_t* ks,
                         size_t nk, ls_buffer* report);

/* Stand-alone codec. */
LS_API ls_status ls_model_open(const char* weights_path, ls_model** out);
LS_API void ls_model_close(ls_model* model);
LS_API ls_status ls_compress(ls_model* model, const uint8_t* image, size_t len, ls_buffer* bitstream,
                             ls_compress_stats* stats);
LS_API ls_status ls_decompress(ls_model* model, const uint8_t* bitstream, size_t len, ls_image_format format,
                               ls_buffer* image);

/* Embedding-codec comparison over count row-major vectors of length dim.
 * rows receives raw, entropy, fastlz in that order; report may be NULL. */
LS_API ls_status ls_codec_bench(const float* embeddings, size_t count, size_t dim, ls_bench_row rows[3],
                                ls_buffer* report);
/* Decoded embeddings of every record in a database, row-major. Free with ls_floats_free. */
LS_API ls_status ls_db_embeddings(const char* db_path, float** out, size_t* count, size_t* dim);
LS_API ls_status ls_random_embeddings(size_t count, size_t dim, uint64_t seed, float** out);
LS_API void ls_floats_free(float* data);

LS_API void ls_buffer_free(ls_buffer* buffer);

#ifdef __cplusplus
}
#endif

#endif /* LATENTSEARCH_H */
