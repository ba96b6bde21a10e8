// latentsearch command line. Talks to the library only through the C API.

#include <latentsearch/latentsearch.h>
#include <signal.h>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "http_server.hpp"
#include "render.hpp"

namespace {

using lstool::Buffer;
using lstool::check;
using lstool::StatusError;

std::vector<uint8_t> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StatusError(LS_IO, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spill(const std::string& path, const uint8_t* data, size_t len) {
  if (path == "-") {
    std::fwrite(data, 1, len, stdout);
    std::fflush(stdout);
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(len));
  if (!out) throw StatusError(LS_IO, "cannot write " + path);
}

ls_embed_codec codec_arg(const std::string& name) {
  if (name.empty()) return LS_EMBED_DEFAULT;
  return ls_embed_codec_from_name(name.c_str());
}

struct EngineHandle {
  ls_engine* e = nullptr;
  EngineHandle(const std::string& db, const std::string& weights, ls_embed_codec codec) {
    check(ls_engine_open(db.c_str(), weights.c_str(), codec, &e));
  }
  ~EngineHandle() { ls_engine_close(e); }
};

struct ModelHandle {
  ls_model* m = nullptr;
  explicit ModelHandle(const std::string& weights) { check(ls_model_open(weights.c_str(), &m)); }
  ~ModelHandle() { ls_model_close(m); }
};

void print_json(const lstool::json& j) { std::cout << j.dump() << "\n"; }

// Blocks until SIGINT or SIGTERM, then stops the server.
int serve(ls_engine* engine, const lstool::ServerOptions& opts) {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  httplib::Server server;
  lstool::install_routes(server, engine, opts);
  int port = opts.port;
  if (port == 0) {
    port = server.bind_to_any_port(opts.host);
  } else if (!server.bind_to_port(opts.host, port)) {
    port = -1;
  }
  if (port < 0) throw StatusError(LS_IO, "cannot listen on " + opts.host + ":" + std::to_string(opts.port));
  std::cerr << "listening on " << opts.host << ":" << port << std::endl;

  std::thread waiter([&] {
    int sig = 0;
    sigwait(&set, &sig);
    server.stop();
  });
  server.listen_after_bind();
  // listen returned on its own (not via a signal): wake the waiter
  if (waiter.joinable()) {
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"latentsearch: learned image compression with search on the compressed latent"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(ls_version()));

  std::string db, weights, embed_codec;
  const std::vector<std::string> codec_names = {"raw", "entropy", "fastlz"};
  auto add_db = [&](CLI::App* sub) {
    sub->add_option("--db", db, "database directory")->envname("LATENTSEARCH_DB")->required();
  };
  auto add_weights = [&](CLI::App* sub) {
    sub->add_option("--weights", weights, "LICW weight archive")->envname("LATENTSEARCH_WEIGHTS")->required();
  };
  auto add_codec = [&](CLI::App* sub) {
    sub->add_option("--embed-codec", embed_codec, "embedding storage codec")->check(CLI::IsMember(codec_names));
  };

  // ingest
  std::vector<std::string> images;
  auto* ingest = app.add_subcommand("ingest", "compress, embed and store images; prints {id, bpp, psnr} per image");
  add_db(ingest);
  add_weights(ingest);
  add_codec(ingest);
  ingest->add_option("images", images, "PNG or PPM files")->required();

  // query
  std::string query_image, bitstream_out;
  size_t k = 3;
  std::optional<double> thr;
  auto* query = app.add_subcommand("query", "search by image; prints {hits, bpp, query_us}");
  add_db(query);
  add_weights(query);
  query->add_option("image", query_image, "PNG or PPM file")->required();
  query->add_option("--k", k, "number of hits")->check(CLI::PositiveNumber);
  query->add_option("--thr", thr, "drop hits farther than this cosine distance")->check(CLI::Range(0.0, 2.0));
  query->add_option("--bitstream-out", bitstream_out, "also write the query's own LICB stream here");

  // fetch
  uint64_t fetch_id = 0;
  bool decode = true;
  std::string output = "-";
  auto* fetch = app.add_subcommand("fetch", "read back a stored image (PNG) or its raw LICB stream");
  add_db(fetch);
  add_weights(fetch);
  fetch->add_option("id", fetch_id, "record id")->required();
  fetch->add_option("--decode", decode, "true: PNG reconstruction, false: raw LICB bytes")->default_str("true");
  fetch->add_option("-o,--output", output, "output file, - for stdout");

  // serve
  lstool::ServerOptions sopts;
  auto* serve_cmd = app.add_subcommand("serve", "HTTP API");
  add_db(serve_cmd);
  add_weights(serve_cmd);
  add_codec(serve_cmd);
  serve_cmd->add_option("--host", sopts.host, "listen address");
  serve_cmd->add_option("--port", sopts.port, "listen port, 0 picks a free one");
  serve_cmd->add_option("--k", sopts.default_k, "default number of hits")->check(CLI::PositiveNumber);
  serve_cmd->add_option("--thr", sopts.default_thr, "default distance threshold")->check(CLI::Range(0.0, 2.0));

  // eval
  std::string query_dir, teacher;
  std::vector<size_t> ks;
  auto* eval = app.add_subcommand("eval", "bpp / psnr / hit-rate report over a directory of query images");
  add_db(eval);
  add_weights(eval);
  eval->add_option("query_dir", query_dir, "directory of .png / .ppm queries")->required();
  eval->add_option("--teacher", teacher, "LICE teacher-embedding file (hit columns are n/a without it)");
  eval->add_option("--k", ks, "extra k values for the per-k table (1 and 5 are always reported)")
      ->check(CLI::PositiveNumber);

  // compress / decompress
  std::string in_path, out_path, format;
  auto* compress = app.add_subcommand("compress", "image -> LICB bitstream; prints {bpp, psnr, width, height, bytes}");
  add_weights(compress);
  compress->add_option("input", in_path, "PNG or PPM file")->required();
  compress->add_option("output", out_path, "LICB output, - for stdout")->required();
  auto* decompress = app.add_subcommand("decompress", "LICB bitstream -> image");
  add_weights(decompress);
  decompress->add_option("input", in_path, "LICB file")->required();
  decompress->add_option("output", out_path, "image output, - for stdout")->required();
  decompress->add_option("--format", format, "png or ppm (default: from the output extension, else png)")
      ->check(CLI::IsMember({"png", "ppm"}));

  // codec-bench
  size_t count = 500, dim = 512;
  uint64_t seed = 1;
  std::string bench_db;
  auto* bench = app.add_subcommand("codec-bench", "compare embedding storage codecs");
  auto* bench_db_opt = bench->add_option("--db", bench_db, "use the embeddings stored in this database");
  bench->add_option("--count", count, "random unit embeddings to generate")
      ->check(CLI::PositiveNumber)
      ->excludes(bench_db_opt);
  bench->add_option("--dim", dim, "dimension of generated embeddings")->check(CLI::PositiveNumber)->excludes(bench_db_opt);
  bench->add_option("--seed", seed, "seed for generated embeddings")->excludes(bench_db_opt);

  // init-weights
  std::string preset = "random";
  auto* init = app.add_subcommand("init-weights", "write a LICW archive with default dimensions");
  init->add_option("output", out_path, "archive path")->required();
  init->add_option("--seed", seed, "generator seed");
  init->add_option("--preset", preset, "random: seeded initialization; block-mean: hand-set block-average codec")
      ->check(CLI::IsMember({"random", "block-mean"}));

  // stats
  auto* stats = app.add_subcommand("stats", "record count, stored bytes and mean bpp");
  add_db(stats);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) {
      EngineHandle eng(db, weights, codec_arg(embed_codec));
      for (const auto& path : images) {
        const auto bytes = slurp(path);
        ls_ingest_result r{};
        const ls_status s = ls_ingest(eng.e, bytes.data(), bytes.size(), codec_arg(embed_codec), &r);
        if (s != LS_OK) throw StatusError(s, path + ": " + ls_status_name(s) + ": " + ls_last_error());
        print_json(lstool::ingest_json(r));
      }
    } else if (*query) {
      EngineHandle eng(db, weights, LS_EMBED_DEFAULT);
      const auto bytes = slurp(query_image);
      ls_query_params p{k, thr.has_value(), thr.value_or(0.0)};
      lstool::QueryResult q;
      check(ls_query(eng.e, bytes.data(), bytes.size(), &p, &q.r));
      if (!bitstream_out.empty()) spill(bitstream_out, q.r.bitstream, q.r.bitstream_len);
      print_json(lstool::query_json(q.r));
    } else if (*fetch) {
      EngineHandle eng(db, weights, LS_EMBED_DEFAULT);
      Buffer out;
      check(ls_fetch(eng.e, fetch_id, decode ? 1 : 0, &out.b));
      spill(output, out.b.data, out.b.len);
    } else if (*serve_cmd) {
      EngineHandle eng(db, weights, codec_arg(embed_codec));
      sopts.embed_codec = codec_arg(embed_codec);
      return serve(eng.e, sopts);
    } else if (*eval) {
      EngineHandle eng(db, weights, LS_EMBED_DEFAULT);
      Buffer report;
      check(ls_eval(eng.e, query_dir.c_str(), teacher.empty() ? nullptr : teacher.c_str(), ks.data(), ks.size(),
                    &report.b));
      std::cout << report.str();
    } else if (*compress) {
      ModelHandle model(weights);
      const auto bytes = slurp(in_path);
      Buffer licb;
      ls_compress_stats st{};
      check(ls_compress(model.m, bytes.data(), bytes.size(), &licb.b, &st));
      spill(out_path, licb.b.data, licb.b.len);
      const lstool::json j = {
          {"bpp", st.bpp}, {"psnr", st.psnr}, {"width", st.width}, {"height", st.height}, {"bytes", licb.b.len}};
      (out_path == "-" ? std::cerr : std::cout) << j.dump() << "\n";
    } else if (*decompress) {
      ModelHandle model(weights);
      if (format.empty()) {
        const auto dot = out_path.rfind('.');
        format = dot != std::string::npos && out_path.substr(dot) == ".ppm" ? "ppm" : "png";
      }
      const auto bytes = slurp(in_path);
      Buffer image;
      check(ls_decompress(model.m, bytes.data(), bytes.size(), format == "ppm" ? LS_IMAGE_PPM : LS_IMAGE_PNG,
                          &image.b));
      spill(out_path, image.b.data, image.b.len);
    } else if (*bench) {
      float* flat = nullptr;
      if (!bench_db.empty()) {
        check(ls_db_embeddings(bench_db.c_str(), &flat, &count, &dim));
      } else {
        check(ls_random_embeddings(count, dim, seed, &flat));
      }
      ls_bench_row rows[3];
      Buffer report;
      const ls_status s = ls_codec_bench(flat, count, dim, rows, &report.b);
      ls_floats_free(flat);
      check(s);
      std::cout << report.str();
      for (const auto& r : rows) {
        if (!r.fixed_point_exact) return 1;
      }
    } else if (*init) {
      check(ls_weights_generate(out_path.c_str(), seed,
                                preset == "block-mean" ? LS_WEIGHTS_BLOCK_MEAN : LS_WEIGHTS_RANDOM));
    } else if (*stats) {
      ls_stats s{};
      check(ls_db_stats(db.c_str(), &s));
      print_json(lstool::stats_json(s));
    }
  } catch (const std::exception& e) {
    std::cerr << "latentsearch: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
