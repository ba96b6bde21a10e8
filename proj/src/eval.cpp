#include "eval.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "engine.hpp"
#include "error.hpp"
#include "log.hpp"
#include "numerics.hpp"
#include "rng.hpp"
#include "teacher_file.hpp"

namespace latentsearch::service {

namespace {

std::string fmt(const char* spec, double v) {
  if (std::isinf(v)) return "inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

std::optional<uint64_t> gallery_id(const std::string& name) {
  if (name.rfind("id:", 0) != 0 || name.size() == 3) return std::nullopt;
  uint64_t v = 0;
  for (std::size_t i = 3; i < name.size(); ++i) {
    if (name[i] < '0' || name[i] > '9') return std::nullopt;
    v = v * 10 + static_cast<uint64_t>(name[i] - '0');
  }
  return v;
}

struct GalleryRow {
  uint64_t id;
  const std::vector<float>* values;
};

// Nearest gallery record under teacher embeddings; ties to the smaller id.
uint64_t oracle_id(const std::vector<float>& query, const std::vector<GalleryRow>& gallery) {
  uint64_t best = gallery.front().id;
  double best_d = 3.0;
  for (const auto& g : gallery) {
    const double d = numerics::cosine_distance(query, *g.values);
    if (d < best_d || (d == best_d && g.id < best)) {
      best_d = d;
      best = g.id;
    }
  }
  return best;
}

template <typename F>
double time_us(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::optional<std::size_t> EvalReport::hits_at(std::size_t k) const {
  for (const auto& h : per_k) {
    if (h.k == k) return h.hits;
  }
  return std::nullopt;
}

std::string EvalReport::text() const {
  const auto hit_cell = [&](std::size_t k) -> std::string {
    const auto h = hits_at(k);
    return has_oracle && h ? retrieval::hit_total(*h, queries) : "n/a";
  };
  const auto recall_cell = [&](std::size_t k) -> std::string {
    const auto h = hits_at(k);
    return has_oracle && h ? fmt("%.4f", static_cast<double>(*h) / static_cast<double>(queries)) : "n/a";
  };
  std::ostringstream out;
  out << "queries " << queries << "\n";
  out << pad("bpp", 10) << pad("psnr", 10) << pad("hit/total", 12) << pad("recall@1", 10) << "recall@5\n";
  out << pad(fmt("%.4f", mean_bpp), 10) << pad(fmt("%.2f", mean_psnr), 10) << pad(hit_cell(1), 12)
      << pad(recall_cell(1), 10) << recall_cell(5) << "\n";
  out << "\n" << pad("k", 6) << pad("hit/total", 12) << "recall\n";
  for (const auto& h : per_k) {
    out << pad(std::to_string(h.k), 6) << pad(hit_cell(h.k), 12) << recall_cell(h.k) << "\n";
  }
  return out.str();
}

std::vector<std::filesystem::path> list_query_images(const std::filesystem::path& dir) {
  require(std::filesystem::is_directory(dir), ErrorCode::kNotFound, "query dir not found: " + dir.string());
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png" || ext == ".ppm") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

EvalReport eval_run(const Engine& engine, const EvalOptions& options) {
  const auto images = list_query_images(options.query_dir);
  require(!images.empty(), ErrorCode::kInvalidArgument,
          "no query images (.png/.ppm) in " + options.query_dir.string());

  EvalReport report;
  report.queries = images.size();
  std::vector<std::size_t> ks = options.ks;
  ks.push_back(1);
  ks.push_back(5);
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  require(ks.front() >= 1, ErrorCode::kInvalidArgument, "k must be >= 1");
  for (std::size_t k : ks) report.per_k.push_back({k, 0});

  std::optional<teacher::TeacherFile> teacher;
  std::vector<GalleryRow> gallery;
  if (options.teacher_path) {
    if (std::filesystem::exists(*options.teacher_path)) {
      teacher = teacher::TeacherFile::load(*options.teacher_path);
      for (const auto& e : teacher->entries) {
        const auto id = gallery_id(e.name);
        if (!id) continue;
        if (engine.db().contains(*id)) {
          gallery.push_back({*id, &e.values});
        } else {
          warn("eval: teacher entry " + e.name + " has no database record; ignored");
        }
      }
      require(!gallery.empty(), ErrorCode::kInvalidArgument,
              "teacher file has no \"id:<n>\" entries matching database records");
    } else {
      warn("eval: teacher file " + options.teacher_path->string() + " not found; hit columns are n/a");
    }
  }
  report.has_oracle = teacher.has_value();

  retrieval::QueryParams params;
  params.k = ks.back();
  double bpp_sum = 0.0;
  double psnr_sum = 0.0;
  for (const auto& path : images) {
    const Analysis a = engine.model().analyze(image_io::read_image(path));
    bpp_sum += a.encoded.stats.bpp;
    psnr_sum += a.encoded.stats.psnr;
    if (!teacher) continue;
    const std::string name = path.filename().string();
    const teacher::TeacherEntry* entry = teacher->find(name);
    require(entry != nullptr, ErrorCode::kNotFound, "teacher file has no entry for query " + name);
    const uint64_t want = oracle_id(entry->values, gallery);
    const auto result = engine.search(a.embedding.values(), params);
    for (auto& kh : report.per_k) {
      const std::size_t n = std::min(kh.k, result.hits.size());
      for (std::size_t i = 0; i < n; ++i) {
        if (result.hits[i].id == want) {
          ++kh.hits;
          break;
        }
      }
    }
  }
  report.mean_bpp = bpp_sum / static_cast<double>(images.size());
  report.mean_psnr = psnr_sum / static_cast<double>(images.size());
  return report;
}

std::string CodecBenchReport::text() const {
  std::ostringstream out;
  out << "embeddings " << count << " x " << dim << "\n";
  out << pad("strategy", 10) << pad("bytes", 12) << pad("encode_us", 14) << pad("decode_us", 14) << "roundtrip\n";
  for (const auto& r : rows) {
    out << pad(store::codec_name(r.codec), 10) << pad(std::to_string(r.total_bytes), 12)
        << pad(fmt("%.1f", r.encode_us), 14) << pad(fmt("%.1f", r.decode_us), 14)
        << (r.fixed_point_exact ? "exact" : "MISMATCH") << "\n";
  }
  return out.str();
}

CodecBenchReport codec_bench(std::span<const std::vector<float>> embeddings) {
  require(!embeddings.empty(), ErrorCode::kInvalidArgument, "codec-bench needs at least one embedding");
  const std::size_t dim = embeddings.front().size();
  require(dim >= 1, ErrorCode::kInvalidArgument, "codec-bench: empty embedding");
  std::vector<int16_t> all_fixed;
  std::vector<std::vector<int16_t>> fixed;
  for (const auto& e : embeddings) {
    require(e.size() == dim, ErrorCode::kShapeMismatch, "codec-bench: embeddings differ in dimension");
    fixed.push_back(store::to_fixed(e));
    all_fixed.insert(all_fixed.end(), fixed.back().begin(), fixed.back().end());
  }
  store::ClassTableSet tables;
  tables.add(store::ClassTable::analytic(0, static_cast<int>(dim)));
  tables.add(store::ClassTable::fitted(1, all_fixed));

  CodecBenchReport report;
  report.count = embeddings.size();
  report.dim = dim;
  for (auto codec : {store::EmbedCodec::kRaw, store::EmbedCodec::kEntropy, store::EmbedCodec::kFastLz}) {
    CodecBenchRow row;
    row.codec = codec;
    std::vector<std::vector<uint8_t>> payloads(embeddings.size());
    row.encode_us = time_us([&] {
      for (std::size_t i = 0; i < embeddings.size(); ++i) {
        payloads[i] = store::compress_embedding(embeddings[i], codec, tables);
      }
    });
    std::vector<std::vector<float>> decoded(embeddings.size());
    row.decode_us = time_us([&] {
      for (std::size_t i = 0; i < embeddings.size(); ++i) {
        decoded[i] = store::decompress_embedding(payloads[i], codec, dim, tables);
      }
    });
    row.fixed_point_exact = true;
    for (std::size_t i = 0; i < embeddings.size(); ++i) {
      row.total_bytes += payloads[i].size();
      const bool same = codec == store::EmbedCodec::kRaw ? decoded[i] == embeddings[i]
                                                         : store::to_fixed(decoded[i]) == fixed[i];
      row.fixed_point_exact = row.fixed_point_exact && same;
    }
    report.rows.push_back(row);
  }
  return report;
}

std::vector<std::vector<float>> random_unit_embeddings(std::size_t n, std::size_t dim, uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<float>> out(n, std::vector<float>(dim));
  for (auto& v : out) {
    for (auto& x : v) x = static_cast<float>(rng.normal());
    v = numerics::l2_normalize(v);
  }
  return out;
}

}  // namespace latentsearch::service
