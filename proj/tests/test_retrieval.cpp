#include <algorithm>
#include <cmath>

#include "bitstream.hpp"
#include "doctest.h"
#include "embedding_codec.hpp"
#include "log.hpp"
#include "numerics.hpp"
#include "retrieval.hpp"
#include "store.hpp"
#include "support.hpp"

using namespace latentsearch;
using namespace latentsearch::retrieval;
using namespace testsupport;

namespace {

// Full sort with the distance computed independently in long double.
std::vector<Hit> brute_force(const std::vector<std::vector<float>>& gallery, const std::vector<uint64_t>& ids,
                             std::span<const float> q, std::size_t k, std::optional<double> thr) {
  std::vector<Hit> all;
  for (std::size_t i = 0; i < gallery.size(); ++i) {
    long double dot = 0, qq = 0, rr = 0;
    for (std::size_t j = 0; j < q.size(); ++j) {
      dot += static_cast<long double>(q[j]) * gallery[i][j];
      qq += static_cast<long double>(q[j]) * q[j];
      rr += static_cast<long double>(gallery[i][j]) * gallery[i][j];
    }
    const double d = static_cast<double>(1.0L - dot / (std::sqrt(qq) * std::sqrt(rr)));
    all.push_back({ids[i], std::clamp(d, 0.0, 2.0)});
  }
  std::stable_sort(all.begin(), all.end(), [](const Hit& a, const Hit& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.id < b.id);
  });
  if (all.size() > k) all.resize(k);
  if (thr) std::erase_if(all, [&](const Hit& h) { return h.distance > *thr; });
  return all;
}

}  // namespace

TEST_CASE("query parameters are validated") {
  QueryParams p;
  CHECK(p.k == 3);
  CHECK_NOTHROW(p.validate());
  p.k = 0;
  CHECK(error_code([&] { p.validate(); }) == ErrorCode::kInvalidArgument);
  p.k = 1;
  p.thr = -0.1;
  CHECK(error_code([&] { p.validate(); }) == ErrorCode::kInvalidArgument);
  p.thr = 2.1;
  CHECK(error_code([&] { p.validate(); }) == ErrorCode::kInvalidArgument);
  p.thr = 0.0;
  CHECK_NOTHROW(p.validate());
  p.thr = 2.0;
  CHECK_NOTHROW(p.validate());
}

TEST_CASE("search agrees with a brute-force oracle") {
  Rng rng(40);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t dim = 1 + rng.below(96);
    const std::size_t n = 1 + rng.below(300);
    EmbeddingIndex index(dim);
    std::vector<std::vector<float>> gallery;
    std::vector<uint64_t> ids;
    for (std::size_t i = 0; i < n; ++i) {
      const auto v = random_vector(dim, rng);
      ids.push_back(1000 + i * 3);
      index.add(ids.back(), v);
      gallery.push_back(numerics::l2_normalize(v));  // the row the index keeps
    }
    for (int qi = 0; qi < 5; ++qi) {
      const auto q = random_vector(dim, rng);
      QueryParams p;
      p.k = 1 + rng.below(n + 5);
      if (rng.below(2)) p.thr = rng.uniform(0.0f, 2.0f);
      const auto got = index.search(q, p).hits;
      const auto want = brute_force(gallery, ids, q, p.k, p.thr);
      REQUIRE(got.size() == want.size());
      for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i].id == want[i].id);
        CHECK(got[i].distance == doctest::Approx(want[i].distance).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("distance matches the numerics cosine distance bit for bit") {
  Rng rng(41);
  EmbeddingIndex index(64);
  std::vector<std::vector<float>> gallery;
  for (uint64_t id = 1; id <= 50; ++id) {
    gallery.push_back(random_unit(64, rng));
    index.add(id, gallery.back());
  }
  const auto q = random_vector(64, rng);
  QueryParams p;
  p.k = 50;
  for (const Hit& h : index.search(q, p).hits) {
    const auto unit = numerics::l2_normalize(gallery[h.id - 1]);
    CHECK(h.distance == numerics::cosine_distance(q, unit));
  }
}

TEST_CASE("ties go to the smaller id") {
  EmbeddingIndex index(4);
  const std::vector<float> v = {0.5f, 0.5f, 0.5f, 0.5f};
  for (uint64_t id : {9, 3, 7, 5}) index.add(id, v);
  QueryParams p;
  p.k = 2;
  const auto hits = index.search(v, p).hits;
  REQUIRE(hits.size() == 2);
  CHECK(hits[0].id == 3);
  CHECK(hits[1].id == 5);
}

TEST_CASE("threshold") {
  EmbeddingIndex index(2);
  index.add(1, std::vector<float>{1.0f, 0.0f});
  index.add(2, std::vector<float>{0.0f, 1.0f});
  index.add(3, std::vector<float>{-1.0f, 0.0f});
  const std::vector<float> q = {1.0f, 0.0f};
  QueryParams p;
  p.k = 3;
  p.thr = 1.0;
  auto hits = index.search(q, p).hits;
  REQUIRE(hits.size() == 2);
  CHECK(hits[0] == Hit{1, 0.0});
  CHECK(hits[1] == Hit{2, 1.0});
  p.thr = 2.0;
  hits = index.search(q, p).hits;
  REQUIRE(hits.size() == 3);
  CHECK(hits[2] == Hit{3, 2.0});
  p.thr = 0.0;
  CHECK(index.search(q, p).hits.size() == 1);
  p.thr = 0.0;
  CHECK(index.search(std::vector<float>{0.6f, 0.8f}, p).hits.empty());
}

TEST_CASE("k larger than the index returns everything") {
  Rng rng(42);
  EmbeddingIndex index(8);
  for (uint64_t id = 1; id <= 5; ++id) index.add(id, random_unit(8, rng));
  QueryParams p;
  p.k = 100;
  CHECK(index.search(random_unit(8, rng), p).hits.size() == 5);
}

TEST_CASE("empty index returns no hits") {
  EmbeddingIndex index(8);
  Rng rng(43);
  const auto r = index.search(random_unit(8, rng), QueryParams{});
  CHECK(r.hits.empty());
  CHECK(r.query_us >= 0.0);
}

TEST_CASE("index input checks") {
  EmbeddingIndex index(4);
  const std::vector<float> v = {1, 0, 0, 0};
  index.add(1, v);
  CHECK(error_code([&] { index.add(1, v); }) == ErrorCode::kInvalidArgument);
  CHECK(error_code([&] { index.add(2, std::vector<float>{1, 0, 0}); }) == ErrorCode::kShapeMismatch);
  CHECK(error_code([&] { index.add(3, std::vector<float>{NAN, 0, 0, 0}); }) == ErrorCode::kInvalidArgument);
  CHECK(error_code([&] { index.search(std::vector<float>{1, 0}, QueryParams{}); }) == ErrorCode::kShapeMismatch);
  CHECK(error_code([&] { index.search(std::vector<float>{0, 0, 0, 0}, QueryParams{}); }) ==
        ErrorCode::kInvalidArgument);
  CHECK(error_code([] { EmbeddingIndex bad(0); }) == ErrorCode::kInvalidArgument);
  CHECK(index.size() == 1);
}

TEST_CASE("stored norms and rows are unit length") {
  Rng rng(44);
  EmbeddingIndex index(32);
  index.add(1, random_vector(32, rng, 0.0f, 10.0f));
  CHECK(numerics::l2_norm(index.row(0)) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("recall and hit/total") {
  EmbeddingIndex index(2);
  index.add(1, std::vector<float>{1.0f, 0.0f});
  index.add(2, std::vector<float>{0.0f, 1.0f});
  index.add(3, std::vector<float>{0.7f, 0.7f});
  const std::vector<std::vector<float>> queries = {{1.0f, 0.1f}, {0.1f, 1.0f}, {1.0f, 0.0f}};
  const std::vector<uint64_t> oracle = {1, 2, 2};
  CHECK(recall_at_k(index, queries, oracle, 1) == doctest::Approx(2.0 / 3.0));
  CHECK(recall_at_k(index, queries, oracle, 3) == doctest::Approx(1.0));
  CHECK(error_code([&] { recall_at_k(index, {}, {}, 1); }) == ErrorCode::kInvalidArgument);
  CHECK(error_code([&] { recall_at_k(index, queries, std::span(oracle).first(2), 1); }) ==
        ErrorCode::kInvalidArgument);
  CHECK(hit_total(7, 24) == "7/24");
  CHECK(hit_total(0, 0) == "0/0");
}

TEST_CASE("build_index loads every record and skips bad ones") {
  TempDir dir;
  Rng rng(45);
  store::StoreOptions o;
  o.dim = 16;
  std::vector<uint8_t> bs;
  {
    codec::Bitstream b;
    b.header.orig_width = b.header.pad_width = 64;
    b.header.orig_height = b.header.pad_height = 64;
    b.y_payload = {1, 2, 3};
    bs = codec::serialize(b);
  }
  store::UnifiedDb db(dir / "db", o);
  std::vector<std::vector<float>> vs;
  for (int i = 0; i < 6; ++i) {
    vs.push_back(random_unit(16, rng));
    db.put(bs, vs.back(), store::EmbedCodec::kRaw);
  }
  db.put(bs, std::vector<float>(16, 0.9f), store::EmbedCodec::kRaw);  // not unit norm

  int warnings = 0;
  set_warning_sink([&](const std::string&) { ++warnings; });
  BuildSummary summary;
  const auto index = build_index(db, &summary);
  set_warning_sink({});
  CHECK(index.size() == 6);
  CHECK(summary.indexed == 6);
  CHECK(summary.skipped == std::vector<uint64_t>{7});
  CHECK(warnings == 1);
  CHECK(index.ids() == std::vector<uint64_t>{1, 2, 3, 4, 5, 6});
  QueryParams p;
  p.k = 1;
  for (uint64_t id = 1; id <= 6; ++id) CHECK(index.search(vs[id - 1], p).hits[0].id == id);
}
