#include <doctest.h>

#include <cstring>
#include <json.hpp>

#include "codec.hpp"
#include "error.hpp"
#include "support.hpp"
#include "weights.hpp"

using namespace latentsearch;
using namespace latentsearch::weights;
using nlohmann::json;

namespace {

struct Parts {
  json meta;
  std::vector<uint8_t> blob;
};

Parts split(const std::vector<uint8_t>& bytes) {
  uint32_t meta_len = 0;
  std::memcpy(&meta_len, bytes.data() + 8, 4);
  Parts p;
  p.meta = json::parse(bytes.begin() + 12, bytes.begin() + 12 + meta_len);
  p.blob.assign(bytes.begin() + 12 + meta_len, bytes.end());
  return p;
}

std::vector<uint8_t> join(const std::string& meta_text, const std::vector<uint8_t>& blob) {
  std::vector<uint8_t> out{'L', 'I', 'C', 'W', 1, 0, 0, 0};
  const auto len = static_cast<uint32_t>(meta_text.size());
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(len >> (8 * i)));
  out.insert(out.end(), meta_text.begin(), meta_text.end());
  out.insert(out.end(), blob.begin(), blob.end());
  return out;
}

ErrorCode parse_error(const std::vector<uint8_t>& bytes) {
  try {
    from_archive(WeightArchive::parse(bytes));
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kInternal;
}

}  // namespace

TEST_CASE("archive round-trip preserves every tensor and the config") {
  const auto cfg = testsupport::small_config();
  const ModelWeights w = generate_random(cfg, 5);
  const auto bytes = to_archive(w).serialize();
  const WeightArchive back = WeightArchive::parse(bytes);
  CHECK(back.serialize() == bytes);
  const ModelWeights w2 = from_archive(back);
  CHECK(w2.config.m_ch == cfg.m_ch);
  CHECK(w2.config.embed_dim == cfg.embed_dim);
  CHECK(w2.codec.ga[2].weights == w.codec.ga[2].weights);
  CHECK(w2.codec.hs[1].bias == w.codec.hs[1].bias);
  CHECK(w2.adapter.fusion[2].weights == w.adapter.fusion[2].weights);

  const auto img = image_io::to_tensor(testsupport::make_image(testsupport::Pattern::kBlobs, 96, 64, 1));
  const codec::ImageCodec c1(w.codec, w.priors, w.config.model_id);
  const codec::ImageCodec c2(w2.codec, w2.priors, w2.config.model_id);
  CHECK(codec::serialize(c1.encode(img).bitstream) == codec::serialize(c2.encode(img).bitstream));
}

TEST_CASE("archive on disk") {
  testsupport::TempDir dir;
  const auto a = to_archive(generate_random(testsupport::small_config(), 6));
  a.save(dir / "w.licw");
  CHECK(WeightArchive::load(dir / "w.licw").serialize() == a.serialize());
  CHECK_THROWS_AS(WeightArchive::load(dir / "missing.licw"), Error);
}

TEST_CASE("canonical names are all present with the expected shapes") {
  const auto a = to_archive(generate_random(ModelConfig{}, 1));
  for (const auto& name : canonical_tensor_names()) CHECK_MESSAGE(a.tensors.count(name) == 1, name);
  CHECK(a.tensors.size() == canonical_tensor_names().size());
  CHECK(a.tensors.at("ga.0.w").shape == std::vector<int64_t>{64, 3, 3, 3});
  CHECK(a.tensors.at("ga.3.w").shape == std::vector<int64_t>{96, 64, 3, 3});
  CHECK(a.tensors.at("hs.1.w").shape == std::vector<int64_t>{64, 192, 3, 3});
  CHECK(a.tensors.at("adapter.branch_b.w").shape == std::vector<int64_t>{96, 96, 3, 3});
  CHECK(a.tensors.at("adapter.fusion.0.w").shape == std::vector<int64_t>{512, 288});
  CHECK(a.tensors.at("adapter.fusion.2.w").shape == std::vector<int64_t>{512, 512});
  CHECK(a.tensors.at("prior.gaussian.scales").shape == std::vector<int64_t>{64});
}

TEST_CASE("generation is seeded and deterministic") {
  const auto cfg = testsupport::small_config();
  CHECK(to_archive(generate_random(cfg, 9)).serialize() == to_archive(generate_random(cfg, 9)).serialize());
  CHECK(to_archive(generate_random(cfg, 9)).serialize() != to_archive(generate_random(cfg, 10)).serialize());
  CHECK(to_archive(generate_block_mean(ModelConfig{}, 9)).serialize() ==
        to_archive(generate_block_mean(ModelConfig{}, 9)).serialize());
}

TEST_CASE("malformed archives are rejected") {
  const auto good = to_archive(generate_random(testsupport::small_config(), 7)).serialize();
  const Parts parts = split(good);

  auto bad_magic = good;
  bad_magic[0] = 'X';
  CHECK(parse_error(bad_magic) == ErrorCode::kBadMagic);

  auto bad_version = good;
  bad_version[4] = 2;
  CHECK(parse_error(bad_version) == ErrorCode::kUnsupportedVersion);

  CHECK(parse_error(std::vector<uint8_t>(good.begin(), good.end() - 4)) != ErrorCode::kInternal);

  {
    json m = parts.meta;
    m["tensors"].erase("ga.1.w");
    m["tensors"].erase("adapter.fusion.2.b");
    try {
      from_archive(WeightArchive::parse(join(m.dump(), parts.blob)));
      FAIL("expected an error");
    } catch (const Error& e) {
      const std::string msg = e.what();
      CHECK(msg.find("ga.1.w") != std::string::npos);
      CHECK(msg.find("adapter.fusion.2.b") != std::string::npos);
    }
  }
  {
    json m = parts.meta;
    m["tensors"]["ga.0.b"]["offset"] = parts.blob.size();
    CHECK(parse_error(join(m.dump(), parts.blob)) != ErrorCode::kInternal);
  }
  {
    json m = parts.meta;
    m["tensors"]["ga.0.b"]["dtype"] = "f16";
    CHECK(parse_error(join(m.dump(), parts.blob)) != ErrorCode::kInternal);
  }
  {
    json m = parts.meta;
    m["tensors"]["ga.0.b"]["shape"] = json::array({3});
    CHECK(parse_error(join(m.dump(), parts.blob)) != ErrorCode::kInternal);
  }
  {
    // The same tensor listed twice.
    std::string text = parts.meta.dump();
    const std::string entry = "\"ga.0.b\":" + parts.meta["tensors"]["ga.0.b"].dump();
    const auto at = text.find(entry);
    REQUIRE(at != std::string::npos);
    text.insert(at, entry + ",");
    CHECK(parse_error(join(text, parts.blob)) != ErrorCode::kInternal);
  }
}
