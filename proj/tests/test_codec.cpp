#include <doctest.h>

#include <cmath>

#include "bitstream.hpp"
#include "codec.hpp"
#include "error.hpp"
#include "support.hpp"
#include "weights.hpp"

using namespace latentsearch;
using namespace latentsearch::codec;
using testsupport::make_image;
using testsupport::Pattern;
using testsupport::random_tensor;

namespace {

ImageCodec make_codec(const weights::ModelWeights& w) {
  return ImageCodec(w.codec, w.priors, w.config.model_id);
}

Tensor image_tensor(Pattern p, int w, int h, uint64_t seed) {
  return image_io::to_tensor(make_image(p, w, h, seed));
}

CodecWeights zero_bias(CodecWeights w) {
  for (auto& p : w.ga) std::fill(p.bias.begin(), p.bias.end(), 0.0f);
  for (auto& p : w.gs) std::fill(p.bias.begin(), p.bias.end(), 0.0f);
  for (auto& p : w.ha) std::fill(p.bias.begin(), p.bias.end(), 0.0f);
  for (auto& p : w.hs) std::fill(p.bias.begin(), p.bias.end(), 0.0f);
  return w;
}

}  // namespace

TEST_CASE("transform shapes") {
  const auto w = weights::generate_random(weights::ModelConfig{}, 1);
  Rng rng(1);
  const Tensor x = random_tensor({1, 3, 64, 64}, rng, 0.0f, 1.0f);
  const Tensor y = analyze(x, w.codec);
  CHECK(y.shape() == numerics::Shape{1, 96, 4, 4});
  const Tensor x_hat = synthesize(numerics::round_quantize(y), w.codec);
  CHECK(x_hat.shape() == numerics::Shape{1, 3, 64, 64});
  for (float v : x_hat.data()) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
  const HyperOutput h = hyper_path(y, w.codec);
  CHECK(h.z_hat.shape() == numerics::Shape{1, 64, 1, 1});
  CHECK(h.mu.shape() == y.shape());
  CHECK(h.sigma.shape() == y.shape());
  CHECK_THROWS_AS(analyze(random_tensor({1, 3, 60, 64}, rng), w.codec), Error);
  CHECK_THROWS_AS(synthesize(Tensor({1, 95, 4, 4}), w.codec), Error);
}

TEST_CASE("zero image and zero biases give zero latents and zero reconstruction") {
  const auto w = weights::generate_random(testsupport::small_config(), 2);
  const CodecWeights zb = zero_bias(w.codec);
  const Tensor y = analyze(Tensor({1, 3, 64, 128}, 0.0f), zb);
  for (float v : y.data()) CHECK(v == 0.0f);
  const Tensor x_hat = synthesize(Tensor(y.shape(), 0.0f), zb);
  for (float v : x_hat.data()) CHECK(v == 0.0f);
  const HyperOutput h = hyper_path(y, zb);
  for (float v : h.z_hat.data()) CHECK(v == 0.0f);
}

TEST_CASE("sigma is strictly positive for random latents") {
  const auto w = weights::generate_random(testsupport::small_config(), 3);
  Rng rng(3);
  for (int t = 0; t < 1000; ++t) {
    const Tensor y = random_tensor({1, 12, 4, 4}, rng, -20.0f, 20.0f);
    const HyperOutput h = hyper_path(y, w.codec);
    for (float s : h.sigma.data()) REQUIRE(s > 0.0f);
  }
}

TEST_CASE("analysis is deterministic") {
  const auto w = weights::generate_random(weights::ModelConfig{}, 4);
  const Tensor x = image_tensor(Pattern::kBlobs, 128, 64, 4);
  CHECK(analyze(x, w.codec) == analyze(x, w.codec));
  const auto codec = make_codec(w);
  CHECK(serialize(codec.encode(x).bitstream) == serialize(codec.encode(x).bitstream));
}

TEST_CASE("padding and cropping") {
  Rng rng(5);
  const Tensor x = random_tensor({1, 3, 50, 70}, rng, 0.0f, 1.0f);
  const Tensor p = pad_to_multiple(x);
  CHECK(p.shape() == numerics::Shape{1, 3, 64, 128});
  CHECK(p.at(0, 1, 63, 127) == x.at(0, 1, 49, 69));
  CHECK(p.at(0, 2, 10, 100) == x.at(0, 2, 10, 69));
  CHECK(crop(p, 50, 70) == x);
  CHECK(pad_to_multiple(p) == p);
}

TEST_CASE("encode then decode reproduces the encoder reconstruction") {
  const auto w = weights::generate_random(weights::ModelConfig{}, 6);
  const auto codec = make_codec(w);
  for (auto p : testsupport::kAllPatterns) {
    const Tensor x = image_tensor(p, 70 + static_cast<int>(p) * 9, 65 + static_cast<int>(p) * 13, 6);
    const EncodeResult enc = codec.encode(x);
    const auto bytes = serialize(enc.bitstream);
    const DecodeResult dec = codec.decode(bytes);
    CHECK(dec.y_hat == enc.y_hat);
    CHECK(dec.reconstruction == enc.reconstruction);
    CHECK(dec.reconstruction.shape() == x.shape());
    const auto& h = enc.bitstream.header;
    CHECK(h.orig_width == x.shape().w);
    CHECK(h.orig_height == x.shape().h);
    CHECK(h.pad_width % 64 == 0);
    CHECK(h.pad_height % 64 == 0);
    CHECK(enc.stats.bpp == doctest::Approx(8.0 * enc.bitstream.payload_bytes() / (x.shape().w * x.shape().h)));
    CHECK(enc.stats.psnr == doctest::Approx(numerics::psnr(x, enc.reconstruction, 1.0)));
  }
}

TEST_CASE("kodak-sized image keeps its dims in the header") {
  const auto w = weights::generate_random(testsupport::small_config(), 7);
  const auto enc = make_codec(w).encode(image_tensor(Pattern::kSine, 768, 512, 7));
  const auto& h = enc.bitstream.header;
  CHECK(h.orig_width == 768);
  CHECK(h.orig_height == 512);
  CHECK(h.pad_width == 768);
  CHECK(h.pad_height == 512);
  CHECK(enc.stats.bpp > 0.0);
  CHECK(enc.stats.bpp < 24.0);
}

TEST_CASE("flat images never cost more than noise of the same size") {
  for (uint64_t seed = 1; seed <= 4; ++seed) {
    for (bool block_mean : {false, true}) {
      const auto w = block_mean ? weights::generate_block_mean(weights::ModelConfig{}, seed)
                                : weights::generate_random(weights::ModelConfig{}, seed);
      const auto codec = make_codec(w);
      for (auto [iw, ih] : {std::pair{64, 64}, std::pair{128, 96}}) {
        const auto noise = codec.encode(image_tensor(Pattern::kNoise, iw, ih, seed)).bitstream.payload_bytes();
        for (uint8_t level : {0, 128, 255}) {
          const auto flat = testsupport::flat_image(iw, ih, level, level, level);
          CHECK(codec.encode(image_io::to_tensor(flat)).bitstream.payload_bytes() <= noise);
        }
        const auto gray = codec.encode(image_io::to_tensor(testsupport::flat_image(iw, ih, 128, 128, 128)));
        CHECK(gray.bitstream.payload_bytes() < noise);
      }
    }
  }
}

TEST_CASE("block-mean weights beat the all-gray baseline") {
  const auto w = weights::generate_block_mean(weights::ModelConfig{}, 1);
  const auto codec = make_codec(w);
  for (auto p : {Pattern::kGradient, Pattern::kBlobs, Pattern::kFlat}) {
    const Tensor x = image_tensor(p, 128, 128, 8);
    const double gray = numerics::psnr(x, Tensor(x.shape(), 0.5f), 1.0);
    CHECK(codec.encode(x).stats.psnr > gray);
  }
}

TEST_CASE("header inspection without decoding") {
  const auto w = weights::generate_random(testsupport::small_config(), 9);
  const auto bytes = serialize(make_codec(w).encode(image_tensor(Pattern::kChecker, 100, 80, 9)).bitstream);
  const BitstreamHeader h = peek_header(std::span(bytes).first(kBitstreamFixedBytes - 12));
  CHECK(h.orig_width == 100);
  CHECK(h.orig_height == 80);
  CHECK(h.model_id == w.config.model_id);
}

TEST_CASE("container errors are distinct") {
  const auto w = weights::generate_random(testsupport::small_config(), 10);
  const auto codec = make_codec(w);
  const auto good = serialize(codec.encode(image_tensor(Pattern::kBlobs, 64, 64, 10)).bitstream);
  const auto code_of = [&](std::vector<uint8_t> b) {
    try {
      codec.decode(b);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kInternal;
  };
  auto bad_magic = good;
  bad_magic[0] = 'X';
  CHECK(code_of(bad_magic) == ErrorCode::kBadMagic);
  auto bad_version = good;
  bad_version[4] = 9;
  CHECK(code_of(bad_version) == ErrorCode::kUnsupportedVersion);
  CHECK(code_of(std::vector<uint8_t>(good.begin(), good.end() - 3)) == ErrorCode::kTruncated);
  auto bad_crc = good;
  bad_crc[bad_crc.size() - 6] ^= 0x01;
  CHECK(code_of(bad_crc) == ErrorCode::kChecksumMismatch);
  auto trailing = good;
  trailing.push_back(0);
  CHECK(code_of(trailing) == ErrorCode::kCorruptStream);

  auto other = testsupport::small_config();
  other.model_id = 2;
  const auto w2 = weights::generate_random(other, 10);
  CHECK_THROWS_AS(make_codec(w2).decode(good), Error);
  try {
    make_codec(w2).decode(good);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kModelMismatch);
  }
}

TEST_CASE("single-byte corruption never decodes silently") {
  const auto w = weights::generate_random(testsupport::small_config(), 11);
  const auto codec = make_codec(w);
  const auto good = serialize(codec.encode(image_tensor(Pattern::kSine, 96, 80, 11)).bitstream);
  Rng rng(11);
  for (int t = 0; t < 200; ++t) {
    auto b = good;
    const std::size_t at = rng.below(b.size());
    b[at] ^= static_cast<uint8_t>(1 + rng.below(255));
    CHECK_THROWS_AS(codec.decode(b), Error);
  }
}

TEST_CASE("oversized images are rejected") {
  const auto w = weights::generate_random(testsupport::small_config(), 12);
  CHECK_THROWS_AS(make_codec(w).encode(Tensor({1, 3, 1, kMaxImageSide + 1})), Error);
}
