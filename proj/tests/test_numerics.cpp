#include <doctest.h>

#include <cmath>
#include <limits>

#include "error.hpp"
#include "numerics_oracles.hpp"
#include "support.hpp"

using namespace latentsearch;
using namespace latentsearch::numerics;
using testsupport::random_tensor;
using testsupport::random_vector;

namespace {

ConvParams random_conv(Rng& rng, int in, int out, int k, int stride, int pad) {
  ConvParams p;
  p.in_ch = in;
  p.out_ch = out;
  p.kernel = k;
  p.stride = stride;
  p.padding = pad;
  p.weights = random_vector(static_cast<std::size_t>(out) * in * k * k, rng);
  p.bias = random_vector(out, rng);
  return p;
}

float max_abs_diff(const Tensor& a, const Tensor& b) {
  REQUIRE(a.shape() == b.shape());
  float m = 0.0f;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a.data()[i] - b.data()[i]));
  return m;
}

}  // namespace

TEST_CASE("conv2d zero kernel gives zeros") {
  ConvParams p;
  p.in_ch = p.out_ch = 1;
  p.stride = 2;
  p.padding = 1;
  p.weights.assign(9, 0.0f);
  p.bias = {0.0f};
  const Tensor out = conv2d(Tensor({1, 1, 4, 4}, 1.0f), p);
  CHECK(out.shape() == Shape{1, 1, 2, 2});
  for (float v : out.data()) CHECK(v == 0.0f);
}

TEST_CASE("conv2d sums a 3x3 window") {
  ConvParams p;
  p.in_ch = p.out_ch = 1;
  p.weights.assign(9, 1.0f);
  p.bias = {0.0f};
  const Tensor out = conv2d(Tensor({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9}), p);
  REQUIRE(out.shape() == Shape{1, 1, 1, 1});
  CHECK(out.data()[0] == 45.0f);
}

TEST_CASE("conv2d output shape") {
  Rng rng(1);
  const Tensor out = conv2d(random_tensor({1, 2, 8, 8}, rng), random_conv(rng, 2, 4, 3, 2, 1));
  CHECK(out.shape() == Shape{1, 4, 4, 4});
}

TEST_CASE("conv2d rejects channel mismatch naming both shapes") {
  Rng rng(2);
  try {
    conv2d(random_tensor({1, 3, 8, 8}, rng), random_conv(rng, 2, 4, 3, 2, 1));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kShapeMismatch);
    const std::string msg = e.what();
    CHECK(msg.find("1x3x8x8") != std::string::npos);
    CHECK(msg.find("4x2x3x3") != std::string::npos);
  }
}

TEST_CASE("conv2d matches nested-loop oracle on 100 random cases") {
  Rng rng(3);
  for (int t = 0; t < 100; ++t) {
    const int in = 1 + static_cast<int>(rng.below(4));
    const int out = 1 + static_cast<int>(rng.below(5));
    const int k = 1 + 2 * static_cast<int>(rng.below(2));
    const int stride = 1 + static_cast<int>(rng.below(2));
    const int pad = static_cast<int>(rng.below(2));
    const int h = k + static_cast<int>(rng.below(10));
    const int w = k + static_cast<int>(rng.below(10));
    const Tensor x = random_tensor({1 + static_cast<int>(rng.below(2)), in, h, w}, rng);
    const ConvParams p = random_conv(rng, in, out, k, stride, pad);
    CHECK(max_abs_diff(conv2d(x, p), oracle::conv2d(x, p)) <= 1e-5f);
  }
}

TEST_CASE("conv2d is linear for bias-free params") {
  Rng rng(4);
  for (int t = 0; t < 20; ++t) {
    ConvParams p = random_conv(rng, 3, 4, 3, 2, 1);
    p.bias.assign(4, 0.0f);
    const Tensor x = random_tensor({1, 3, 9, 7}, rng);
    const Tensor y = random_tensor({1, 3, 9, 7}, rng);
    const float a = rng.uniform(-2, 2);
    const float b = rng.uniform(-2, 2);
    Tensor mix(x.shape());
    for (std::size_t i = 0; i < mix.size(); ++i) mix.data()[i] = a * x.data()[i] + b * y.data()[i];
    const Tensor lhs = conv2d(mix, p);
    const Tensor cx = conv2d(x, p);
    const Tensor cy = conv2d(y, p);
    for (std::size_t i = 0; i < lhs.size(); ++i) {
      const float rhs = a * cx.data()[i] + b * cy.data()[i];
      CHECK(std::fabs(lhs.data()[i] - rhs) <= 1e-4f * std::max(1.0f, std::fabs(rhs)));
    }
  }
}

TEST_CASE("conv_transpose2d matches scatter oracle and doubles extents") {
  Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    DeconvParams p;
    p.in_ch = 1 + static_cast<int>(rng.below(4));
    p.out_ch = 1 + static_cast<int>(rng.below(4));
    p.weights = random_vector(static_cast<std::size_t>(p.in_ch) * p.out_ch * 9, rng);
    p.bias = random_vector(p.out_ch, rng);
    const int h = 1 + static_cast<int>(rng.below(6));
    const int w = 1 + static_cast<int>(rng.below(6));
    const Tensor x = random_tensor({1, p.in_ch, h, w}, rng);
    const Tensor got = conv_transpose2d(x, p);
    CHECK(got.shape() == Shape{1, p.out_ch, 2 * h, 2 * w});
    CHECK(max_abs_diff(got, oracle::conv_transpose2d(x, p)) <= 1e-5f);
  }
}

TEST_CASE("relu") {
  const Tensor out = relu(Tensor({1, 1, 1, 3}, {-1.5f, 0.0f, 2.5f}));
  CHECK(out.data()[0] == 0.0f);
  CHECK(out.data()[1] == 0.0f);
  CHECK(out.data()[2] == 2.5f);
  Rng rng(6);
  const Tensor neg = random_tensor({1, 2, 3, 3}, rng, -5.0f, -0.1f);
  const Tensor zeroed = relu(neg);
  for (float v : zeroed.data()) CHECK(v == 0.0f);
  const Tensor pos = random_tensor({1, 2, 3, 3}, rng, 0.1f, 5.0f);
  CHECK(relu(pos) == pos);
}

TEST_CASE("avg_pool2 basics") {
  const Tensor out = avg_pool2(Tensor({1, 1, 2, 2}, {1, 2, 3, 4}));
  REQUIRE(out.shape() == Shape{1, 1, 1, 1});
  CHECK(out.data()[0] == 2.5f);
  const Tensor c = avg_pool2(Tensor({1, 2, 6, 4}, 0.7f));
  CHECK(c.shape() == Shape{1, 2, 3, 2});
  for (float v : c.data()) CHECK(v == doctest::Approx(0.7f).epsilon(1e-7));
}

TEST_CASE("avg_pool2 matches windowed-mean oracle on 100 random cases") {
  Rng rng(7);
  {
    const Tensor x = random_tensor({1, 3, 8, 8}, rng);
    const Tensor got = avg_pool2(x);
    CHECK(got.shape() == Shape{1, 3, 4, 4});
    CHECK(max_abs_diff(got, oracle::avg_pool2(x)) <= 1e-5f);
  }
  for (int t = 0; t < 100; ++t) {
    const Tensor x = random_tensor(
        {1, 1 + static_cast<int>(rng.below(4)), 1 + static_cast<int>(rng.below(12)), 1 + static_cast<int>(rng.below(12))},
        rng, -10.0f, 10.0f);
    CHECK(max_abs_diff(avg_pool2(x), oracle::avg_pool2(x)) <= 1e-5f);
  }
}

TEST_CASE("global_avg_pool") {
  Tensor x({1, 2, 2, 2});
  for (int i = 0; i < 4; ++i) {
    x.data()[i] = 1.0f;
    x.data()[4 + i] = 3.0f;
  }
  CHECK(global_avg_pool(x) == std::vector<float>{1.0f, 3.0f});
  CHECK(global_avg_pool(Tensor({1, 1, 1, 1}, 4.25f)) == std::vector<float>{4.25f});

  Rng rng(8);
  {
    const Tensor r = random_tensor({1, 4, 7, 5}, rng);
    const auto got = global_avg_pool(r);
    const auto want = oracle::global_avg_pool(r);
    for (int c = 0; c < 4; ++c) CHECK(std::fabs(got[c] - want[c]) <= 1e-6);
  }
  for (int t = 0; t < 100; ++t) {
    const Tensor r = random_tensor(
        {1, 1 + static_cast<int>(rng.below(8)), 1 + static_cast<int>(rng.below(16)), 1 + static_cast<int>(rng.below(16))},
        rng, -10.0f, 10.0f);
    const auto got = global_avg_pool(r);
    const auto want = oracle::global_avg_pool(r);
    for (std::size_t c = 0; c < got.size(); ++c) CHECK(std::fabs(got[c] - want[c]) <= 1e-5);
  }
}

TEST_CASE("round_quantize rounds half away from zero") {
  const Tensor q = round_quantize(Tensor({1, 1, 1, 4}, {0.4f, 0.5f, -0.5f, -1.2f}));
  CHECK(q.data()[0] == 0.0f);
  CHECK(q.data()[1] == 1.0f);
  CHECK(q.data()[2] == -1.0f);
  CHECK(q.data()[3] == -1.0f);

  Rng rng(9);
  const Tensor x = random_tensor({1, 1, 100, 100}, rng, -8.0f, 8.0f);
  const Tensor r = round_quantize(x);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::fabs(x.data()[i] - r.data()[i]) <= 0.5f);
  CHECK(round_quantize(r) == r);

  CHECK_THROWS_AS(round_quantize(Tensor({1, 1, 1, 1}, 2.0e6f)), Error);
  CHECK(round_quantize(Tensor({1, 1, 1, 1}, 1048576.0f)).data()[0] == 1048576.0f);
}

TEST_CASE("cosine_distance") {
  const std::vector<float> a{1, 2, 3};
  CHECK(cosine_distance(a, a) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(cosine_distance(std::vector<float>{1, 0}, std::vector<float>{0, 1}) == 1.0);
  CHECK(cosine_distance(std::vector<float>{1, 0}, std::vector<float>{-1, 0}) == 2.0);
  CHECK_THROWS_AS(cosine_distance(std::vector<float>{0, 0}, std::vector<float>{0, 1}), Error);
  CHECK_THROWS_AS(cosine_distance(std::vector<float>{1, 0}, std::vector<float>{0, 1, 0}), Error);

  Rng rng(10);
  for (int t = 0; t < 100; ++t) {
    const auto u = random_vector(64, rng);
    const auto v = random_vector(64, rng);
    const float s = rng.uniform(0.01f, 100.0f);
    const float w = rng.uniform(0.01f, 100.0f);
    std::vector<float> su(u), tv(v);
    for (auto& x : su) x *= s;
    for (auto& x : tv) x *= w;
    const double d = cosine_distance(u, v);
    CHECK(d >= 0.0);
    CHECK(d <= 2.0);
    CHECK(std::fabs(d - cosine_distance(su, tv)) <= 1e-6);
  }
}

TEST_CASE("l2_normalize") {
  const auto n = l2_normalize(std::vector<float>{3, 4});
  CHECK(n[0] == doctest::Approx(0.6f));
  CHECK(n[1] == doctest::Approx(0.8f));
  const auto u = l2_normalize(std::vector<float>{0, 1, 0});
  CHECK(u == std::vector<float>{0, 1, 0});
  CHECK_THROWS_AS(l2_normalize(std::vector<float>(8, 0.0f)), Error);
  Rng rng(11);
  for (int t = 0; t < 50; ++t) {
    CHECK(std::fabs(l2_norm(l2_normalize(random_vector(512, rng))) - 1.0) <= 1e-6);
  }
}

TEST_CASE("psnr closed forms") {
  const Tensor a({1, 3, 4, 4}, 0.0f);
  CHECK(std::isinf(psnr(a, a, 1.0)));
  CHECK(psnr(a, Tensor({1, 3, 4, 4}, 1.0f), 1.0) == 0.0);
  // MSE 0.01 -> 20 dB, up to the float representation of 0.1
  CHECK(psnr(Tensor({1, 1, 2, 2}, 0.1f), Tensor({1, 1, 2, 2}, 0.0f), 1.0) == doctest::Approx(20.0).epsilon(1e-6));
  CHECK_THROWS_AS(psnr(a, Tensor({1, 3, 4, 5}), 1.0), Error);
}

TEST_CASE("psnr matches 10 log10(peak^2 / mse) on 100 random cases") {
  Rng rng(13);
  for (int t = 0; t < 100; ++t) {
    const Shape s{1, 3, 1 + static_cast<int>(rng.below(20)), 1 + static_cast<int>(rng.below(20))};
    const Tensor x = random_tensor(s, rng, 0.0f, 1.0f);
    const Tensor y = random_tensor(s, rng, 0.0f, 1.0f);
    const double peak = t % 2 ? 1.0 : 255.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = static_cast<double>(x.data()[i]) - y.data()[i];
      acc += d * d;
    }
    const double want = 10.0 * std::log10(peak * peak / (acc / static_cast<double>(x.size())));
    CHECK(std::fabs(psnr(x, y, peak) - want) <= 1e-9);
  }
}

TEST_CASE("kernels reject non-finite input") {
  Tensor x({1, 1, 3, 3}, 1.0f);
  x.data()[4] = std::numeric_limits<float>::quiet_NaN();
  ConvParams p;
  p.in_ch = p.out_ch = 1;
  p.weights.assign(9, 1.0f);
  p.bias = {0.0f};
  CHECK_THROWS_AS(conv2d(x, p), Error);
  CHECK_THROWS_AS(round_quantize(x), Error);
}

TEST_CASE("fuzz: kernels keep finite inputs finite") {
  Rng rng(12);
  for (int t = 0; t < 30; ++t) {
    const Tensor x = random_tensor({1, 2, 6, 6}, rng, -100.0f, 100.0f);
    const ConvParams p = random_conv(rng, 2, 3, 3, 2, 1);
    for (const Tensor& r : {conv2d(x, p), avg_pool2(x), relu(x), round_quantize(x)}) {
      for (float v : r.data()) CHECK(std::isfinite(v));
    }
  }
}

TEST_CASE("tensor construction validates extents and data length") {
  CHECK_THROWS_AS(Tensor({1, 0, 2, 2}), Error);
  CHECK_THROWS_AS(Tensor({1, 1, 2, 2}, std::vector<float>(3)), Error);
}
