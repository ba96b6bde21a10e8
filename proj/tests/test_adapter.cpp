#include <doctest.h>

#include <cmath>

#include "adapter.hpp"
#include "error.hpp"
#include "support.hpp"
#include "weights.hpp"

using namespace latentsearch;
using namespace latentsearch::adapter;
using testsupport::random_tensor;
using testsupport::random_vector;

namespace {

AdapterWeights default_adapter(uint64_t seed = 1) {
  return weights::generate_random(weights::ModelConfig{}, seed).adapter;
}

Tensor integer_latent(numerics::Shape s, Rng& rng) {
  return numerics::round_quantize(random_tensor(s, rng, -6.0f, 6.0f));
}

}  // namespace

TEST_CASE("4x4 latent gives a unit 512-dim embedding") {
  Rng rng(1);
  const Embedding e = embed_latent(integer_latent({1, 96, 4, 4}, rng), default_adapter());
  CHECK(e.dim() == 512);
  CHECK(std::fabs(numerics::l2_norm(e.values()) - 1.0) <= 1e-5);
}

TEST_CASE("zero latent with zero biases is an explicit error") {
  AdapterWeights w = default_adapter();
  for (ConvParams* p : {&w.branch_b, &w.branch_c1, &w.branch_c2}) std::fill(p->bias.begin(), p->bias.end(), 0.0f);
  for (auto& f : w.fusion) std::fill(f.bias.begin(), f.bias.end(), 0.0f);
  CHECK_THROWS_AS(embed_latent(Tensor({1, 96, 4, 4}, 0.0f), w), Error);
}

TEST_CASE("different spatial extents of one latent field give different embeddings") {
  Rng rng(2);
  const Tensor big = integer_latent({1, 96, 8, 8}, rng);
  Tensor small({1, 96, 4, 4});
  for (int c = 0; c < 96; ++c)
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x) small.at(0, c, y, x) = big.at(0, c, y, x);
  const auto w = default_adapter();
  const Embedding a = embed_latent(small, w);
  const Embedding b = embed_latent(big, w);
  CHECK_FALSE(a == b);
  CHECK(std::fabs(numerics::l2_norm(a.values()) - 1.0) <= 1e-5);
  CHECK(std::fabs(numerics::l2_norm(b.values()) - 1.0) <= 1e-5);
}

TEST_CASE("branch shape law") {
  Rng rng(3);
  const auto w = default_adapter();
  for (int h : {4, 6, 8, 16}) {
    for (int wd : {4, 6, 8, 16}) {
      const Branches br = branch_outputs(integer_latent({1, 96, h, wd}, rng), w);
      const int eh = (h + 3) / 4;
      const int ew = (wd + 3) / 4;
      CHECK(br.a.shape() == numerics::Shape{1, 96, eh, ew});
      CHECK(br.b.shape() == numerics::Shape{1, 96, eh, ew});
      CHECK(br.c.shape() == numerics::Shape{1, 96, eh, ew});
    }
  }
}

TEST_CASE("branches follow their definitions") {
  Rng rng(4);
  const auto w = default_adapter();
  const Tensor y = integer_latent({1, 96, 8, 8}, rng);
  const Branches br = branch_outputs(y, w);
  CHECK(br.a == numerics::avg_pool2(numerics::avg_pool2(y)));
  CHECK(br.b == numerics::relu(numerics::conv2d(numerics::avg_pool2(y), w.branch_b)));
  CHECK(br.c == numerics::relu(numerics::conv2d(numerics::relu(numerics::conv2d(y, w.branch_c1)), w.branch_c2)));
}

TEST_CASE("latents smaller than 4x4 are rejected") {
  Rng rng(5);
  CHECK_THROWS_AS(embed_latent(integer_latent({1, 96, 3, 8}, rng), default_adapter()), Error);
  CHECK_THROWS_AS(embed_latent(integer_latent({1, 95, 4, 4}, rng), default_adapter()), Error);
}

TEST_CASE("embedding is deterministic") {
  Rng rng(6);
  const Tensor y = integer_latent({1, 96, 4, 8}, rng);
  const auto w = default_adapter();
  CHECK(embed_latent(y, w) == embed_latent(y, w));
}

TEST_CASE("distill_distance") {
  Rng rng(7);
  const Embedding a = Embedding::normalized(random_vector(512, rng));
  CHECK(distill_distance(a, a) == doctest::Approx(0.0).epsilon(1e-12));
  std::vector<float> u(512, 0.0f), v(512, 0.0f);
  u[0] = 1.0f;
  v[1] = 1.0f;
  CHECK(distill_distance(Embedding(u), Embedding(v)) == 1.0);
  for (int t = 0; t < 100; ++t) {
    const Embedding x = Embedding::normalized(random_vector(512, rng));
    const Embedding y = Embedding::normalized(random_vector(512, rng));
    CHECK(distill_distance(x, y) == numerics::cosine_distance(x.values(), y.values()));
  }
  CHECK_THROWS_AS(distill_distance(a, Embedding::normalized(random_vector(256, rng))), Error);
}

TEST_CASE("Embedding enforces unit norm") {
  CHECK_THROWS_AS(Embedding(std::vector<float>{1.0f, 1.0f}), Error);
  CHECK_THROWS_AS(Embedding(std::vector<float>{std::nanf(""), 1.0f}), Error);
  CHECK_NOTHROW(Embedding(std::vector<float>{0.6f, 0.8f}));
}

TEST_CASE("adapter weights validation") {
  AdapterWeights w = default_adapter();
  w.branch_b.stride = 1;
  CHECK_THROWS_AS(w.validate(), Error);
  w = default_adapter();
  w.fusion[0].in_dim += 1;
  w.fusion[0].weights.resize(static_cast<std::size_t>(w.fusion[0].in_dim) * w.fusion[0].out_dim);
  CHECK_THROWS_AS(w.validate(), Error);
}
