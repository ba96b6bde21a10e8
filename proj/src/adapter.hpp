#pragma once

// Multi-resolution adapter: maps the quantized latent straight to a unit-norm
// search embedding, without running the synthesis transform.
//
//   A = pool(pool(y))                     pool = 2x2 mean, stride 2
//   B = relu(conv_b(pool(y)))             conv_* = 3x3, stride 2, pad 1
//   C = relu(conv_c2(relu(conv_c1(y))))
//   e = normalize(gap(fc2(relu(fc1(relu(fc0([A, B, C])))))))
//
// All three branches land on ceil(h/4) x ceil(w/4). The fc layers are 1x1
// convolutions, so the head works at any latent resolution.

#include <array>
#include <span>
#include <vector>

#include "numerics.hpp"

namespace latentsearch::adapter {

using numerics::ConvParams;
using numerics::LinearParams;
using numerics::Tensor;

inline constexpr int kMinLatentExtent = 4;

struct AdapterWeights {
  ConvParams branch_b;
  ConvParams branch_c1;
  ConvParams branch_c2;
  std::array<LinearParams, 3> fusion;

  int latent_channels() const { return branch_b.in_ch; }
  int embedding_dim() const { return fusion[2].out_dim; }
  void validate() const;
};

/// Fixed-length, L2-normalized search key.
class Embedding {
 public:
  Embedding() = default;
  /// Throws kInvalidArgument unless values has unit norm within 1e-5 and no NaN.
  explicit Embedding(std::vector<float> values);
  static Embedding normalized(std::span<const float> values);

  std::span<const float> values() const { return values_; }
  std::size_t dim() const { return values_.size(); }

  friend bool operator==(const Embedding&, const Embedding&) = default;

 private:
  std::vector<float> values_;
};

struct Branches {
  Tensor a;
  Tensor b;
  Tensor c;
};

/// The three resolution-alignment branches, before fusion.
Branches branch_outputs(const Tensor& y_hat, const AdapterWeights& w);

Embedding embed_latent(const Tensor& y_hat, const AdapterWeights& w);

/// Cosine distance between a teacher embedding and an adapter embedding.
double distill_distance(const Embedding& teacher, const Embedding& student);

}  // namespace latentsearch::adapter
