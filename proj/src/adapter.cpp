#include "adapter.hpp"

#include <cmath>
#include <string>

#include "error.hpp"

namespace latentsearch::adapter {

using numerics::avg_pool2;
using numerics::conv2d;
using numerics::pointwise_linear;
using numerics::relu;

void AdapterWeights::validate() const {
  branch_b.validate();
  branch_c1.validate();
  branch_c2.validate();
  for (const auto& f : fusion) f.validate();
  for (const ConvParams* p : {&branch_b, &branch_c1, &branch_c2}) {
    require(p->kernel == 3 && p->stride == 2 && p->padding == 1, ErrorCode::kInvalidArgument,
            "adapter branch convolutions must be 3x3, stride 2, pad 1");
  }
  require(branch_c1.in_ch == branch_b.in_ch && branch_c2.in_ch == branch_c1.out_ch, ErrorCode::kShapeMismatch,
          "adapter branch channel chain broken");
  require(fusion[0].in_dim == latent_channels() + branch_b.out_ch + branch_c2.out_ch, ErrorCode::kShapeMismatch,
          "fusion input dim must equal the sum of branch channels");
  require(fusion[1].in_dim == fusion[0].out_dim && fusion[2].in_dim == fusion[1].out_dim, ErrorCode::kShapeMismatch,
          "fusion layer dims do not chain");
}

Embedding::Embedding(std::vector<float> values) : values_(std::move(values)) {
  require(!values_.empty(), ErrorCode::kInvalidArgument, "empty embedding");
  for (float v : values_) require(std::isfinite(v), ErrorCode::kInvalidArgument, "embedding contains NaN/Inf");
  const double norm = numerics::l2_norm(values_);
  require(std::fabs(norm - 1.0) <= 1e-5, ErrorCode::kInvalidArgument,
          "embedding norm " + std::to_string(norm) + " is not 1");
}

Embedding Embedding::normalized(std::span<const float> values) {
  return Embedding(numerics::l2_normalize(values));
}

Branches branch_outputs(const Tensor& y_hat, const AdapterWeights& w) {
  const auto& s = y_hat.shape();
  require(s.n == 1 && s.c == w.latent_channels(), ErrorCode::kShapeMismatch,
          "adapter expects 1x" + std::to_string(w.latent_channels()) + "xHxW latent, got " + s.str());
  if (s.h < kMinLatentExtent || s.w < kMinLatentExtent) {
    fail(ErrorCode::kInvalidArgument,
         "latent " + s.str() + " too small for the adapter (image below 64x64)");
  }
  const Tensor pooled = avg_pool2(y_hat);
  Branches out;
  out.a = avg_pool2(pooled);
  out.b = relu(conv2d(pooled, w.branch_b));
  out.c = relu(conv2d(relu(conv2d(y_hat, w.branch_c1)), w.branch_c2));
  return out;
}

Embedding embed_latent(const Tensor& y_hat, const AdapterWeights& w) {
  const Branches br = branch_outputs(y_hat, w);
  const Tensor* parts[] = {&br.a, &br.b, &br.c};
  Tensor t = numerics::concat_channels(parts);
  t = relu(pointwise_linear(t, w.fusion[0]));
  t = relu(pointwise_linear(t, w.fusion[1]));
  t = pointwise_linear(t, w.fusion[2]);
  return Embedding::normalized(numerics::global_avg_pool(t));
}

double distill_distance(const Embedding& teacher, const Embedding& student) {
  require(teacher.dim() == student.dim(), ErrorCode::kShapeMismatch,
          "distill_distance: dim " + std::to_string(teacher.dim()) + " vs " + std::to_string(student.dim()));
  return numerics::cosine_distance(teacher.values(), student.values());
}

}  // namespace latentsearch::adapter
