#include "numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "error.hpp"

namespace latentsearch::numerics {

std::string Shape::str() const {
  std::ostringstream os;
  os << n << "x" << c << "x" << h << "x" << w;
  return os.str();
}

Tensor::Tensor(Shape shape, float fill) : shape_(shape) {
  require(shape.n >= 1 && shape.c >= 1 && shape.h >= 1 && shape.w >= 1, ErrorCode::kShapeMismatch,
          "tensor extents must be >= 1, got " + shape.str());
  data_.assign(shape.elements(), fill);
}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(shape), data_(std::move(data)) {
  require(shape.n >= 1 && shape.c >= 1 && shape.h >= 1 && shape.w >= 1, ErrorCode::kShapeMismatch,
          "tensor extents must be >= 1, got " + shape.str());
  require(data_.size() == shape.elements(), ErrorCode::kShapeMismatch,
          "tensor data length " + std::to_string(data_.size()) + " does not match shape " + shape.str());
}

void ConvParams::validate() const {
  require(out_ch >= 1 && in_ch >= 1 && kernel >= 1 && stride >= 1 && padding >= 0,
          ErrorCode::kInvalidArgument, "invalid conv geometry");
  require(weights.size() == static_cast<std::size_t>(out_ch) * in_ch * kernel * kernel,
          ErrorCode::kShapeMismatch, "conv weight count does not match [out, in, k, k]");
  require(bias.size() == static_cast<std::size_t>(out_ch), ErrorCode::kShapeMismatch,
          "conv bias count does not match out channels");
}

void DeconvParams::validate() const {
  require(out_ch >= 1 && in_ch >= 1 && kernel >= 1 && stride >= 1 && padding >= 0 &&
              output_padding >= 0 && output_padding < stride,
          ErrorCode::kInvalidArgument, "invalid transposed conv geometry");
  require(weights.size() == static_cast<std::size_t>(out_ch) * in_ch * kernel * kernel,
          ErrorCode::kShapeMismatch, "deconv weight count does not match [in, out, k, k]");
  require(bias.size() == static_cast<std::size_t>(out_ch), ErrorCode::kShapeMismatch,
          "deconv bias count does not match out channels");
}

void LinearParams::validate() const {
  require(out_dim >= 1 && in_dim >= 1, ErrorCode::kInvalidArgument, "invalid linear geometry");
  require(weights.size() == static_cast<std::size_t>(out_dim) * in_dim, ErrorCode::kShapeMismatch,
          "linear weight count does not match [out, in]");
  require(bias.size() == static_cast<std::size_t>(out_dim), ErrorCode::kShapeMismatch,
          "linear bias count does not match out dim");
}

void require_finite(std::span<const float> values, const char* what) {
  for (float v : values) {
    if (!std::isfinite(v)) fail(ErrorCode::kInternal, std::string(what) + " produced a non-finite value");
  }
}

namespace {

// Smallest o with o*stride + offset >= 0 and largest o with o*stride + offset < extent,
// clipped to [0, out_extent).
std::pair<int, int> valid_range(int offset, int stride, int extent, int out_extent) {
  int lo = offset >= 0 ? 0 : (-offset + stride - 1) / stride;
  int hi_incl = (extent - 1 - offset) >= 0 ? (extent - 1 - offset) / stride : -1;
  hi_incl = std::min(hi_incl, out_extent - 1);
  return {lo, hi_incl + 1};
}

}  // namespace

Tensor conv2d(const Tensor& input, const ConvParams& p) {
  p.validate();
  const Shape& in = input.shape();
  if (in.c != p.in_ch) {
    fail(ErrorCode::kShapeMismatch, "conv2d: input shape " + in.str() + " incompatible with weights [" +
                                        std::to_string(p.out_ch) + "x" + std::to_string(p.in_ch) + "x" +
                                        std::to_string(p.kernel) + "x" + std::to_string(p.kernel) + "]");
  }
  const int span_h = in.h + 2 * p.padding - p.kernel;
  const int span_w = in.w + 2 * p.padding - p.kernel;
  require(span_h >= 0 && span_w >= 0, ErrorCode::kShapeMismatch,
          "conv2d: input " + in.str() + " smaller than kernel " + std::to_string(p.kernel));
  const int oh = span_h / p.stride + 1;
  const int ow = span_w / p.stride + 1;
  Tensor out({in.n, p.out_ch, oh, ow});

  const int k = p.kernel;
  const int s = p.stride;
  for (int n = 0; n < in.n; ++n) {
    for (int oc = 0; oc < p.out_ch; ++oc) {
      float* dst = out.plane(n, oc);
      std::fill(dst, dst + static_cast<std::size_t>(oh) * ow, p.bias[oc]);
      for (int ic = 0; ic < p.in_ch; ++ic) {
        const float* src = input.plane(n, ic);
        const float* wk = p.weights.data() + (static_cast<std::size_t>(oc) * p.in_ch + ic) * k * k;
        for (int ky = 0; ky < k; ++ky) {
          const auto [oy0, oy1] = valid_range(ky - p.padding, s, in.h, oh);
          for (int kx = 0; kx < k; ++kx) {
            const float wv = wk[ky * k + kx];
            if (wv == 0.0f) continue;
            const auto [ox0, ox1] = valid_range(kx - p.padding, s, in.w, ow);
            for (int oy = oy0; oy < oy1; ++oy) {
              const float* row = src + static_cast<std::size_t>(oy * s + ky - p.padding) * in.w;
              float* orow = dst + static_cast<std::size_t>(oy) * ow;
              const int ix0 = kx - p.padding;
              for (int ox = ox0; ox < ox1; ++ox) orow[ox] += wv * row[ox * s + ix0];
            }
          }
        }
      }
    }
  }
  require_finite(out.data(), "conv2d");
  return out;
}

Tensor conv_transpose2d(const Tensor& input, const DeconvParams& p) {
  p.validate();
  const Shape& in = input.shape();
  if (in.c != p.in_ch) {
    fail(ErrorCode::kShapeMismatch, "conv_transpose2d: input shape " + in.str() +
                                        " incompatible with weights [" + std::to_string(p.in_ch) + "x" +
                                        std::to_string(p.out_ch) + "x" + std::to_string(p.kernel) + "x" +
                                        std::to_string(p.kernel) + "]");
  }
  const int oh = (in.h - 1) * p.stride - 2 * p.padding + p.kernel + p.output_padding;
  const int ow = (in.w - 1) * p.stride - 2 * p.padding + p.kernel + p.output_padding;
  require(oh >= 1 && ow >= 1, ErrorCode::kShapeMismatch, "conv_transpose2d: empty output");
  Tensor out({in.n, p.out_ch, oh, ow});

  const int k = p.kernel;
  const int s = p.stride;
  for (int n = 0; n < in.n; ++n) {
    for (int oc = 0; oc < p.out_ch; ++oc) {
      float* dst = out.plane(n, oc);
      std::fill(dst, dst + static_cast<std::size_t>(oh) * ow, p.bias[oc]);
      for (int ic = 0; ic < p.in_ch; ++ic) {
        const float* src = input.plane(n, ic);
        const float* wk = p.weights.data() + (static_cast<std::size_t>(ic) * p.out_ch + oc) * k * k;
        for (int ky = 0; ky < k; ++ky) {
          // oy = iy * s - pad + ky must land in [0, oh)
          const auto [iy0, iy1] = valid_range(ky - p.padding, s, oh, in.h);
          for (int kx = 0; kx < k; ++kx) {
            const float wv = wk[ky * k + kx];
            if (wv == 0.0f) continue;
            const auto [ix0, ix1] = valid_range(kx - p.padding, s, ow, in.w);
            for (int iy = iy0; iy < iy1; ++iy) {
              const float* row = src + static_cast<std::size_t>(iy) * in.w;
              float* orow = dst + static_cast<std::size_t>(iy * s + ky - p.padding) * ow;
              const int off = kx - p.padding;
              for (int ix = ix0; ix < ix1; ++ix) orow[ix * s + off] += wv * row[ix];
            }
          }
        }
      }
    }
  }
  require_finite(out.data(), "conv_transpose2d");
  return out;
}

Tensor pointwise_linear(const Tensor& input, const LinearParams& p) {
  p.validate();
  const Shape& in = input.shape();
  if (in.c != p.in_dim) {
    fail(ErrorCode::kShapeMismatch, "pointwise_linear: input shape " + in.str() + " incompatible with weights [" +
                                        std::to_string(p.out_dim) + "x" + std::to_string(p.in_dim) + "]");
  }
  Tensor out({in.n, p.out_dim, in.h, in.w});
  const std::size_t plane = static_cast<std::size_t>(in.h) * in.w;
  for (int n = 0; n < in.n; ++n) {
    for (int o = 0; o < p.out_dim; ++o) {
      float* dst = out.plane(n, o);
      std::fill(dst, dst + plane, p.bias[o]);
      for (int i = 0; i < p.in_dim; ++i) {
        const float wv = p.weights[static_cast<std::size_t>(o) * p.in_dim + i];
        const float* src = input.plane(n, i);
        for (std::size_t j = 0; j < plane; ++j) dst[j] += wv * src[j];
      }
    }
  }
  require_finite(out.data(), "pointwise_linear");
  return out;
}

Tensor relu(Tensor input) {
  for (float& v : input.data()) v = v > 0.0f ? v : 0.0f;
  return input;
}

Tensor clamp(Tensor input, float lo, float hi) {
  for (float& v : input.data()) v = std::clamp(v, lo, hi);
  return input;
}

Tensor avg_pool2(const Tensor& input) {
  const Shape& in = input.shape();
  const int oh = (in.h + 1) / 2;
  const int ow = (in.w + 1) / 2;
  Tensor out({in.n, in.c, oh, ow});
  for (int n = 0; n < in.n; ++n) {
    for (int c = 0; c < in.c; ++c) {
      const float* src = input.plane(n, c);
      float* dst = out.plane(n, c);
      for (int oy = 0; oy < oh; ++oy) {
        const int y0 = 2 * oy;
        const int y1 = std::min(y0 + 1, in.h - 1);
        for (int ox = 0; ox < ow; ++ox) {
          const int x0 = 2 * ox;
          const int x1 = std::min(x0 + 1, in.w - 1);
          const float sum = src[y0 * in.w + x0] + src[y0 * in.w + x1] + src[y1 * in.w + x0] + src[y1 * in.w + x1];
          dst[oy * ow + ox] = sum * 0.25f;
        }
      }
    }
  }
  return out;
}

std::vector<float> global_avg_pool(const Tensor& input) {
  const Shape& in = input.shape();
  require(in.n == 1, ErrorCode::kShapeMismatch, "global_avg_pool expects batch 1, got " + in.str());
  const std::size_t plane = static_cast<std::size_t>(in.h) * in.w;
  std::vector<float> out(in.c);
  for (int c = 0; c < in.c; ++c) {
    const float* src = input.plane(0, c);
    double sum = 0.0;
    for (std::size_t j = 0; j < plane; ++j) sum += src[j];
    out[c] = static_cast<float>(sum / static_cast<double>(plane));
  }
  return out;
}

Tensor round_quantize(Tensor input) {
  for (float& v : input.data()) {
    require(std::isfinite(v), ErrorCode::kOutOfRange, "round_quantize: non-finite value");
    if (std::fabs(v) > kMaxQuantizeMagnitude) {
      fail(ErrorCode::kOutOfRange, "round_quantize: |" + std::to_string(v) + "| exceeds 2^20");
    }
    v = std::round(v);
  }
  return input;
}

Tensor concat_channels(std::span<const Tensor* const> parts) {
  require(!parts.empty(), ErrorCode::kInvalidArgument, "concat_channels: no inputs");
  Shape first = parts.front()->shape();
  int channels = 0;
  for (const Tensor* t : parts) {
    const Shape& s = t->shape();
    if (s.n != first.n || s.h != first.h || s.w != first.w) {
      fail(ErrorCode::kShapeMismatch, "concat_channels: " + s.str() + " vs " + first.str());
    }
    channels += s.c;
  }
  Tensor out({first.n, channels, first.h, first.w});
  const std::size_t plane = static_cast<std::size_t>(first.h) * first.w;
  for (int n = 0; n < first.n; ++n) {
    int c0 = 0;
    for (const Tensor* t : parts) {
      std::copy(t->plane(n, 0), t->plane(n, 0) + plane * t->shape().c, out.plane(n, c0));
      c0 += t->shape().c;
    }
  }
  return out;
}

double dot(std::span<const float> a, std::span<const float> b) {
  require(a.size() == b.size(), ErrorCode::kShapeMismatch,
          "dot: length " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return acc;
}

double l2_norm(std::span<const float> v) {
  double acc = 0.0;
  for (float x : v) acc += static_cast<double>(x) * static_cast<double>(x);
  return std::sqrt(acc);
}

double cosine_distance(std::span<const float> a, std::span<const float> b) {
  require(a.size() == b.size(), ErrorCode::kShapeMismatch,
          "cosine_distance: length " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  require(na > 0.0 && nb > 0.0, ErrorCode::kInvalidArgument, "cosine_distance: zero-norm input");
  const double d = 1.0 - dot(a, b) / (na * nb);
  return std::clamp(d, 0.0, 2.0);
}

std::vector<float> l2_normalize(std::span<const float> v) {
  const double norm = l2_norm(v);
  require(norm > 0.0 && std::isfinite(norm), ErrorCode::kInvalidArgument, "l2_normalize: zero vector");
  std::vector<float> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(static_cast<double>(v[i]) / norm);
  return out;
}

double mse(const Tensor& a, const Tensor& b) {
  if (!(a.shape() == b.shape())) {
    fail(ErrorCode::kShapeMismatch, "mse: " + a.shape().str() + " vs " + b.shape().str());
  }
  double acc = 0.0;
  const auto da = a.data();
  const auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    const double d = static_cast<double>(da[i]) - static_cast<double>(db[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(da.size());
}

double psnr(const Tensor& a, const Tensor& b, double peak) {
  require(peak > 0.0, ErrorCode::kInvalidArgument, "psnr: peak must be positive");
  const double err = mse(a, b);
  if (err == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / err);
}

}  // namespace latentsearch::numerics
