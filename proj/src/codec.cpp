#include "codec.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "error.hpp"

namespace latentsearch::codec {

using numerics::clamp;
using numerics::conv2d;
using numerics::conv_transpose2d;
using numerics::relu;

void CodecWeights::validate() const {
  for (const auto& p : ga) p.validate();
  for (const auto& p : gs) p.validate();
  for (const auto& p : ha) p.validate();
  for (const auto& p : hs) p.validate();
  require(ga[0].in_ch == 3 && gs[3].out_ch == 3, ErrorCode::kShapeMismatch, "codec must map 3-channel images");
  for (int i = 1; i < 4; ++i) {
    require(ga[i].in_ch == ga[i - 1].out_ch && gs[i].in_ch == gs[i - 1].out_ch, ErrorCode::kShapeMismatch,
            "codec transform channel chain broken at stage " + std::to_string(i));
  }
  require(gs[0].in_ch == latent_channels() && ha[0].in_ch == latent_channels() && ha[1].in_ch == ha[0].out_ch,
          ErrorCode::kShapeMismatch, "latent channel counts disagree");
  require(hs[0].in_ch == hyper_channels() && hs[1].in_ch == hs[0].out_ch && hs[1].out_ch == 2 * latent_channels(),
          ErrorCode::kShapeMismatch, "hyper-synthesis must emit 2 channels per latent channel");
  for (const auto& p : ga) require(p.stride == 2, ErrorCode::kInvalidArgument, "analysis stages must be stride 2");
  for (const auto& p : ha) require(p.stride == 2, ErrorCode::kInvalidArgument, "hyper-analysis stages must be stride 2");
  for (const auto& p : gs) require(p.stride == 2, ErrorCode::kInvalidArgument, "synthesis stages must be stride 2");
  for (const auto& p : hs) require(p.stride == 2, ErrorCode::kInvalidArgument, "hyper-synthesis stages must be stride 2");
}

Tensor analyze(const Tensor& image, const CodecWeights& w) {
  const Shape& s = image.shape();
  require(s.n == 1 && s.c == 3, ErrorCode::kShapeMismatch, "analyze expects a 1x3xHxW image, got " + s.str());
  require(s.h % kPadMultiple == 0 && s.w % kPadMultiple == 0, ErrorCode::kInvalidArgument,
          "analyze expects extents padded to multiples of 64, got " + s.str());
  Tensor t = relu(conv2d(image, w.ga[0]));
  t = relu(conv2d(t, w.ga[1]));
  t = relu(conv2d(t, w.ga[2]));
  return conv2d(t, w.ga[3]);
}

Tensor synthesize(const Tensor& y_hat, const CodecWeights& w) {
  const Shape& s = y_hat.shape();
  require(s.n == 1 && s.c == w.latent_channels(), ErrorCode::kShapeMismatch,
          "synthesize expects " + std::to_string(w.latent_channels()) + " latent channels, got " + s.str());
  Tensor t = relu(conv_transpose2d(y_hat, w.gs[0]));
  t = relu(conv_transpose2d(t, w.gs[1]));
  t = relu(conv_transpose2d(t, w.gs[2]));
  return clamp(conv_transpose2d(t, w.gs[3]), 0.0f, 1.0f);
}

std::pair<Tensor, Tensor> hyper_synthesis(const Tensor& z_hat, const CodecWeights& w) {
  const Tensor params = conv_transpose2d(relu(conv_transpose2d(z_hat, w.hs[0])), w.hs[1]);
  const Shape& ps = params.shape();
  const int m = w.latent_channels();
  const Shape half{1, m, ps.h, ps.w};
  const std::size_t n = half.elements();
  const auto src = params.data();
  std::vector<float> mu(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(n));
  std::vector<float> sigma(n);
  for (std::size_t i = 0; i < n; ++i) sigma[i] = std::max(std::fabs(src[n + i]), GaussianConditional::kSigmaFloor);
  return {Tensor(half, std::move(mu)), Tensor(half, std::move(sigma))};
}

HyperOutput hyper_path(const Tensor& y, const CodecWeights& w) {
  const Shape& s = y.shape();
  require(s.n == 1 && s.c == w.latent_channels(), ErrorCode::kShapeMismatch,
          "hyper_path expects " + std::to_string(w.latent_channels()) + " latent channels, got " + s.str());
  require(s.h % 4 == 0 && s.w % 4 == 0, ErrorCode::kShapeMismatch, "hyper_path expects latent extents divisible by 4");
  Tensor z = conv2d(relu(conv2d(y, w.ha[0])), w.ha[1]);
  HyperOutput out;
  out.z_hat = numerics::round_quantize(std::move(z));
  auto [mu, sigma] = hyper_synthesis(out.z_hat, w);
  out.mu = std::move(mu);
  out.sigma = std::move(sigma);
  return out;
}

Tensor pad_to_multiple(const Tensor& image, int multiple) {
  const Shape& s = image.shape();
  const int ph = (s.h + multiple - 1) / multiple * multiple;
  const int pw = (s.w + multiple - 1) / multiple * multiple;
  if (ph == s.h && pw == s.w) return image;
  Tensor out({s.n, s.c, ph, pw});
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const float* src = image.plane(n, c);
      float* dst = out.plane(n, c);
      for (int y = 0; y < ph; ++y) {
        const float* row = src + static_cast<std::size_t>(std::min(y, s.h - 1)) * s.w;
        float* orow = dst + static_cast<std::size_t>(y) * pw;
        std::copy(row, row + s.w, orow);
        std::fill(orow + s.w, orow + pw, row[s.w - 1]);
      }
    }
  }
  return out;
}

Tensor crop(const Tensor& image, int height, int width) {
  const Shape& s = image.shape();
  require(height >= 1 && width >= 1 && height <= s.h && width <= s.w, ErrorCode::kShapeMismatch,
          "crop " + std::to_string(height) + "x" + std::to_string(width) + " exceeds " + s.str());
  if (height == s.h && width == s.w) return image;
  Tensor out({s.n, s.c, height, width});
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const float* src = image.plane(n, c);
      float* dst = out.plane(n, c);
      for (int y = 0; y < height; ++y) {
        std::copy(src + static_cast<std::size_t>(y) * s.w, src + static_cast<std::size_t>(y) * s.w + width,
                  dst + static_cast<std::size_t>(y) * width);
      }
    }
  }
  return out;
}

ImageCodec::ImageCodec(CodecWeights weights, EntropyPriors priors, uint8_t model_id)
    : weights_(std::move(weights)), priors_(std::move(priors)), model_id_(model_id) {
  weights_.validate();
  require(priors_.factorized.channels() == weights_.hyper_channels(), ErrorCode::kShapeMismatch,
          "factorized prior channel count does not match hyper-latent channels");
}

EncodeResult ImageCodec::encode(const Tensor& image) const {
  const Shape& s = image.shape();
  require(s.n == 1 && s.c == 3, ErrorCode::kShapeMismatch, "encode expects a 1x3xHxW image, got " + s.str());
  if (s.h > kMaxImageSide || s.w > kMaxImageSide) {
    fail(ErrorCode::kOutOfRange, "image " + s.str() + " exceeds the maximum side of " + std::to_string(kMaxImageSide));
  }
  const Tensor padded = pad_to_multiple(image);
  const Tensor y = analyze(padded, weights_);
  HyperOutput hyper = hyper_path(y, weights_);

  EncodeResult out;
  out.y_hat = numerics::round_quantize(y);
  out.bitstream.header.model_id = model_id_;
  out.bitstream.header.orig_width = static_cast<uint16_t>(s.w);
  out.bitstream.header.orig_height = static_cast<uint16_t>(s.h);
  out.bitstream.header.pad_width = static_cast<uint16_t>(padded.shape().w);
  out.bitstream.header.pad_height = static_cast<uint16_t>(padded.shape().h);
  out.bitstream.z_payload = priors_.factorized.encode(hyper.z_hat);
  out.bitstream.y_payload = priors_.gaussian.encode(out.y_hat, hyper.mu, hyper.sigma);

  out.reconstruction = crop(synthesize(out.y_hat, weights_), s.h, s.w);
  out.stats.bpp = 8.0 * static_cast<double>(out.bitstream.payload_bytes()) / (static_cast<double>(s.w) * s.h);
  out.stats.psnr = numerics::psnr(image, out.reconstruction, 1.0);
  out.stats.estimated_bits =
      estimate_rate(out.y_hat, hyper.z_hat, hyper.mu, hyper.sigma, priors_.gaussian, priors_.factorized);
  return out;
}

DecodeResult ImageCodec::decode(std::span<const uint8_t> bitstream) const { return decode(parse_bitstream(bitstream)); }

DecodeResult ImageCodec::decode(const Bitstream& bs) const {
  const BitstreamHeader& h = bs.header;
  if (h.model_id != model_id_) {
    fail(ErrorCode::kModelMismatch, "bitstream model id " + std::to_string(h.model_id) + " does not match loaded model " +
                                        std::to_string(model_id_));
  }
  const Shape z_shape{1, weights_.hyper_channels(), h.pad_height / kHyperStride, h.pad_width / kHyperStride};
  const Tensor z_hat = priors_.factorized.decode(bs.z_payload, z_shape);
  auto [mu, sigma] = hyper_synthesis(z_hat, weights_);
  DecodeResult out;
  out.y_hat = priors_.gaussian.decode(bs.y_payload, mu, sigma);
  out.reconstruction = crop(synthesize(out.y_hat, weights_), h.orig_height, h.orig_width);
  return out;
}

}  // namespace latentsearch::codec
