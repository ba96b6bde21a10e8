#pragma once

// Learned image codec inference path: analysis / synthesis transforms, the
// hyperprior, and entropy coding of both latents into a LICB container.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "bitstream.hpp"
#include "entropy_models.hpp"
#include "numerics.hpp"

namespace latentsearch::codec {

using numerics::ConvParams;
using numerics::DeconvParams;
using numerics::Shape;
using numerics::Tensor;

/// Images are padded to multiples of this before analysis.
inline constexpr int kPadMultiple = 64;
inline constexpr int kLatentStride = 16;
inline constexpr int kHyperStride = 64;
/// Largest original extent whose padded extent still fits a u16 header field.
inline constexpr int kMaxImageSide = 65472;

struct CodecWeights {
  std::array<ConvParams, 4> ga;    // image -> y, each stride 2
  std::array<DeconvParams, 4> gs;  // y_hat -> image, each stride 2
  std::array<ConvParams, 2> ha;    // y -> z, each stride 2
  std::array<DeconvParams, 2> hs;  // z_hat -> (mu, sigma), each stride 2

  int latent_channels() const { return ga[3].out_ch; }
  int hyper_channels() const { return ha[1].out_ch; }
  void validate() const;
};

struct EntropyPriors {
  FactorizedPrior factorized;
  GaussianConditional gaussian;
};

struct HyperOutput {
  Tensor z_hat;
  Tensor mu;
  Tensor sigma;
};

struct EncodeStats {
  double bpp = 0.0;
  double psnr = 0.0;
  double estimated_bits = 0.0;
};

struct EncodeResult {
  Bitstream bitstream;
  EncodeStats stats;
  Tensor y_hat;
  Tensor reconstruction;  // cropped to original extents
};

struct DecodeResult {
  Tensor y_hat;
  Tensor reconstruction;  // cropped to original extents
};

Tensor analyze(const Tensor& image, const CodecWeights& w);
Tensor synthesize(const Tensor& y_hat, const CodecWeights& w);
/// Mean and scale for y_hat given z_hat; sigma is floored at 1e-6.
std::pair<Tensor, Tensor> hyper_synthesis(const Tensor& z_hat, const CodecWeights& w);
HyperOutput hyper_path(const Tensor& y, const CodecWeights& w);

/// Edge-replicates the right and bottom borders up to multiples of kPadMultiple.
Tensor pad_to_multiple(const Tensor& image, int multiple = kPadMultiple);
Tensor crop(const Tensor& image, int height, int width);

class ImageCodec {
 public:
  ImageCodec(CodecWeights weights, EntropyPriors priors, uint8_t model_id);

  const CodecWeights& weights() const { return weights_; }
  const EntropyPriors& priors() const { return priors_; }
  uint8_t model_id() const { return model_id_; }

  /// image is [1, 3, H, W] with values in [0, 1].
  EncodeResult encode(const Tensor& image) const;
  DecodeResult decode(std::span<const uint8_t> bitstream) const;
  DecodeResult decode(const Bitstream& bitstream) const;

 private:
  CodecWeights weights_;
  EntropyPriors priors_;
  uint8_t model_id_;
};

}  // namespace latentsearch::codec
