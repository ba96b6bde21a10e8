#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "numerics.hpp"
#include "range_coder.hpp"

namespace latentsearch::codec {

using numerics::Tensor;

/// Per-channel discrete prior for the hyper-latent z_hat.
class FactorizedPrior {
 public:
  FactorizedPrior() = default;
  explicit FactorizedPrior(std::vector<QuantizedCdf> channels);

  /// Discretized logistic per channel, mainly for generated weights and tests.
  static FactorizedPrior logistic(std::span<const double> scales, int32_t min_symbol, int32_t max_symbol);

  int channels() const { return static_cast<int>(cdfs_.size()); }
  const QuantizedCdf& cdf(int channel) const { return cdfs_.at(channel); }

  std::vector<uint8_t> encode(const Tensor& z_hat) const;
  Tensor decode(std::span<const uint8_t> bytes, numerics::Shape shape) const;
  double estimate_bits(const Tensor& z_hat) const;

 private:
  void check_shape(const numerics::Shape& shape) const;

  std::vector<QuantizedCdf> cdfs_;
};

/// Mean-scale Gaussian conditional for y_hat.
///
/// The coded symbol is d = y_hat - round(mu), looked up in the CDF of a
/// zero-mean discretized Gaussian whose scale is the first grid level >= sigma.
class GaussianConditional {
 public:
  static constexpr int32_t kMinSymbol = -127;
  static constexpr int32_t kMaxSymbol = 128;
  static constexpr int kDefaultLevels = 64;
  static constexpr double kDefaultMinScale = 0.11;
  static constexpr double kDefaultMaxScale = 256.0;
  static constexpr float kSigmaFloor = 1e-6f;

  GaussianConditional();
  explicit GaussianConditional(std::vector<float> scale_table);

  static std::vector<float> default_scale_table();

  std::span<const float> scale_table() const { return scales_; }
  const QuantizedCdf& level_cdf(int level) const { return cdfs_.at(level); }
  int level_for(float sigma) const;

  std::vector<uint8_t> encode(const Tensor& y_hat, const Tensor& mu, const Tensor& sigma) const;
  Tensor decode(std::span<const uint8_t> bytes, const Tensor& mu, const Tensor& sigma) const;
  double estimate_bits(const Tensor& y_hat, const Tensor& mu, const Tensor& sigma) const;

 private:
  std::vector<float> scales_;
  std::vector<QuantizedCdf> cdfs_;
};

/// Bits implied by the quantized CDFs for (y_hat | mu, sigma) plus z_hat.
double estimate_rate(const Tensor& y_hat, const Tensor& z_hat, const Tensor& mu, const Tensor& sigma,
                     const GaussianConditional& gaussian, const FactorizedPrior& prior);

}  // namespace latentsearch::codec
