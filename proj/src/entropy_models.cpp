#include "entropy_models.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "error.hpp"

namespace latentsearch::codec {

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double bits_for(const QuantizedCdf& cdf, int32_t value) {
  return -std::log2(static_cast<double>(cdf.freq(value - cdf.offset)) / static_cast<double>(kCdfTotal));
}

int32_t to_symbol(float v) {
  require(std::isfinite(v) && std::fabs(v) <= numerics::kMaxQuantizeMagnitude && v == std::round(v),
          ErrorCode::kOutOfRange, "latent value " + std::to_string(v) + " is not an in-range integer");
  return static_cast<int32_t>(v);
}

int32_t mean_offset(float mu) {
  require(std::isfinite(mu) && std::fabs(mu) <= numerics::kMaxQuantizeMagnitude, ErrorCode::kOutOfRange,
          "entropy-model mean out of range");
  return static_cast<int32_t>(std::round(mu));
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!(a.shape() == b.shape())) {
    fail(ErrorCode::kShapeMismatch, std::string(what) + ": " + a.shape().str() + " vs " + b.shape().str());
  }
}

}  // namespace

FactorizedPrior::FactorizedPrior(std::vector<QuantizedCdf> channels) : cdfs_(std::move(channels)) {
  require(!cdfs_.empty(), ErrorCode::kInvalidArgument, "factorized prior needs at least one channel");
  for (const auto& cdf : cdfs_) cdf.validate();
}

FactorizedPrior FactorizedPrior::logistic(std::span<const double> scales, int32_t min_symbol, int32_t max_symbol) {
  require(max_symbol >= min_symbol, ErrorCode::kInvalidArgument, "empty factorized symbol range");
  std::vector<QuantizedCdf> cdfs;
  const auto sigmoid = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  for (double s : scales) {
    require(s > 0.0, ErrorCode::kInvalidArgument, "logistic scale must be positive");
    std::vector<double> w;
    for (int32_t v = min_symbol; v <= max_symbol; ++v) {
      const double hi = v == max_symbol ? 1.0 : sigmoid((v + 0.5) / s);
      const double lo = v == min_symbol ? 0.0 : sigmoid((v - 0.5) / s);
      w.push_back(std::max(hi - lo, 0.0));
    }
    cdfs.push_back(QuantizedCdf::from_weights(w, min_symbol));
  }
  return FactorizedPrior(std::move(cdfs));
}

void FactorizedPrior::check_shape(const numerics::Shape& shape) const {
  require(shape.n == 1 && shape.c == channels(), ErrorCode::kShapeMismatch,
          "hyper-latent shape " + shape.str() + " does not match prior with " + std::to_string(channels()) +
              " channels");
}

std::vector<uint8_t> FactorizedPrior::encode(const Tensor& z_hat) const {
  check_shape(z_hat.shape());
  const std::size_t plane = static_cast<std::size_t>(z_hat.shape().h) * z_hat.shape().w;
  RangeEncoder enc;
  const auto data = z_hat.data();
  for (std::size_t i = 0; i < data.size(); ++i) enc.encode_symbol(cdfs_[i / plane], to_symbol(data[i]));
  return enc.finish();
}

Tensor FactorizedPrior::decode(std::span<const uint8_t> bytes, numerics::Shape shape) const {
  check_shape(shape);
  const std::size_t plane = static_cast<std::size_t>(shape.h) * shape.w;
  Tensor out(shape);
  RangeDecoder dec(bytes);
  auto data = out.data();
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<float>(dec.decode_symbol(cdfs_[i / plane]));
  dec.finish();
  return out;
}

double FactorizedPrior::estimate_bits(const Tensor& z_hat) const {
  check_shape(z_hat.shape());
  const std::size_t plane = static_cast<std::size_t>(z_hat.shape().h) * z_hat.shape().w;
  double bits = 0.0;
  const auto data = z_hat.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const QuantizedCdf& cdf = cdfs_[i / plane];
    const int32_t v = to_symbol(data[i]);
    if (v < cdf.min_symbol() || v > cdf.max_symbol()) {
      fail(ErrorCode::kOutOfRange, "hyper-latent symbol " + std::to_string(v) + " outside prior range");
    }
    bits += bits_for(cdf, v);
  }
  return bits;
}

std::vector<float> GaussianConditional::default_scale_table() {
  std::vector<float> scales(kDefaultLevels);
  const double lo = std::log(kDefaultMinScale);
  const double hi = std::log(kDefaultMaxScale);
  for (int i = 0; i < kDefaultLevels; ++i) {
    scales[i] = static_cast<float>(std::exp(lo + (hi - lo) * i / (kDefaultLevels - 1)));
  }
  return scales;
}

GaussianConditional::GaussianConditional() : GaussianConditional(default_scale_table()) {}

GaussianConditional::GaussianConditional(std::vector<float> scale_table) : scales_(std::move(scale_table)) {
  require(!scales_.empty(), ErrorCode::kInvalidArgument, "empty scale table");
  for (std::size_t i = 0; i < scales_.size(); ++i) {
    require(std::isfinite(scales_[i]) && scales_[i] > 0.0f, ErrorCode::kInvalidArgument, "scale table entry must be positive");
    require(i == 0 || scales_[i] > scales_[i - 1], ErrorCode::kInvalidArgument, "scale table must be increasing");
  }
  cdfs_.reserve(scales_.size());
  for (float s : scales_) {
    std::vector<double> w;
    w.reserve(kMaxSymbol - kMinSymbol + 1);
    for (int32_t d = kMinSymbol; d <= kMaxSymbol; ++d) {
      const double hi = d == kMaxSymbol ? 1.0 : normal_cdf((d + 0.5) / s);
      const double lo = d == kMinSymbol ? 0.0 : normal_cdf((d - 0.5) / s);
      w.push_back(std::max(hi - lo, 0.0));
    }
    cdfs_.push_back(QuantizedCdf::from_weights(w, kMinSymbol));
  }
}

int GaussianConditional::level_for(float sigma) const {
  const float s = std::clamp(std::max(sigma, kSigmaFloor), scales_.front(), scales_.back());
  const auto it = std::lower_bound(scales_.begin(), scales_.end(), s);
  return static_cast<int>(it - scales_.begin());
}

std::vector<uint8_t> GaussianConditional::encode(const Tensor& y_hat, const Tensor& mu, const Tensor& sigma) const {
  check_same_shape(y_hat, mu, "gaussian encode");
  check_same_shape(y_hat, sigma, "gaussian encode");
  RangeEncoder enc;
  const auto y = y_hat.data();
  const auto m = mu.data();
  const auto s = sigma.data();
  for (std::size_t i = 0; i < y.size(); ++i) {
    const int32_t d = to_symbol(y[i]) - mean_offset(m[i]);
    if (d < kMinSymbol || d > kMaxSymbol) {
      fail(ErrorCode::kOutOfRange, "latent symbol " + std::to_string(d) + " (mean-centered) outside [-127, 128]");
    }
    enc.encode_symbol(cdfs_[level_for(s[i])], d);
  }
  return enc.finish();
}

Tensor GaussianConditional::decode(std::span<const uint8_t> bytes, const Tensor& mu, const Tensor& sigma) const {
  check_same_shape(mu, sigma, "gaussian decode");
  Tensor out(mu.shape());
  RangeDecoder dec(bytes);
  auto y = out.data();
  const auto m = mu.data();
  const auto s = sigma.data();
  for (std::size_t i = 0; i < y.size(); ++i) {
    const int32_t d = dec.decode_symbol(cdfs_[level_for(s[i])]);
    y[i] = static_cast<float>(d + mean_offset(m[i]));
  }
  dec.finish();
  return out;
}

double GaussianConditional::estimate_bits(const Tensor& y_hat, const Tensor& mu, const Tensor& sigma) const {
  check_same_shape(y_hat, mu, "gaussian rate");
  check_same_shape(y_hat, sigma, "gaussian rate");
  double bits = 0.0;
  const auto y = y_hat.data();
  const auto m = mu.data();
  const auto s = sigma.data();
  for (std::size_t i = 0; i < y.size(); ++i) {
    const int32_t d = to_symbol(y[i]) - mean_offset(m[i]);
    if (d < kMinSymbol || d > kMaxSymbol) {
      fail(ErrorCode::kOutOfRange, "latent symbol " + std::to_string(d) + " (mean-centered) outside [-127, 128]");
    }
    bits += bits_for(cdfs_[level_for(s[i])], d);
  }
  return bits;
}

double estimate_rate(const Tensor& y_hat, const Tensor& z_hat, const Tensor& mu, const Tensor& sigma,
                     const GaussianConditional& gaussian, const FactorizedPrior& prior) {
  return gaussian.estimate_bits(y_hat, mu, sigma) + prior.estimate_bits(z_hat);
}

}  // namespace latentsearch::codec
