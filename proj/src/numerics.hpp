#pragma once

// Forward-pass tensor kernels shared by the codec and the adapter.
//
// Every kernel is a pure function of its arguments. Accumulation order is
// fixed so that identical inputs give bit-identical outputs run to run.

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace latentsearch::numerics {

struct Shape {
  int n = 1;
  int c = 1;
  int h = 1;
  int w = 1;

  std::size_t elements() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  std::string str() const;
  friend bool operator==(const Shape&, const Shape&) = default;
};

/// Dense row-major NCHW float tensor.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> data);

  const Shape& shape() const { return shape_; }
  std::span<const float> data() const { return data_; }
  std::span<float> data() { return data_; }
  std::size_t size() const { return data_.size(); }

  float& at(int n, int c, int h, int w) { return data_[index(n, c, h, w)]; }
  float at(int n, int c, int h, int w) const { return data_[index(n, c, h, w)]; }

  /// Pointer to the start of plane (n, c).
  const float* plane(int n, int c) const { return data_.data() + index(n, c, 0, 0); }
  float* plane(int n, int c) { return data_.data() + index(n, c, 0, 0); }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t index(int n, int c, int h, int w) const {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }

  Shape shape_{};
  std::vector<float> data_ = std::vector<float>(1, 0.0f);
};

struct ConvParams {
  int out_ch = 0;
  int in_ch = 0;
  int kernel = 3;
  int stride = 1;
  int padding = 0;
  std::vector<float> weights;  // [out_ch, in_ch, kernel, kernel]
  std::vector<float> bias;     // [out_ch]

  void validate() const;
};

/// Transposed convolution parameters. Weights are laid out [in_ch, out_ch, k, k].
struct DeconvParams {
  int out_ch = 0;
  int in_ch = 0;
  int kernel = 3;
  int stride = 2;
  int padding = 1;
  int output_padding = 1;
  std::vector<float> weights;
  std::vector<float> bias;

  void validate() const;
};

struct LinearParams {
  int out_dim = 0;
  int in_dim = 0;
  std::vector<float> weights;  // [out_dim, in_dim]
  std::vector<float> bias;     // [out_dim]

  void validate() const;
};

Tensor conv2d(const Tensor& input, const ConvParams& params);
Tensor conv_transpose2d(const Tensor& input, const DeconvParams& params);
/// Applies a LinearParams at every spatial position (a 1x1 convolution).
Tensor pointwise_linear(const Tensor& input, const LinearParams& params);

Tensor relu(Tensor input);
Tensor clamp(Tensor input, float lo, float hi);

/// 2x2 stride-2 mean pooling. Odd extents are edge-replicated, so the output
/// extent is ceil(extent / 2).
Tensor avg_pool2(const Tensor& input);

/// Mean over all spatial positions of each channel. Batch must be 1.
std::vector<float> global_avg_pool(const Tensor& input);

/// Largest magnitude accepted by round_quantize.
inline constexpr float kMaxQuantizeMagnitude = 1048576.0f;  // 2^20

/// Elementwise round half away from zero.
Tensor round_quantize(Tensor input);

/// Concatenate along channels; batch and spatial extents must match.
Tensor concat_channels(std::span<const Tensor* const> parts);

double cosine_distance(std::span<const float> a, std::span<const float> b);
double dot(std::span<const float> a, std::span<const float> b);
double l2_norm(std::span<const float> v);
std::vector<float> l2_normalize(std::span<const float> v);

/// 10 log10(peak^2 / MSE). Identical inputs give +infinity.
double psnr(const Tensor& a, const Tensor& b, double peak);
double mse(const Tensor& a, const Tensor& b);

/// Throws kInternal if any value is NaN or infinite.
void require_finite(std::span<const float> values, const char* what);

}  // namespace latentsearch::numerics
