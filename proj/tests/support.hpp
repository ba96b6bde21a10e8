#pragma once

// Shared fixtures: scratch directories, synthetic images, random tensors.

#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "image_io.hpp"
#include "numerics.hpp"
#include "rng.hpp"

namespace testsupport {

namespace fs = std::filesystem;
using latentsearch::Rng;
using latentsearch::image_io::RgbImage;
using latentsearch::numerics::Shape;
using latentsearch::numerics::Tensor;

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "lstest-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) std::abort();
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  fs::path path_;
};

inline Tensor random_tensor(Shape s, Rng& rng, float lo = -1.0f, float hi = 1.0f) {
  Tensor t(s);
  for (float& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

inline std::vector<float> random_vector(std::size_t n, Rng& rng, float lo = -1.0f, float hi = 1.0f) {
  std::vector<float> v(n);
  for (float& x : v) x = rng.uniform(lo, hi);
  return v;
}

enum class Pattern { kNoise, kFlat, kGradient, kSine, kChecker, kBlobs };
inline constexpr Pattern kAllPatterns[] = {Pattern::kNoise, Pattern::kFlat, Pattern::kGradient,
                                           Pattern::kSine, Pattern::kChecker, Pattern::kBlobs};

/// Deterministic synthetic RGB image; seed varies colours, frequencies, phases.
inline RgbImage make_image(Pattern p, int w, int h, uint64_t seed) {
  Rng rng(seed * 7919 + static_cast<uint64_t>(p));
  RgbImage im{w, h, std::vector<uint8_t>(static_cast<std::size_t>(w) * h * 3)};
  float base[3], fx[3], fy[3], ph[3];
  for (int c = 0; c < 3; ++c) {
    base[c] = rng.uniform(0.0f, 255.0f);
    fx[c] = rng.uniform(0.02f, 0.4f);
    fy[c] = rng.uniform(0.02f, 0.4f);
    ph[c] = rng.uniform(0.0f, 6.28f);
  }
  const int cell = 4 + static_cast<int>(rng.below(20));
  struct Blob { float x, y, r; float col[3]; };
  std::vector<Blob> blobs(3 + rng.below(5));
  for (auto& b : blobs) {
    b.x = rng.uniform(0.0f, static_cast<float>(w));
    b.y = rng.uniform(0.0f, static_cast<float>(h));
    b.r = rng.uniform(6.0f, 30.0f);
    for (float& c : b.col) c = rng.uniform(0.0f, 255.0f);
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        float v = 0.0f;
        switch (p) {
          case Pattern::kNoise: v = static_cast<float>(rng.below(256)); break;
          case Pattern::kFlat: v = base[c]; break;
          case Pattern::kGradient: v = base[c] * (1.0f - static_cast<float>(x) / w) + 255.0f * y / h * 0.5f; break;
          case Pattern::kSine: v = 127.5f + 127.5f * std::sin(fx[c] * x + fy[c] * y + ph[c]); break;
          case Pattern::kChecker: v = ((x / cell + y / cell) % 2) ? base[c] : 255.0f - base[c]; break;
          case Pattern::kBlobs:
            v = base[c] * 0.3f;
            for (const auto& b : blobs) {
              if ((x - b.x) * (x - b.x) + (y - b.y) * (y - b.y) < b.r * b.r) v = b.col[c];
            }
            break;
        }
        im.pixels[(static_cast<std::size_t>(y) * w + x) * 3 + c] =
            static_cast<uint8_t>(std::lround(std::fmin(255.0f, std::fmax(0.0f, v))));
      }
    }
  }
  return im;
}

inline RgbImage flat_image(int w, int h, uint8_t r, uint8_t g, uint8_t b) {
  RgbImage im{w, h, {}};
  for (int i = 0; i < w * h; ++i) {
    im.pixels.push_back(r);
    im.pixels.push_back(g);
    im.pixels.push_back(b);
  }
  return im;
}

}  // namespace testsupport

#include "weights.hpp"

namespace testsupport {

/// Narrow model for fast unit tests.
inline latentsearch::weights::ModelConfig small_config() {
  latentsearch::weights::ModelConfig c;
  c.n_ch = 8;
  c.m_ch = 12;
  c.hz_ch = 8;
  c.embed_dim = 32;
  c.adapter_ch = 8;
  c.fusion_hidden = 32;
  return c;
}

}  // namespace testsupport

#include <optional>

#include "error.hpp"

namespace testsupport {

/// Code of the latentsearch::Error thrown by f, or nullopt if none is.
template <class F>
std::optional<latentsearch::ErrorCode> error_code(F&& f) {
  try {
    f();
  } catch (const latentsearch::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

/// Unit vector with N(0, 1) coordinates before normalisation.
inline std::vector<float> random_unit(std::size_t dim, Rng& rng) {
  std::vector<float> v(dim);
  double ss = 0.0;
  for (float& x : v) {
    x = static_cast<float>(rng.normal());
    ss += static_cast<double>(x) * x;
  }
  const double inv = 1.0 / std::sqrt(ss);
  for (float& x : v) x = static_cast<float>(x * inv);
  return v;
}

}  // namespace testsupport
