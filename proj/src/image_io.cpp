#include "image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "error.hpp"

namespace latentsearch::image_io {

namespace {

constexpr uint8_t kPngSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

bool is_png(std::span<const uint8_t> bytes) {
  return bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSignature, 8) == 0;
}

RgbImage decode_png(std::span<const uint8_t> bytes) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    fail(ErrorCode::kImageDecode, std::string("png: ") + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  RgbImage out;
  out.width = static_cast<int>(image.width);
  out.height = static_cast<int>(image.height);
  out.pixels.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    fail(ErrorCode::kImageDecode, "png: " + msg);
  }
  return out;
}

// Netpbm header token; '#' comments run to end of line.
class PpmHeader {
 public:
  explicit PpmHeader(std::span<const uint8_t> bytes) : bytes_(bytes) {}

  long number() {
    skip_space();
    require(pos_ < bytes_.size() && std::isdigit(bytes_[pos_]), ErrorCode::kImageDecode,
            "ppm: malformed header");
    long v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_++] - '0');
      require(v <= 1'000'000, ErrorCode::kImageDecode, "ppm: header value too large");
    }
    return v;
  }
  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_start() {
    require(pos_ < bytes_.size() && std::isspace(bytes_[pos_]), ErrorCode::kImageDecode,
            "ppm: malformed header");
    return pos_ + 1;
  }

 private:
  void skip_space() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const uint8_t> bytes_;
  std::size_t pos_ = 2;
};

RgbImage decode_ppm(std::span<const uint8_t> bytes) {
  PpmHeader header(bytes);
  const long w = header.number();
  const long h = header.number();
  const long maxval = header.number();
  require(w >= 1 && h >= 1, ErrorCode::kImageDecode, "ppm: empty image");
  require(maxval >= 1 && maxval <= 255, ErrorCode::kImageDecode,
          "ppm: maxval " + std::to_string(maxval) + " unsupported (1..255)");
  const std::size_t start = header.raster_start();
  const std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3;
  require(bytes.size() >= start && bytes.size() - start >= need, ErrorCode::kImageDecode,
          "ppm: raster truncated");
  RgbImage out;
  out.width = static_cast<int>(w);
  out.height = static_cast<int>(h);
  out.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(start),
                    bytes.begin() + static_cast<std::ptrdiff_t>(start + need));
  if (maxval != 255) {
    for (auto& p : out.pixels) {
      require(p <= maxval, ErrorCode::kImageDecode, "ppm: sample exceeds maxval");
      p = static_cast<uint8_t>((p * 255 + maxval / 2) / maxval);
    }
  }
  return out;
}

void check_image(const RgbImage& image) {
  require(image.width >= 1 && image.height >= 1, ErrorCode::kInvalidArgument, "image has no pixels");
  require(image.pixels.size() == static_cast<std::size_t>(image.width) * image.height * 3,
          ErrorCode::kInvalidArgument, "pixel buffer does not match dimensions");
}

}  // namespace

RgbImage decode_image(std::span<const uint8_t> bytes) {
  if (is_png(bytes)) return decode_png(bytes);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') return decode_ppm(bytes);
  fail(ErrorCode::kImageDecode, "unrecognized image format (expected PNG or binary PPM)");
}

RgbImage read_image(const std::filesystem::path& path) {
  try {
    return decode_image(read_file(path));
  } catch (const Error& e) {
    fail(e.code(), path.string() + ": " + e.what());
  }
}

std::vector<uint8_t> encode_png(const RgbImage& image) {
  check_image(image);
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png, nullptr, &size, 0, image.pixels.data(), 0, nullptr)) {
    fail(ErrorCode::kInternal, std::string("png encode: ") + png.message);
  }
  std::vector<uint8_t> out(size);
  if (!png_image_write_to_memory(&png, out.data(), &size, 0, image.pixels.data(), 0, nullptr)) {
    fail(ErrorCode::kInternal, std::string("png encode: ") + png.message);
  }
  out.resize(size);
  return out;
}

std::vector<uint8_t> encode_ppm(const RgbImage& image) {
  check_image(image);
  const std::string header =
      "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  std::vector<uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.pixels.begin(), image.pixels.end());
  return out;
}

numerics::Tensor to_tensor(const RgbImage& image) {
  check_image(image);
  numerics::Tensor t({1, 3, image.height, image.width});
  const std::size_t plane = static_cast<std::size_t>(image.width) * image.height;
  float* d = t.data().data();
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t c = 0; c < 3; ++c) d[c * plane + i] = static_cast<float>(image.pixels[i * 3 + c]) / 255.0f;
  }
  return t;
}

RgbImage from_tensor(const numerics::Tensor& tensor) {
  const auto s = tensor.shape();
  require(s.n == 1 && s.c == 3, ErrorCode::kShapeMismatch, "expected [1, 3, H, W], got " + s.str());
  RgbImage out;
  out.width = s.w;
  out.height = s.h;
  const std::size_t plane = static_cast<std::size_t>(s.w) * s.h;
  out.pixels.resize(plane * 3);
  const float* d = tensor.data().data();
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      const float v = std::clamp(d[c * plane + i], 0.0f, 1.0f);
      out.pixels[i * 3 + c] = static_cast<uint8_t>(std::lround(v * 255.0f));
    }
  }
  return out;
}

std::vector<uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  require(!in.bad(), ErrorCode::kIo, "read failed: " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  require(static_cast<bool>(out), ErrorCode::kIo, "write failed: " + path.string());
}

}  // namespace latentsearch::image_io
