#pragma once

// Image buffers and 8-bit PNG / binary PPM (P6, plus P5 for single-channel) I/O.

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "simpleir/data/files.hpp"
#include "simpleir/numerics/tensor.hpp"

namespace simpleir {

/// Interleaved (row, column, channel) values in [0, 1].
struct ImageBuffer {
  std::size_t h = 0;
  std::size_t w = 0;
  std::size_t channels = 3;
  std::vector<double> values;

  ImageBuffer() = default;
  ImageBuffer(std::size_t h_, std::size_t w_, std::size_t channels_, double fill = 0.0)
      : h(h_), w(w_), channels(channels_), values(h_ * w_ * channels_, fill) {
    validate();
  }

  void validate() const {
    if (h == 0 || w == 0) throw DimensionError("image dimensions must be positive");
    if (channels != 1 && channels != 3) {
      throw DimensionError("image must have 1 or 3 channels, got " + std::to_string(channels));
    }
    if (values.size() != h * w * channels) throw DimensionError("image buffer size does not match dimensions");
  }

  double& at(std::size_t y, std::size_t x, std::size_t c) { return values[(y * w + x) * channels + c]; }
  double at(std::size_t y, std::size_t x, std::size_t c) const { return values[(y * w + x) * channels + c]; }

  bool operator==(const ImageBuffer&) const = default;
};

inline std::uint8_t quantize8(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

inline ImageBuffer from_bytes(std::size_t h, std::size_t w, std::size_t channels, const std::uint8_t* bytes) {
  ImageBuffer img(h, w, channels);
  for (std::size_t i = 0; i < img.values.size(); ++i) img.values[i] = bytes[i] / 255.0;
  return img;
}

inline std::vector<std::uint8_t> to_bytes(const ImageBuffer& img) {
  std::vector<std::uint8_t> out(img.values.size());
  std::transform(img.values.begin(), img.values.end(), out.begin(), quantize8);
  return out;
}

/// Rounds every value to the nearest 8-bit level (what a save/load cycle would produce).
inline ImageBuffer quantized(const ImageBuffer& img) {
  ImageBuffer q = img;
  for (double& v : q.values) v = quantize8(v) / 255.0;
  return q;
}

/// (1, 3, h, w) tensor; single-channel images are replicated over three channels.
inline Tensor to_tensor(const ImageBuffer& img) {
  img.validate();
  Tensor t({1, 3, img.h, img.w});
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < img.h; ++y)
      for (std::size_t x = 0; x < img.w; ++x) t.at(0, c, y, x) = img.at(y, x, img.channels == 1 ? 0 : c);
  return t;
}

/// Clamps to [0, 1]; expects a (1, 3, h, w) tensor.
inline ImageBuffer from_tensor(const Tensor& t) {
  const Shape s = t.shape();
  if (s.n != 1 || s.c != 3) throw DimensionError("from_tensor: expected (1, 3, h, w), got " + s.str());
  ImageBuffer img(s.h, s.w, 3);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < s.h; ++y)
      for (std::size_t x = 0; x < s.w; ++x) img.at(y, x, c) = std::clamp(t.at(0, c, y, x), 0.0, 1.0);
  return img;
}

namespace detail {

inline ImageBuffer decode_png(const std::string& bytes, const std::string& name) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw FormatError("png '" + name + "': " + image.message);
  }
  if (image.format & PNG_FORMAT_FLAG_LINEAR) {
    png_image_free(&image);
    throw FormatError("png '" + name + "': 16-bit images are not supported");
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
    throw FormatError("png '" + name + "': " + image.message);
  }
  return from_bytes(image.height, image.width, color ? 3 : 1, pixels.data());
}

inline std::string encode_png(const ImageBuffer& img) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.w);
  image.height = static_cast<png_uint_32>(img.h);
  image.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const std::vector<std::uint8_t> pixels = to_bytes(img);
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels.data(), 0, nullptr)) {
    throw FormatError(std::string("png encode: ") + image.message);
  }
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels.data(), 0, nullptr)) {
    throw FormatError(std::string("png encode: ") + image.message);
  }
  out.resize(size);
  return out;
}

/// Binary PNM: P6 (rgb) or P5 (gray), maxval 255.
inline ImageBuffer decode_pnm(const std::string& bytes, const std::string& name) {
  std::size_t pos = 2;
  auto next_token = [&]() -> std::size_t {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) throw FormatError("ppm '" + name + "': malformed header");
    return std::stoul(bytes.substr(start, pos - start));
  };
  const std::size_t channels = bytes[1] == '6' ? 3 : 1;
  const std::size_t w = next_token();
  const std::size_t h = next_token();
  const std::size_t maxval = next_token();
  if (maxval != 255) throw FormatError("ppm '" + name + "': only maxval 255 is supported");
  if (w == 0 || h == 0) throw FormatError("ppm '" + name + "': empty image");
  ++pos;  // single whitespace before raster
  const std::size_t need = w * h * channels;
  if (bytes.size() < pos + need) throw FormatError("ppm '" + name + "': truncated raster");
  return from_bytes(h, w, channels, reinterpret_cast<const std::uint8_t*>(bytes.data() + pos));
}

inline std::string encode_pnm(const ImageBuffer& img) {
  std::string out = (img.channels == 3 ? "P6\n" : "P5\n") + std::to_string(img.w) + " " + std::to_string(img.h) +
                    "\n255\n";
  const std::vector<std::uint8_t> pixels = to_bytes(img);
  out.append(reinterpret_cast<const char*>(pixels.data()), pixels.size());
  return out;
}

}  // namespace detail

/// Format is detected from the file signature, not the extension.
inline ImageBuffer load_image(const fs::path& path) {
  const std::string bytes = read_file(path);
  static constexpr unsigned char png_sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), png_sig, 8) == 0) {
    return detail::decode_png(bytes, path.string());
  }
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '6' || bytes[1] == '5')) {
    return detail::decode_pnm(bytes, path.string());
  }
  throw FormatError("'" + path.string() + "': unsupported image format (8-bit PNG or binary PPM expected)");
}

inline std::string encode_image(const ImageBuffer& img, const fs::path& path) {
  img.validate();
  const std::string ext = path.extension().string();
  if (ext == ".png") return detail::encode_png(img);
  if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") return detail::encode_pnm(img);
  throw FormatError("'" + path.string() + "': unsupported output extension (use .png or .ppm)");
}

/// Chooses the encoder from the extension (.png, .ppm/.pgm/.pnm); values are clamped and
/// rounded to 8 bits.
inline void save_image(const ImageBuffer& img, const fs::path& path) {
  write_file_atomic(path, encode_image(img, path));
}

}  // namespace simpleir
