#pragma once

#include <png.h>

#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "fadkit/image.hpp"

namespace fadkit {

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace detail

// Writes an image as 8-bit grayscale PNG; intensities are quantized with
// round-to-nearest, so a save/load round trip stays within 1/255 per pixel.
inline void save_image(const Image& im, const std::filesystem::path& path) {
  if (im.height <= 0 || im.width <= 0) throw std::invalid_argument("empty image");
  std::error_code ec;
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path(), ec);
  detail::FilePtr fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) throw Error("cannot open for writing: " + path.string());

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("png write failed: " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(im.width),
               static_cast<png_uint_32>(im.height), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<std::uint8_t> row(static_cast<std::size_t>(im.width));
  for (int r = 0; r < im.height; ++r) {
    for (int c = 0; c < im.width; ++c) {
      const double v = clamp01(im.at(r, c));
      row[static_cast<std::size_t>(c)] =
          static_cast<std::uint8_t>(v * 255.0 + 0.5);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// Loads an 8-bit grayscale or 8-bit RGB PNG; RGB is averaged to one channel.
// Anything else (16-bit, palette, alpha) is rejected as a format error.
inline Image load_image(const std::filesystem::path& path) {
  detail::FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) throw Error("cannot open: " + path.string());

  png_byte header[8];
  if (std::fread(header, 1, 8, fp.get()) != 8 || png_sig_cmp(header, 0, 8))
    throw FormatError("not a PNG file: " + path.string());

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("corrupt PNG: " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);

  if (bit_depth != 8 ||
      (color_type != PNG_COLOR_TYPE_GRAY && color_type != PNG_COLOR_TYPE_RGB)) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("unsupported PNG format (need 8-bit gray or RGB): " +
                      path.string());
  }
  const int channels = (color_type == PNG_COLOR_TYPE_RGB) ? 3 : 1;

  Image im(static_cast<int>(h), static_cast<int>(w));
  std::vector<std::uint8_t> row(static_cast<std::size_t>(w) * channels);
  for (png_uint_32 r = 0; r < h; ++r) {
    png_read_row(png, row.data(), nullptr);
    for (png_uint_32 c = 0; c < w; ++c) {
      if (channels == 1) {
        im.at(static_cast<int>(r), static_cast<int>(c)) = row[c] / 255.0;
      } else {
        const int sum = row[c * 3] + row[c * 3 + 1] + row[c * 3 + 2];
        im.at(static_cast<int>(r), static_cast<int>(c)) = sum / (3.0 * 255.0);
      }
    }
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return im;
}

// Masks use the phantom PNG convention: positive = 255, negative = 0.
inline void save_mask(const AnomalyMask& m, const std::filesystem::path& path) {
  Image im(m.height, m.width);
  for (std::size_t i = 0; i < m.size(); ++i)
    im.pixels[i] = m.bits[i] ? 1.0 : 0.0;
  save_image(im, path);
}

inline AnomalyMask load_mask(const std::filesystem::path& path) {
  const Image im = load_image(path);
  AnomalyMask m(im.height, im.width);
  for (std::size_t i = 0; i < im.size(); ++i) {
    const double v = im.pixels[i];
    if (v != 0.0 && v != 1.0)
      throw FormatError("mask is not binary (0/255): " + path.string());
    m.bits[i] = v == 1.0 ? 1 : 0;
  }
  return m;
}

}  // namespace fadkit
