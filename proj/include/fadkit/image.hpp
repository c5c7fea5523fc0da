#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "fadkit/common.hpp"

namespace fadkit {

// Unconstrained H×W scalar field (similarity maps, noise fields, ...).
struct Field {
  int height = 0;
  int width = 0;
  std::vector<double> data;

  Field() = default;
  Field(int h, int w, double fill = 0.0)
      : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {}

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * width + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * width + c]; }
  std::size_t size() const { return data.size(); }
};

constexpr int kMinImageSide = 16;

// Single-channel image, intensities in [0, 1]. Channel replication to 3
// channels happens only at the encoder boundary.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(int h, int w, double fill = 0.0)
      : height(h), width(w), pixels(static_cast<std::size_t>(h) * w, fill) {}

  double& at(int r, int c) { return pixels[static_cast<std::size_t>(r) * width + c]; }
  double at(int r, int c) const { return pixels[static_cast<std::size_t>(r) * width + c]; }
  std::size_t size() const { return pixels.size(); }
};

inline void validate_image(const Image& im) {
  if (im.height < kMinImageSide || im.width < kMinImageSide)
    throw std::invalid_argument("image sides must be >= 16");
  for (double v : im.pixels)
    if (!std::isfinite(v) || v < 0.0 || v > 1.0)
      throw std::invalid_argument("image intensities must be finite and in [0,1]");
}

enum class MaskKind { perlin, ellipse, rectangle };

struct ShapeMeta {
  MaskKind kind = MaskKind::ellipse;
  // Center in real (row, col) coordinates.
  double center_row = 0.0;
  double center_col = 0.0;
  double rotation = 0.0;  // radians; shape x-axis lies along image rows at 0
  // Semi-axes (ellipse) or half-extents (rectangle): ax1 along the shape
  // x-axis, ax2 along the shape y-axis.
  double ax1 = 0.0;
  double ax2 = 0.0;
};

// Binary anomaly-region mask. Parametric masks carry the shape metadata that
// generated them; free-form (perlin) masks do not.
struct AnomalyMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> bits;
  std::optional<ShapeMeta> shape;

  AnomalyMask() = default;
  AnomalyMask(int h, int w)
      : height(h), width(w), bits(static_cast<std::size_t>(h) * w, 0) {}

  std::uint8_t& at(int r, int c) { return bits[static_cast<std::size_t>(r) * width + c]; }
  std::uint8_t at(int r, int c) const { return bits[static_cast<std::size_t>(r) * width + c]; }
  std::size_t size() const { return bits.size(); }

  std::size_t positive_count() const {
    std::size_t n = 0;
    for (auto b : bits) n += b;
    return n;
  }
  double area_fraction() const {
    return bits.empty() ? 0.0
                        : static_cast<double>(positive_count()) /
                              static_cast<double>(bits.size());
  }
  bool empty_mask() const { return positive_count() == 0; }
};

struct BBox {
  int r0 = 0, c0 = 0, r1 = 0, c1 = 0;  // inclusive
  int rows() const { return r1 - r0 + 1; }
  int cols() const { return c1 - c0 + 1; }
};

inline std::optional<BBox> mask_bbox(const AnomalyMask& m) {
  BBox b{m.height, m.width, -1, -1};
  for (int r = 0; r < m.height; ++r)
    for (int c = 0; c < m.width; ++c)
      if (m.at(r, c)) {
        b.r0 = std::min(b.r0, r);
        b.c0 = std::min(b.c0, c);
        b.r1 = std::max(b.r1, r);
        b.c1 = std::max(b.c1, c);
      }
  if (b.r1 < 0) return std::nullopt;
  return b;
}

// Bilinear sample with pixel-center alignment; coordinates are clamped to the
// valid range, so constant inputs map to constant outputs. Integer coordinates
// return the stored value exactly.
template <typename Grid>
inline double bilinear_sample(const Grid& g, double r, double c) {
  r = std::min(std::max(r, 0.0), static_cast<double>(g.height - 1));
  c = std::min(std::max(c, 0.0), static_cast<double>(g.width - 1));
  const int r0 = static_cast<int>(std::floor(r));
  const int c0 = static_cast<int>(std::floor(c));
  const int r1 = std::min(r0 + 1, g.height - 1);
  const int c1 = std::min(c0 + 1, g.width - 1);
  const double fr = r - r0;
  const double fc = c - c0;
  if (fr == 0.0 && fc == 0.0) return g.at(r0, c0);
  const double top = g.at(r0, c0) * (1.0 - fc) + g.at(r0, c1) * fc;
  const double bot = g.at(r1, c0) * (1.0 - fc) + g.at(r1, c1) * fc;
  return top * (1.0 - fr) + bot * fr;
}

// Pixel-center aligned bilinear resize.
inline Image resize_bilinear(const Image& im, int out_h, int out_w) {
  if (out_h == im.height && out_w == im.width) return im;
  Image out(out_h, out_w);
  const double sr = static_cast<double>(im.height) / out_h;
  const double sc = static_cast<double>(im.width) / out_w;
  for (int r = 0; r < out_h; ++r)
    for (int c = 0; c < out_w; ++c)
      out.at(r, c) = bilinear_sample(im, (r + 0.5) * sr - 0.5, (c + 0.5) * sc - 0.5);
  return out;
}

// Nearest-neighbour mask resize; output stays strictly binary.
inline AnomalyMask resize_mask_nearest(const AnomalyMask& m, int out_h, int out_w) {
  if (out_h == m.height && out_w == m.width) return m;
  AnomalyMask out(out_h, out_w);
  const double sr = static_cast<double>(m.height) / out_h;
  const double sc = static_cast<double>(m.width) / out_w;
  for (int r = 0; r < out_h; ++r)
    for (int c = 0; c < out_w; ++c) {
      int src_r = static_cast<int>((r + 0.5) * sr);
      int src_c = static_cast<int>((c + 0.5) * sc);
      src_r = std::min(src_r, m.height - 1);
      src_c = std::min(src_c, m.width - 1);
      out.at(r, c) = m.at(src_r, src_c) ? 1 : 0;
    }
  // resizing invalidates parametric metadata only by scale; keep it scaled
  if (m.shape) {
    ShapeMeta s = *m.shape;
    const double kr = static_cast<double>(out_h) / m.height;
    const double kc = static_cast<double>(out_w) / m.width;
    s.center_row = (s.center_row + 0.5) * kr - 0.5;
    s.center_col = (s.center_col + 0.5) * kc - 0.5;
    s.ax1 *= 0.5 * (kr + kc);
    s.ax2 *= 0.5 * (kr + kc);
    out.shape = s;
  }
  return out;
}

// Mean absolute difference over horizontally and vertically adjacent pixel
// pairs; the smoothness gauge used by the phantom generator contract.
inline double total_variation_per_pixel(const Image& im) {
  double acc = 0.0;
  std::size_t n = 0;
  for (int r = 0; r < im.height; ++r)
    for (int c = 0; c < im.width; ++c) {
      if (c + 1 < im.width) {
        acc += std::abs(im.at(r, c) - im.at(r, c + 1));
        ++n;
      }
      if (r + 1 < im.height) {
        acc += std::abs(im.at(r, c) - im.at(r + 1, c));
        ++n;
      }
    }
  return n ? acc / static_cast<double>(n) : 0.0;
}

}  // namespace fadkit
