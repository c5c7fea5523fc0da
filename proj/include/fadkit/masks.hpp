#pragma once

#include <cmath>
#include <deque>
#include <limits>
#include <vector>

#include "fadkit/common.hpp"
#include "fadkit/image.hpp"
#include "fadkit/perlin.hpp"

namespace fadkit {

constexpr double kMaskAreaMin = 0.02;
constexpr double kMaskAreaMax = 0.30;
constexpr int kMinComponentPixels = 9;

inline AnomalyMask binarize(const Field& f, double threshold) {
  AnomalyMask m(f.height, f.width);
  for (std::size_t i = 0; i < f.size(); ++i)
    m.bits[i] = f.data[i] > threshold ? 1 : 0;
  m.shape.reset();
  return m;
}

inline double positive_fraction(const Field& f, double threshold) {
  std::size_t n = 0;
  for (double v : f.data) n += v > threshold;
  return static_cast<double>(n) / static_cast<double>(f.size());
}

// Drops connected components (4-connectivity) smaller than min_pixels.
inline void filter_small_components(AnomalyMask& m, int min_pixels = kMinComponentPixels) {
  std::vector<int> label(m.size(), 0);
  int next = 0;
  std::deque<std::size_t> queue;
  std::vector<std::size_t> sizes{0};
  for (int r = 0; r < m.height; ++r)
    for (int c = 0; c < m.width; ++c) {
      const std::size_t idx = static_cast<std::size_t>(r) * m.width + c;
      if (!m.bits[idx] || label[idx]) continue;
      ++next;
      sizes.push_back(0);
      label[idx] = next;
      queue.push_back(idx);
      while (!queue.empty()) {
        const std::size_t cur = queue.front();
        queue.pop_front();
        ++sizes[static_cast<std::size_t>(next)];
        const int cr = static_cast<int>(cur) / m.width;
        const int cc = static_cast<int>(cur) % m.width;
        const int dr[4] = {-1, 1, 0, 0};
        const int dc[4] = {0, 0, -1, 1};
        for (int k = 0; k < 4; ++k) {
          const int nr = cr + dr[k];
          const int nc = cc + dc[k];
          if (nr < 0 || nr >= m.height || nc < 0 || nc >= m.width) continue;
          const std::size_t nidx = static_cast<std::size_t>(nr) * m.width + nc;
          if (m.bits[nidx] && !label[nidx]) {
            label[nidx] = next;
            queue.push_back(nidx);
          }
        }
      }
    }
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m.bits[i] && sizes[static_cast<std::size_t>(label[i])] <
                         static_cast<std::size_t>(min_pixels))
      m.bits[i] = 0;
}

// Binarizes a perlin field at a threshold found by bisection so the positive
// fraction lands within +-20% (relative) of target_area, intersected with the
// global [0.02, 0.30] mask-area bound. Fields that cannot meet the band after
// component filtering are rejection-resampled from derived seeds.
inline AnomalyMask perlin_mask(std::uint64_t seed, int size, double target_area) {
  if (target_area < kMaskAreaMin || target_area > kMaskAreaMax)
    throw std::invalid_argument("target_area must lie in [0.02, 0.30]");
  const double band_lo = std::max(0.8 * target_area, kMaskAreaMin);
  const double band_hi = std::min(1.2 * target_area, kMaskAreaMax);

  for (int attempt = 0; attempt < 16; ++attempt) {
    const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(attempt));
    Rng rng(s);
    const int period = rng.uniform_int(2) == 0 ? std::max(2, size / 4)
                                               : std::max(2, size / 8);
    const Field field = perlin_field(derive_seed(s, "field"), size, period);

    double lo = -1.0, hi = 1.0;  // fraction(lo) = 1, fraction(hi) = 0
    double chosen = std::numeric_limits<double>::quiet_NaN();
    for (int it = 0; it < 64; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double frac = positive_fraction(field, mid);
      if (frac >= band_lo && frac <= band_hi) {
        chosen = mid;
        break;
      }
      if (frac > target_area)
        lo = mid;
      else
        hi = mid;
    }
    if (!std::isfinite(chosen)) continue;

    AnomalyMask m = binarize(field, chosen);
    filter_small_components(m);
    const double frac = m.area_fraction();
    if (frac >= band_lo && frac <= band_hi) return m;
  }
  throw Error("degenerate field: no threshold meets the target-area band");
}

namespace detail {

// Shape-frame coordinates of an offset from center: the x-axis (first
// semi-axis) lies along image rows when rotation is zero.
inline void to_shape_frame(const ShapeMeta& s, double dr, double dc,
                           double& x, double& y) {
  const double ct = std::cos(s.rotation);
  const double st = std::sin(s.rotation);
  x = dr * ct + dc * st;
  y = -dr * st + dc * ct;
}

inline bool inside_shape(const ShapeMeta& s, double r, double c) {
  double x, y;
  to_shape_frame(s, r - s.center_row, c - s.center_col, x, y);
  if (s.kind == MaskKind::ellipse) {
    const double ex = x / s.ax1;
    const double ey = y / s.ax2;
    return ex * ex + ey * ey <= 1.0;
  }
  return std::abs(x) <= s.ax1 && std::abs(y) <= s.ax2;
}

}  // namespace detail

// Rasterizes a parametric shape onto a size x size grid (pixel centers at
// integer coordinates, boundary inclusive).
inline AnomalyMask rasterize_parametric(int size, const ShapeMeta& meta) {
  if (meta.kind == MaskKind::perlin)
    throw UnsupportedShapeError("rasterize_parametric needs ellipse or rectangle");
  if (meta.ax1 <= 0.0 || meta.ax2 <= 0.0)
    throw std::invalid_argument("shape axes must be positive");
  AnomalyMask m(size, size);
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c)
      m.at(r, c) = detail::inside_shape(meta, r, c) ? 1 : 0;
  m.shape = meta;
  return m;
}

// Samples an ellipse or rectangle mask with random size, rotation and center.
// Axes are uniform in [8%, 25%] of the image side, rotation uniform in
// [0, pi), and the center is placed so the whole shape fits strictly inside
// the image. Draws whose rasterized area falls outside [0.02, 0.30] are
// resampled.
inline AnomalyMask parametric_mask(std::uint64_t seed, int size, MaskKind kind) {
  if (kind == MaskKind::perlin)
    throw std::invalid_argument("parametric_mask kind must be ellipse or rectangle");
  Rng rng(seed);
  for (int attempt = 0; attempt < 64; ++attempt) {
    ShapeMeta meta;
    meta.kind = kind;
    meta.ax1 = rng.uniform(0.08, 0.25) * size;
    meta.ax2 = rng.uniform(0.08, 0.25) * size;
    meta.rotation = rng.uniform(0.0, 3.14159265358979323846);

    const double ct = std::cos(meta.rotation);
    const double st = std::sin(meta.rotation);
    double ext_r, ext_c;
    if (kind == MaskKind::ellipse) {
      ext_r = std::sqrt(meta.ax1 * ct * meta.ax1 * ct + meta.ax2 * st * meta.ax2 * st);
      ext_c = std::sqrt(meta.ax1 * st * meta.ax1 * st + meta.ax2 * ct * meta.ax2 * ct);
    } else {
      ext_r = meta.ax1 * std::abs(ct) + meta.ax2 * std::abs(st);
      ext_c = meta.ax1 * std::abs(st) + meta.ax2 * std::abs(ct);
    }
    const double mr = ext_r + 2.0;
    const double mc = ext_c + 2.0;
    if (mr >= size - 1 - mr || mc >= size - 1 - mc) continue;  // cannot fit
    meta.center_row = rng.uniform(mr, size - 1 - mr);
    meta.center_col = rng.uniform(mc, size - 1 - mc);

    AnomalyMask m = rasterize_parametric(size, meta);
    const double frac = m.area_fraction();
    if (frac >= kMaskAreaMin && frac <= kMaskAreaMax) return m;
  }
  throw Error("parametric_mask: no valid placement found");
}

// Distance from the shape center to its boundary along a direction
// (row, col components; need not be normalized).
inline double radius_in_direction(const AnomalyMask& mask, double dir_r, double dir_c) {
  if (!mask.shape || mask.shape->kind == MaskKind::perlin)
    throw UnsupportedShapeError("radius_in_direction needs a parametric mask");
  const double norm = std::hypot(dir_r, dir_c);
  if (norm <= 0.0) throw std::invalid_argument("direction must be nonzero");
  const ShapeMeta& s = *mask.shape;
  double x, y;
  detail::to_shape_frame(s, dir_r / norm, dir_c / norm, x, y);
  if (s.kind == MaskKind::ellipse) {
    const double ex = x / s.ax1;
    const double ey = y / s.ax2;
    return 1.0 / std::sqrt(ex * ex + ey * ey);
  }
  double r = std::numeric_limits<double>::infinity();
  if (std::abs(x) > 0.0) r = std::min(r, s.ax1 / std::abs(x));
  if (std::abs(y) > 0.0) r = std::min(r, s.ax2 / std::abs(y));
  return r;
}

}  // namespace fadkit
