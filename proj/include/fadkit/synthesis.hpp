#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "fadkit/common.hpp"
#include "fadkit/image.hpp"
#include "fadkit/masks.hpp"
#include "fadkit/poisson.hpp"

namespace fadkit {

enum class SynthesisTask { cutpaste, gauss_intensity_change, source };

inline std::string task_name(SynthesisTask t) {
  switch (t) {
    case SynthesisTask::cutpaste: return "cutpaste";
    case SynthesisTask::gauss_intensity_change: return "gauss_intensity_change";
    case SynthesisTask::source: return "source";
  }
  throw Error("bad task enum");
}

inline SynthesisTask task_from_name(const std::string& name) {
  if (name == "cutpaste") return SynthesisTask::cutpaste;
  if (name == "gauss_intensity_change" || name == "gauss")
    return SynthesisTask::gauss_intensity_change;
  if (name == "source") return SynthesisTask::source;
  throw ConfigError("unknown synthesis task: " + name);
}

struct SynthParams {
  double gamma_abs_min = 0.4;  // |gamma| sampled in [min, max), random sign
  double gamma_abs_max = 0.6;
  double alpha_min = 1.4142135623730951;  // sqrt(2)
  double alpha_max = 4.0;
  double sigma_g_base = 4.0;  // filter sigma in px at a 64-px side
  double mask_area_min = kMaskAreaMin;
  double mask_area_max = kMaskAreaMax;

  double sigma_g_for(int side) const { return sigma_g_base * side / 64.0; }
};

// Uniform draw over the three tasks.
inline SynthesisTask sample_task(Rng& rng) {
  return static_cast<SynthesisTask>(rng.uniform_int(3));
}

// Uniform draw over an enabled subset (ablation runs).
inline SynthesisTask sample_task(Rng& rng, const std::vector<SynthesisTask>& enabled) {
  if (enabled.empty()) throw std::invalid_argument("no synthesis tasks enabled");
  return enabled[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(enabled.size())))];
}

// ---------------------------------------------------------------------------
// GaussIntensityChange
// ---------------------------------------------------------------------------

// Per-pixel standard normal noise, binarized at zero, then smoothed with a
// normalized Gaussian filter (truncated at 3 sigma, replicate borders). The
// result is a convex combination of {0,1}, so values stay in [0,1].
inline Field smoothed_binary_noise(std::uint64_t seed, int height, int width,
                                   double sigma_g) {
  Rng rng(seed);
  Field bin(height, width);
  for (auto& v : bin.data) v = rng.normal() > 0.0 ? 1.0 : 0.0;
  if (sigma_g <= 0.0) return bin;

  const int radius = static_cast<int>(std::ceil(3.0 * sigma_g));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double w = std::exp(-0.5 * (i * i) / (sigma_g * sigma_g));
    kernel[static_cast<std::size_t>(i + radius)] = w;
    sum += w;
  }
  for (auto& w : kernel) w /= sum;

  Field tmp(height, width);
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int cc = std::clamp(c + i, 0, width - 1);
        acc += kernel[static_cast<std::size_t>(i + radius)] * bin.at(r, cc);
      }
      tmp.at(r, c) = acc;
    }
  Field out(height, width);
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int rr = std::clamp(r + i, 0, height - 1);
        acc += kernel[static_cast<std::size_t>(i + radius)] * tmp.at(rr, c);
      }
      out.at(r, c) = acc;
    }
  return out;
}

// X_hat = X (1-Y) + (X + gamma * sigma_hat) Y, clamped inside the region.
// Pixels outside the mask are copied bit-identically.
inline Image apply_intensity_change(const Image& x, const AnomalyMask& y,
                                    double gamma, const Field& sigma_hat) {
  if (x.height != y.height || x.width != y.width ||
      x.height != sigma_hat.height || x.width != sigma_hat.width)
    throw ShapeError("intensity change: dimension mismatch");
  Image out = x;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (y.bits[i]) out.pixels[i] = clamp01(x.pixels[i] + gamma * sigma_hat.data[i]);
  return out;
}

inline Image gauss_intensity_change(const Image& x, const AnomalyMask& y,
                                    double gamma, std::uint64_t seed,
                                    double sigma_g) {
  const double mag = std::abs(gamma);
  if (mag < 0.4 || mag >= 0.6)
    throw std::invalid_argument("|gamma| must lie in [0.4, 0.6)");
  const Field sigma_hat = smoothed_binary_noise(seed, x.height, x.width, sigma_g);
  return apply_intensity_change(x, y, gamma, sigma_hat);
}

// ---------------------------------------------------------------------------
// CutPaste with Poisson blending
// ---------------------------------------------------------------------------

// Blends the patch at (src_r0, src_c0) — congruent to the mask's bounding
// box — into the masked region. Border-positive mask pixels (possible with
// free-form masks) are excluded from the blend and left untouched.
inline Image cutpaste_at(const Image& x, const AnomalyMask& y, int src_r0, int src_c0) {
  const auto bbox = mask_bbox(y);
  if (!bbox) return x;
  if (src_r0 < 0 || src_c0 < 0 || src_r0 + bbox->rows() > x.height ||
      src_c0 + bbox->cols() > x.width)
    throw std::invalid_argument("cutpaste source rectangle out of bounds");

  AnomalyMask blend_region = y;
  blend_region.shape.reset();
  for (int r = 0; r < y.height; ++r)
    for (int c = 0; c < y.width; ++c)
      if (r == 0 || c == 0 || r == y.height - 1 || c == y.width - 1)
        blend_region.at(r, c) = 0;
  if (blend_region.empty_mask()) return x;

  const int dr = src_r0 - bbox->r0;
  const int dc = src_c0 - bbox->c0;
  Image src(x.height, x.width);
  for (int r = 0; r < x.height; ++r)
    for (int c = 0; c < x.width; ++c) {
      const int rr = std::clamp(r + dr, 0, x.height - 1);
      const int cc = std::clamp(c + dc, 0, x.width - 1);
      src.at(r, c) = x.at(rr, cc);
    }
  return poisson_blend(x, src, blend_region);
}

// Picks a random source rectangle congruent to the mask's bounding box,
// disjoint from it and at least one pixel inside the image, then blends.
inline Image cutpaste(const Image& x, const AnomalyMask& y, std::uint64_t seed) {
  const auto bbox = mask_bbox(y);
  if (!bbox) return x;
  const int bh = bbox->rows();
  const int bw = bbox->cols();
  const int max_r = x.height - bh - 1;
  const int max_c = x.width - bw - 1;

  Rng rng(seed);
  for (int attempt = 0; attempt < 16; ++attempt) {
    if (max_r < 1 || max_c < 1) break;
    const int sr = 1 + rng.uniform_int(max_r);
    const int sc = 1 + rng.uniform_int(max_c);
    const bool overlaps = sr <= bbox->r1 && sr + bh - 1 >= bbox->r0 &&
                          sc <= bbox->c1 && sc + bw - 1 >= bbox->c0;
    if (!overlaps) return cutpaste_at(x, y, sr, sc);
  }
  throw PlacementError("cutpaste: no disjoint source placement for the mask bounding box");
}

// ---------------------------------------------------------------------------
// Source deformation
// ---------------------------------------------------------------------------

// Pushes mask content radially away from the shape center: a source pixel at
// distance d along a direction with boundary radius r reads from distance
// r * (d/r)^alpha (bilinear). The boundary (d = r) and the center are fixed
// points; the mapped distance is strictly increasing in d.
inline Image source_deform(const Image& x, const AnomalyMask& y, double alpha) {
  if (x.height != y.height || x.width != y.width)
    throw ShapeError("source deform: dimension mismatch");
  if (!y.shape || y.shape->kind == MaskKind::perlin)
    throw UnsupportedShapeError("source deform requires a parametric mask");
  if (!(alpha >= 1.4142135623730951 && alpha < 4.0))
    throw std::invalid_argument("alpha must lie in [sqrt(2), 4)");
  for (int r = 0; r < y.height; ++r)
    for (int c = 0; c < y.width; ++c)
      if (y.at(r, c) &&
          (r == 0 || c == 0 || r == y.height - 1 || c == y.width - 1))
        throw std::invalid_argument("source deform: mask must be strictly inside the image");

  const ShapeMeta& s = *y.shape;
  Image out = x;
  for (int r = 0; r < y.height; ++r)
    for (int c = 0; c < y.width; ++c) {
      if (!y.at(r, c)) continue;
      const double dr = r - s.center_row;
      const double dc = c - s.center_col;
      const double d = std::hypot(dr, dc);
      if (d == 0.0) {
        out.at(r, c) = bilinear_sample(x, s.center_row, s.center_col);
        continue;
      }
      const double rad = radius_in_direction(y, dr, dc);
      const double t = std::min(d / rad, 1.0);
      const double mapped = rad * std::pow(t, alpha);
      const double ur = dr / d;
      const double uc = dc / d;
      out.at(r, c) = bilinear_sample(x, s.center_row + mapped * ur,
                                     s.center_col + mapped * uc);
    }
  return out;
}

// ---------------------------------------------------------------------------
// Task dispatcher
// ---------------------------------------------------------------------------

inline Image synthesize(const Image& x, const AnomalyMask& y, SynthesisTask task,
                        std::uint64_t seed, const SynthParams& params = {}) {
  if (x.height != y.height || x.width != y.width)
    throw ShapeError("synthesize: image and mask dimensions must match");
  Rng rng(derive_seed(seed, "synthesize"));
  switch (task) {
    case SynthesisTask::cutpaste:
      return cutpaste(x, y, derive_seed(seed, "placement"));
    case SynthesisTask::gauss_intensity_change: {
      const double sign = rng.uniform_int(2) == 0 ? 1.0 : -1.0;
      const double gamma =
          sign * rng.uniform(params.gamma_abs_min, params.gamma_abs_max);
      const int side = (x.height + x.width) / 2;
      return gauss_intensity_change(x, y, gamma, derive_seed(seed, "noise"),
                                    params.sigma_g_for(side));
    }
    case SynthesisTask::source: {
      const double alpha = rng.uniform(params.alpha_min, params.alpha_max);
      return source_deform(x, y, alpha);
    }
  }
  throw Error("bad task enum");
}

}  // namespace fadkit
