#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "fadkit/common.hpp"
#include "fadkit/image.hpp"

namespace fadkit {

constexpr double kPoissonTolerance = 1e-8;

namespace detail {

inline void check_blend_inputs(const Image& dst, const Image& src,
                               const AnomalyMask& region) {
  if (dst.height != src.height || dst.width != src.width ||
      dst.height != region.height || dst.width != region.width)
    throw ShapeError("poisson blend: dst, src and region dimensions must match");
  for (int r = 0; r < region.height; ++r)
    for (int c = 0; c < region.width; ++c)
      if (region.at(r, c) &&
          (r == 0 || c == 0 || r == region.height - 1 || c == region.width - 1))
        throw std::invalid_argument(
            "poisson blend: region must be strictly inside the image");
}

}  // namespace detail

// Solves the discrete Poisson equation over the region's positive pixels:
//   sum_{q in N(p)} (f_p - f_q) = sum_{q in N(p)} (g_p - g_q)
// with Dirichlet boundary f_q = dst_q outside the region, where g is the
// source. Red-black Gauss-Seidel, initialized at dst, iterated until the max
// residual drops below 1e-8 (or a generous sweep cap of 10 * |region|).
// Returns the unclamped solution embedded in a copy of dst.
inline Field poisson_solve(const Image& dst, const Image& src, const AnomalyMask& region) {
  detail::check_blend_inputs(dst, src, region);

  Field f(dst.height, dst.width);
  f.data.assign(dst.pixels.begin(), dst.pixels.end());

  // Interior pixel lists by checkerboard color.
  std::array<std::vector<int>, 2> cells;
  for (int r = 0; r < region.height; ++r)
    for (int c = 0; c < region.width; ++c)
      if (region.at(r, c))
        cells[static_cast<std::size_t>((r + c) & 1)].push_back(r * region.width + c);
  const std::size_t count = cells[0].size() + cells[1].size();
  if (count == 0) return f;

  const int w = dst.width;
  std::vector<double> rhs(dst.pixels.size(), 0.0);
  for (const auto& color : cells)
    for (int idx : color) {
      const double g = src.pixels[static_cast<std::size_t>(idx)];
      rhs[static_cast<std::size_t>(idx)] =
          4.0 * g - src.pixels[static_cast<std::size_t>(idx - w)] -
          src.pixels[static_cast<std::size_t>(idx + w)] -
          src.pixels[static_cast<std::size_t>(idx - 1)] -
          src.pixels[static_cast<std::size_t>(idx + 1)];
    }

  auto max_residual = [&] {
    double worst = 0.0;
    for (const auto& color : cells)
      for (int idx : color) {
        const std::size_t i = static_cast<std::size_t>(idx);
        const double neighbors = f.data[i - static_cast<std::size_t>(w)] +
                                 f.data[i + static_cast<std::size_t>(w)] +
                                 f.data[i - 1] + f.data[i + 1];
        worst = std::max(worst, std::abs(4.0 * f.data[i] - neighbors - rhs[i]));
      }
    return worst;
  };

  const long max_sweeps = 10 * static_cast<long>(count);
  for (long sweep = 0; sweep < max_sweeps && max_residual() >= kPoissonTolerance; ++sweep) {
    for (const auto& color : cells)
      for (int idx : color) {
        const std::size_t i = static_cast<std::size_t>(idx);
        const double neighbors = f.data[i - static_cast<std::size_t>(w)] +
                                 f.data[i + static_cast<std::size_t>(w)] +
                                 f.data[i - 1] + f.data[i + 1];
        f.data[i] = 0.25 * (rhs[i] + neighbors);
      }
  }
  return f;
}

// Composites the Poisson solution into the destination; only region pixels
// change, clamped back to the valid intensity range.
inline Image poisson_blend(const Image& dst, const Image& src, const AnomalyMask& region) {
  const Field f = poisson_solve(dst, src, region);
  Image out = dst;
  for (std::size_t i = 0; i < region.size(); ++i)
    if (region.bits[i]) out.pixels[i] = clamp01(f.data[i]);
  return out;
}

}  // namespace fadkit
