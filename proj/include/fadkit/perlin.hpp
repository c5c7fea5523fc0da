#pragma once

#include <cmath>
#include <vector>

#include "fadkit/common.hpp"
#include "fadkit/image.hpp"

namespace fadkit {

// Single-octave gradient-lattice noise. Random unit gradients sit on a
// lattice with spacing `lattice_period` pixels; values are the fade-blended
// dot products of the corner gradients with the offset vectors. The field is
// exactly zero at lattice points and bounded by [-1, 1] after the sqrt(2)
// contrast scale.
inline Field perlin_field(std::uint64_t seed, int size, int lattice_period) {
  if (lattice_period < 2) throw std::invalid_argument("lattice_period must be >= 2");
  if (size < 1) throw std::invalid_argument("size must be positive");

  const int cells = (size + lattice_period - 1) / lattice_period;
  const int n = cells + 1;

  Rng rng(seed);
  std::vector<double> gx(static_cast<std::size_t>(n) * n);
  std::vector<double> gy(gx.size());
  for (std::size_t i = 0; i < gx.size(); ++i) {
    const double ang = rng.uniform(0.0, 6.283185307179586476925286766559);
    gx[i] = std::cos(ang);
    gy[i] = std::sin(ang);
  }

  auto fade = [](double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); };
  auto dot_corner = [&](int ci, int cj, double dv, double du) {
    const std::size_t k = static_cast<std::size_t>(ci) * n + cj;
    return gx[k] * du + gy[k] * dv;
  };

  const double inv_p = 1.0 / lattice_period;
  const double scale = 1.4142135623730951;  // sqrt(2): raw range is +-sqrt(2)/2

  Field out(size, size);
  for (int r = 0; r < size; ++r) {
    const double v = r * inv_p;
    const int i0 = std::min(static_cast<int>(v), cells - 1);
    const double fv = v - i0;
    const double wv = fade(fv);
    for (int c = 0; c < size; ++c) {
      const double u = c * inv_p;
      const int j0 = std::min(static_cast<int>(u), cells - 1);
      const double fu = u - j0;
      const double wu = fade(fu);

      const double n00 = dot_corner(i0, j0, fv, fu);
      const double n01 = dot_corner(i0, j0 + 1, fv, fu - 1.0);
      const double n10 = dot_corner(i0 + 1, j0, fv - 1.0, fu);
      const double n11 = dot_corner(i0 + 1, j0 + 1, fv - 1.0, fu - 1.0);

      const double top = n00 + wu * (n01 - n00);
      const double bot = n10 + wu * (n11 - n10);
      double val = (top + wv * (bot - top)) * scale;
      if (val > 1.0) val = 1.0;
      if (val < -1.0) val = -1.0;
      out.at(r, c) = val;
    }
  }
  return out;
}

}  // namespace fadkit
