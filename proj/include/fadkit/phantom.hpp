#pragma once

#include <cmath>
#include <string>

#include "fadkit/common.hpp"
#include "fadkit/image.hpp"

namespace fadkit {

enum class FamilyId { blob, ring };

inline std::string family_name(FamilyId id) {
  return id == FamilyId::blob ? "blob" : "ring";
}

inline FamilyId family_from_name(const std::string& name) {
  if (name == "blob") return FamilyId::blob;
  if (name == "ring") return FamilyId::ring;
  throw ConfigError("unknown phantom family: " + name);
}

// Deterministic synthetic image family: a linear background gradient plus a
// few smooth structures, with light uniform pixel noise.
struct PhantomFamily {
  FamilyId id = FamilyId::blob;
  double gradient_lo = 0.25;   // background intensity range
  double gradient_hi = 0.60;
  int structures_min = 3;      // smooth structures per image
  int structures_max = 8;
  double scale_min = 0.08;     // structure scale as a fraction of the side
  double scale_max = 0.20;
  double noise_amplitude = 0.02;
};

inline PhantomFamily blob_family() {
  PhantomFamily f;
  f.id = FamilyId::blob;
  f.structures_min = 3;
  f.structures_max = 8;
  f.scale_min = 0.08;
  f.scale_max = 0.20;
  return f;
}

inline PhantomFamily ring_family() {
  PhantomFamily f;
  f.id = FamilyId::ring;
  f.structures_min = 1;
  f.structures_max = 3;
  f.scale_min = 0.15;
  f.scale_max = 0.35;
  return f;
}

inline PhantomFamily make_family(FamilyId id) {
  return id == FamilyId::blob ? blob_family() : ring_family();
}

inline Image generate_phantom(const PhantomFamily& family, std::uint64_t seed, int size) {
  if (size < kMinImageSide) throw std::invalid_argument("phantom size must be >= 16");
  if (family.noise_amplitude >= 0.1)
    throw std::invalid_argument("noise amplitude must stay below 0.1");

  Rng rng(seed);
  Image im(size, size);

  // Background: linear gradient with a random orientation.
  const double ang = rng.uniform(0.0, 6.283185307179586476925286766559);
  const double gr = std::cos(ang);
  const double gc = std::sin(ang);
  const double v0 = rng.uniform(family.gradient_lo, family.gradient_hi);
  const double v1 = rng.uniform(family.gradient_lo, family.gradient_hi);
  const double half = 0.5 * (size - 1);
  const double max_proj = std::abs(gr) * half + std::abs(gc) * half;
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c) {
      const double proj = (r - half) * gr + (c - half) * gc;
      const double t = max_proj > 0.0 ? 0.5 * (proj / max_proj + 1.0) : 0.5;
      im.at(r, c) = v0 + (v1 - v0) * t;
    }

  const int count = family.structures_min +
                    rng.uniform_int(family.structures_max - family.structures_min + 1);
  for (int i = 0; i < count; ++i) {
    const double cr = rng.uniform(0.15, 0.85) * (size - 1);
    const double cc = rng.uniform(0.15, 0.85) * (size - 1);
    const double amp = rng.uniform(0.2, 0.5);
    if (family.id == FamilyId::blob) {
      const double sigma = rng.uniform(family.scale_min, family.scale_max) * size;
      const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
      for (int r = 0; r < size; ++r)
        for (int c = 0; c < size; ++c) {
          const double d2 = (r - cr) * (r - cr) + (c - cc) * (c - cc);
          im.at(r, c) += amp * std::exp(-d2 * inv2s2);
        }
    } else {
      // Annulus: a smoothed elliptical shell.
      const double a = rng.uniform(family.scale_min, family.scale_max) * size;
      const double b = rng.uniform(family.scale_min, family.scale_max) * size;
      const double theta = rng.uniform(0.0, 3.14159265358979323846);
      const double thickness = rng.uniform(0.03, 0.06) * size;
      const double sharp = 0.5 * (a + b) / thickness;
      const double ct = std::cos(theta);
      const double st = std::sin(theta);
      for (int r = 0; r < size; ++r)
        for (int c = 0; c < size; ++c) {
          const double dr = r - cr;
          const double dc = c - cc;
          const double x = dr * ct + dc * st;
          const double y = -dr * st + dc * ct;
          const double rho = std::sqrt((x / a) * (x / a) + (y / b) * (y / b));
          const double arg = (rho - 1.0) * sharp;
          im.at(r, c) += amp * std::exp(-0.5 * arg * arg);
        }
    }
  }

  for (auto& v : im.pixels) {
    v += rng.uniform(-family.noise_amplitude, family.noise_amplitude);
    v = clamp01(v);
  }
  return im;
}

}  // namespace fadkit
