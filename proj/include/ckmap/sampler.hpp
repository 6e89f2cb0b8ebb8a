#pragma once

#include <cstddef>
#include <vector>

#include "ckmap/geom.hpp"

namespace ckmap {

/// Ray bundle originating at the UE array centroid.
struct RaySet {
  Vec3 origin;
  std::vector<Vec3> directions;  // unit vectors, pairwise distinct
};

/// Per-ray radial partition and the resulting radiator sample points.
/// Radiators sit at interval midpoints; intervals exactly tile (r_min, r_max].
struct RadiatorGrid {
  std::size_t n_a = 0, n_s = 0;
  double r_min = 0.0, r_max = 0.0;
  std::vector<double> deltas;   // n_a * n_s interval lengths, meters
  std::vector<Vec3> positions;  // n_a * n_s sample points

  double delta(std::size_t i, std::size_t j) const { return deltas[i * n_s + j]; }
  const Vec3& position(std::size_t i, std::size_t j) const { return positions[i * n_s + j]; }
  double mean_delta() const;
};

/// Spherical Fibonacci grid: point i has cos(theta) = 1 - 2(i+0.5)/n and
/// azimuth 2*pi*i*(1 - 1/golden_ratio). Quasi-uniform over the sphere.
std::vector<Vec3> fibonacci_directions(std::size_t n_a);

RaySet make_rays(const Vec3& origin, std::size_t n_a);

/// Uniform radial sampling: every interval is (r_max - r_min)/n_s long.
RadiatorGrid radial_sample(const RaySet& rays, std::size_t n_s, double r_min, double r_max);

}  // namespace ckmap
