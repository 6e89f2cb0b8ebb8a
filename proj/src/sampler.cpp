#include "ckmap/sampler.hpp"

#include <cmath>
#include <stdexcept>

namespace ckmap {

double RadiatorGrid::mean_delta() const {
  double s = 0.0;
  for (double d : deltas) s += d;
  return s / static_cast<double>(deltas.size());
}

std::vector<Vec3> fibonacci_directions(std::size_t n_a) {
  if (n_a == 0) throw std::invalid_argument("fibonacci_directions: n_a must be >= 1");
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  const double golden = (1.0 + std::sqrt(5.0)) / 2.0;
  const double step = 1.0 - 1.0 / golden;

  std::vector<Vec3> dirs(n_a);
  for (std::size_t i = 0; i < n_a; ++i) {
    const double z = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(n_a);
    const double sin_theta = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = kTwoPi * static_cast<double>(i) * step;
    dirs[i] = {sin_theta * std::cos(phi), sin_theta * std::sin(phi), z};
  }
  return dirs;
}

RaySet make_rays(const Vec3& origin, std::size_t n_a) {
  return RaySet{origin, fibonacci_directions(n_a)};
}

RadiatorGrid radial_sample(const RaySet& rays, std::size_t n_s, double r_min, double r_max) {
  if (n_s == 0) throw std::invalid_argument("radial_sample: n_s must be >= 1");
  if (!(r_min >= 0.0) || !(r_min < r_max))
    throw std::invalid_argument("radial_sample: require 0 <= r_min < r_max");

  RadiatorGrid g;
  g.n_a = rays.directions.size();
  g.n_s = n_s;
  g.r_min = r_min;
  g.r_max = r_max;
  const double delta = (r_max - r_min) / static_cast<double>(n_s);
  g.deltas.assign(g.n_a * n_s, delta);
  g.positions.resize(g.n_a * n_s);
  for (std::size_t i = 0; i < g.n_a; ++i) {
    for (std::size_t j = 0; j < n_s; ++j) {
      const double r = r_min + (static_cast<double>(j) + 0.5) * delta;
      g.positions[i * n_s + j] = rays.origin + rays.directions[i] * r;
    }
  }
  return g;
}

}  // namespace ckmap
