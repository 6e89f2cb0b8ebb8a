#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "ckmap/geom.hpp"

namespace ckmap {

/// Uniform planar array. Element (a, b) of a rows x cols grid sits at
/// centroid + (a - (rows-1)/2) * spacing * axis_row + (b - (cols-1)/2) * spacing * axis_col,
/// flattened row-major to antenna index a*cols + b.
struct UpaGeometry {
  std::size_t rows = 1, cols = 1;
  double spacing_m = 0.0;          // filled from half-wavelength default at load
  Vec3 axis_row{0.0, 0.0, 1.0};    // vertical
  Vec3 axis_col{0.0, 1.0, 0.0};

  std::size_t count() const { return rows * cols; }
  Vec3 element_offset(std::size_t idx) const;
};

/// Infinite axis-aligned reflecting plane, e.g. ground (axis=2, offset=0).
struct ReflectorPlane {
  int axis = 2;  // 0=x, 1=y, 2=z
  double offset = 0.0;
  std::complex<double> reflection{-0.6, 0.0};
};

enum class Material { kDielectric, kMetal };

/// Dynamic scatterer: an axis-aligned box repositioned every coherence block.
/// Blocks the line of sight and re-radiates one single-bounce path.
struct Scatterer {
  Material material = Material::kDielectric;
  Vec3 size{0.5, 0.5, 1.8};  // dielectric pedestrian default
  std::complex<double> reflectivity{-0.4, 0.0};
  Vec3 center;  // set by reposition_scatterers

  Vec3 box_min() const { return center - size * 0.5; }
  Vec3 box_max() const { return center + size * 0.5; }
  bool contains(const Vec3& p) const;
};

struct AxisBox {
  Vec3 min, max;
  bool empty() const { return min.x > max.x || min.y > max.y || min.z > max.z; }
};

struct Scene {
  Vec3 bs_position{0.0, 0.0, 10.0};
  UpaGeometry bs_array;
  UpaGeometry ue_array;
  std::vector<ReflectorPlane> static_reflectors;
  std::vector<Scatterer> dynamic_scatterers;
  AxisBox drop_region{{10.0, -50.0, 1.5}, {90.0, 50.0, 1.5}};
  std::uint64_t rng_seed = 1;

  /// Diagonal of the bounding box of BS position and drop region; default r_max.
  double extent() const;
};

/// Parses a scene JSON document. Unknown keys are rejected. Element spacing
/// defaults to half a wavelength at f_down_center_hz.
Scene load_scene_json(const std::string& json_text, double f_down_center_hz);
Scene load_scene_file(const std::string& path, double f_down_center_hz);

/// Draws new scatterer centers uniformly in the drop region from a stream
/// keyed by (scene.rng_seed, block). Static geometry is untouched.
Scene reposition_scatterers(const Scene& scene, std::size_t block);

}  // namespace ckmap
