#include "ckmap/trace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ckmap/rng.hpp"

namespace ckmap {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

double axis_of(const Vec3& v, int axis) { return axis == 0 ? v.x : axis == 1 ? v.y : v.z; }

void set_axis(Vec3& v, int axis, double val) {
  if (axis == 0) v.x = val;
  else if (axis == 1) v.y = val;
  else v.z = val;
}

}  // namespace

bool segment_intersects_box(const Vec3& a, const Vec3& b, const Vec3& lo, const Vec3& hi) {
  // Slab test on the parametric segment a + t*(b-a), t in (0, 1).
  const Vec3 d = b - a;
  double t_min = 0.0, t_max = 1.0;
  const double av[3] = {a.x, a.y, a.z};
  const double dv[3] = {d.x, d.y, d.z};
  const double lov[3] = {lo.x, lo.y, lo.z};
  const double hiv[3] = {hi.x, hi.y, hi.z};
  for (int k = 0; k < 3; ++k) {
    if (std::abs(dv[k]) < 1e-15) {
      if (av[k] < lov[k] || av[k] > hiv[k]) return false;
      continue;
    }
    double t0 = (lov[k] - av[k]) / dv[k];
    double t1 = (hiv[k] - av[k]) / dv[k];
    if (t0 > t1) std::swap(t0, t1);
    t_min = std::max(t_min, t0);
    t_max = std::min(t_max, t1);
    if (t_min > t_max) return false;
  }
  return t_max > 1e-12 && t_min < 1.0 - 1e-12;
}

PathList trace_paths(const Scene& scene, const Vec3& ue_position) {
  const Vec3 bs = scene.bs_position;
  const Vec3 ue = ue_position;
  const double d_los = (ue - bs).norm();
  if (d_los < 1e-9) throw std::invalid_argument("trace_paths: degenerate geometry");
  for (const Scatterer& sc : scene.dynamic_scatterers)
    if (sc.contains(ue)) throw std::invalid_argument("trace_paths: UE inside a scatterer");

  // Reference wavelength for amplitudes; spacing uses the same convention.
  const double lambda = scene.bs_array.spacing_m * 2.0;
  const double friis = lambda / (4.0 * M_PI);

  PathList paths;

  bool los_blocked = false;
  for (const Scatterer& sc : scene.dynamic_scatterers)
    if (segment_intersects_box(bs, ue, sc.box_min(), sc.box_max())) {
      los_blocked = true;
      break;
    }
  if (!los_blocked) {
    PropagationPath p;
    p.gain = friis / d_los;
    p.delay = d_los / kSpeedOfLight;
    p.departure = (ue - bs).normalized();
    p.arrival = (bs - ue).normalized();
    paths.push_back(p);
  }

  // First-order specular reflections via the image method.
  for (const ReflectorPlane& plane : scene.static_reflectors) {
    const double s_bs = axis_of(bs, plane.axis) - plane.offset;
    const double s_ue = axis_of(ue, plane.axis) - plane.offset;
    if (s_bs * s_ue <= 1e-12) continue;  // reflection needs both on one side

    Vec3 image = bs;
    set_axis(image, plane.axis, 2.0 * plane.offset - axis_of(bs, plane.axis));
    const double d_img = (ue - image).norm();

    // Reflection point: where the image->UE segment crosses the plane.
    const double num = plane.offset - axis_of(image, plane.axis);
    const double den = axis_of(ue, plane.axis) - axis_of(image, plane.axis);
    if (std::abs(den) < 1e-15) continue;
    const double tc = num / den;
    if (tc <= 0.0 || tc >= 1.0) continue;
    const Vec3 rp = image + (ue - image) * tc;

    PropagationPath p;
    p.gain = plane.reflection * (friis / d_img);
    p.delay = d_img / kSpeedOfLight;
    p.departure = (rp - bs).normalized();
    p.arrival = (rp - ue).normalized();
    paths.push_back(p);
  }

  // One single-bounce path per scatterer, bouncing at the face center that
  // minimizes the total path length.
  for (const Scatterer& sc : scene.dynamic_scatterers) {
    const Vec3 lo = sc.box_min(), hi = sc.box_max();
    const Vec3 c = sc.center;
    const Vec3 faces[6] = {{lo.x, c.y, c.z}, {hi.x, c.y, c.z}, {c.x, lo.y, c.z},
                           {c.x, hi.y, c.z}, {c.x, c.y, lo.z}, {c.x, c.y, hi.z}};
    double best = std::numeric_limits<double>::infinity();
    Vec3 bounce;
    for (const Vec3& f : faces) {
      const double total = (f - bs).norm() + (ue - f).norm();
      if (total < best) {
        best = total;
        bounce = f;
      }
    }
    const double d1 = (bounce - bs).norm();
    const double d2 = (ue - bounce).norm();
    if (d1 < 1e-9 || d2 < 1e-9) continue;

    PropagationPath p;
    p.gain = sc.reflectivity * (friis / d1) * (friis / d2);
    p.delay = (d1 + d2) / kSpeedOfLight;
    p.departure = (bounce - bs).normalized();
    p.arrival = (bounce - ue).normalized();
    paths.push_back(p);
  }

  return paths;
}

CsiTensor synthesize_csi(const PathList& paths, const UpaGeometry& bs_array,
                         const UpaGeometry& ue_array, const SystemConfig& config, Band band) {
  if (paths.empty()) throw std::invalid_argument("synthesize_csi: empty path list");
  const std::size_t n_t = bs_array.count(), n_r = ue_array.count();
  if (n_t != config.n_t || n_r != config.n_r)
    throw std::invalid_argument("synthesize_csi: array sizes do not match config");

  const std::vector<double> freqs = config.subcarrier_freqs(band);
  const double k_center = kTwoPi * config.band_center(band) / kSpeedOfLight;

  CsiTensor h(config.n_c_used, n_r, n_t);
  std::vector<cplx> a_tx(n_t), a_rx(n_r);
  for (const PropagationPath& p : paths) {
    for (std::size_t t = 0; t < n_t; ++t)
      a_tx[t] = std::polar(1.0, k_center * bs_array.element_offset(t).dot(p.departure));
    for (std::size_t r = 0; r < n_r; ++r)
      a_rx[r] = std::polar(1.0, k_center * ue_array.element_offset(r).dot(p.arrival));
    for (std::size_t c = 0; c < config.n_c_used; ++c) {
      const cplx phase = std::polar(1.0, -kTwoPi * freqs[c] * p.delay);
      const cplx gc = p.gain * phase;
      for (std::size_t r = 0; r < n_r; ++r) {
        const cplx gr = gc * a_rx[r];
        for (std::size_t t = 0; t < n_t; ++t) h.at(c, r, t) += gr * a_tx[t];
      }
    }
  }
  return h;
}

ChannelDataset generate_dataset(const Scene& scene, const SystemConfig& config) {
  config.validate();
  if (scene.bs_array.count() != config.n_t || scene.ue_array.count() != config.n_r)
    throw std::invalid_argument("generate_dataset: scene arrays do not match config");

  ChannelDataset ds;
  ds.config = config;
  ds.records.resize(config.n_blocks * config.samples_per_block);

  std::vector<Scene> block_scenes(config.n_blocks);
  for (std::size_t b = 0; b < config.n_blocks; ++b)
    block_scenes[b] = reposition_scatterers(scene, b);

  const std::int64_t total = static_cast<std::int64_t>(ds.records.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t k = 0; k < total; ++k) {
    const std::size_t b = static_cast<std::size_t>(k) / config.samples_per_block;
    const std::size_t s = static_cast<std::size_t>(k) % config.samples_per_block;
    const Scene& sc = block_scenes[b];

    // Per-record substream so parallel and serial runs agree bit-exactly.
    Rng rng = Rng(scene.rng_seed).derive(0x5545u /* UE drop stream */, b, s);
    Vec3 ue;
    for (;;) {
      ue.x = rng.uniform(sc.drop_region.min.x, sc.drop_region.max.x);
      ue.y = rng.uniform(sc.drop_region.min.y, sc.drop_region.max.y);
      ue.z = rng.uniform(sc.drop_region.min.z, sc.drop_region.max.z);
      bool inside = false;
      for (const Scatterer& scat : sc.dynamic_scatterers)
        if (scat.contains(ue)) {
          inside = true;
          break;
        }
      if (!inside) break;
    }

    const PathList paths = trace_paths(sc, ue);
    CsiRecord rec;
    rec.block_index = static_cast<std::uint32_t>(b);
    rec.ue_position = ue;
    rec.h_up = quantize_f32(synthesize_csi(paths, sc.bs_array, sc.ue_array, config, Band::kUp));
    rec.h_down = quantize_f32(synthesize_csi(paths, sc.bs_array, sc.ue_array, config, Band::kDown));
    ds.records[static_cast<std::size_t>(k)] = std::move(rec);
  }
  return ds;
}

}  // namespace ckmap
