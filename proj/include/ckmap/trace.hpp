#pragma once

#include <complex>
#include <vector>

#include "ckmap/csi.hpp"
#include "ckmap/dataset.hpp"
#include "ckmap/geom.hpp"
#include "ckmap/scene.hpp"

namespace ckmap {

struct PropagationPath {
  std::complex<double> gain;
  double delay = 0.0;  // seconds
  Vec3 departure;      // unit vector, BS toward first interaction (or UE)
  Vec3 arrival;        // unit vector, UE toward last interaction (or BS)
};

using PathList = std::vector<PropagationPath>;

/// True if the open segment (a, b) intersects the axis-aligned box.
bool segment_intersects_box(const Vec3& a, const Vec3& b, const Vec3& box_min,
                            const Vec3& box_max);

/// Deterministic image-method tracer: line of sight (when no scatterer box
/// blocks it), first-order specular reflections off the static planes, and one
/// single-bounce path per scatterer from the box face center minimizing the
/// two-segment path length. Amplitudes: lambda/(4*pi*d) free space; reflections
/// use the image distance, scatterer bounces the per-segment product.
PathList trace_paths(const Scene& scene, const Vec3& ue_position);

/// Narrowband MIMO-OFDM frequency response from a path list:
/// H[c,r,t] = sum_p gain_p * a_rx(arrival)[r] * a_tx(departure)[t] * exp(-j*2*pi*f_c*delay_p),
/// with UPA steering vectors evaluated at the band center frequency and path
/// phases at the per-subcarrier frequencies of the chosen band.
CsiTensor synthesize_csi(const PathList& paths, const UpaGeometry& bs_array,
                         const UpaGeometry& ue_array, const SystemConfig& config, Band band);

/// Full dataset: for each coherence block, reposition scatterers and drop
/// samples_per_block UEs uniformly in the drop region (rejecting positions
/// inside a scatterer), emitting uplink/downlink CSI pairs quantized to the
/// on-disk f32 precision. Pure function of (scene, config, scene.rng_seed).
ChannelDataset generate_dataset(const Scene& scene, const SystemConfig& config);

}  // namespace ckmap
