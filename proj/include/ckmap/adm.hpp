#pragma once

#include <optional>

#include "ckmap/csi.hpp"
#include "ckmap/layers.hpp"
#include "ckmap/sampler.hpp"

namespace ckmap {

/// Downlink pilot layout: pilots occupy every stride_c-th subcarrier and every
/// stride_t-th tx antenna (rx fully observed). rho() is the implied overhead.
/// A disabled pattern (no pilots) models the uplink-only mode.
struct PilotPattern {
  std::size_t subcarrier_stride = 4;
  std::size_t antenna_stride = 2;
  bool enabled = true;

  static PilotPattern none() { return PilotPattern{0, 0, false}; }
  double rho() const {
    if (!enabled) return 0.0;
    return 1.0 / (static_cast<double>(subcarrier_stride) * static_cast<double>(antenna_stride));
  }
  void validate(std::size_t n_c, std::size_t n_t) const;
};

enum class QueryStage { kRaw, kAngular, kFinal };

/// Real-packed per-radiator network input, canonical shape
/// (N_a*N_s, 2N_c, N_r, N_t).
struct QueryTensor {
  ad::Tensor data;
  QueryStage stage = QueryStage::kRaw;
};

/// Geometrical/channel indicators broadcast to the radiator batch:
///   xi_ang (N_a*N_s, 3, N_r, N_t)            from ray directions,
///   xi_ch  (N_a*N_s, 2N_c, N_r, N_t)         from zero-padded partial CSI,
///   xi_rad (N_a, N_s, 2N_c, N_r*N_t)         from sampling intervals.
struct IndicatorSet {
  ad::Tensor xi_ang;
  ad::Tensor xi_ch;
  ad::Tensor xi_rad;
};

/// Replicates the packed uplink CSI to every radiator slot.
QueryTensor build_raw_queries(const CsiTensor& h_up_rx, std::size_t n_a, std::size_t n_s);

/// Zero-padded partial downlink observation: pilot entries carry the true
/// values (optionally corrupted to the given ESNR first), everything else is
/// exactly zero.
CsiTensor observe_partial_downlink(const CsiTensor& h_down_true, const PilotPattern& pattern,
                                   std::optional<double> esnr_db = std::nullopt,
                                   std::uint64_t seed = 0);

IndicatorSet build_indicators(const RaySet& rays, const RadiatorGrid& grid,
                              const CsiTensor& h_part);

/// Intermediate shapes of the two deformation stages, exposed for contract
/// checks and debugging.
struct DeformShapes {
  ad::Shape concat_stage1;  // (N_a*N_s, 4N_c+3, N_r, N_t)
  ad::Shape q_ang;          // (N_a*N_s, 2N_c, N_r, N_t)
  ad::Shape concat_stage2;  // (N_a, 3N_s, 2N_c, N_r*N_t)
  ad::Shape q_final;        // (N_a*N_s, 2N_c, N_r, N_t)
};

/// Two-stage learned query deformation. Stage 1 refines along the angular
/// dimension with (xi_ch, xi_ang) appended on the channel axis; stage 2
/// regroups to rays, refines along the radial axis with (xi_ch, xi_rad), and
/// restores the canonical radiator-batch layout. Both stages end in a
/// zero-initialized convolution plus a residual from the query slice, so the
/// module starts as the identity.
class DeformModule {
 public:
  DeformModule(ParamStore& ps, std::size_t n_a, std::size_t n_s, std::size_t n_c, std::size_t n_r,
               std::size_t n_t);

  ad::Var operator()(const ad::Var& q_raw, const IndicatorSet& ind,
                     DeformShapes* shapes = nullptr) const;

  /// Value-level convenience for tests.
  QueryTensor deform(const QueryTensor& q_raw, const IndicatorSet& ind,
                     DeformShapes* shapes = nullptr) const;

 private:
  std::size_t n_a_, n_s_, n_c_, n_r_, n_t_;
  Conv2d ang1_, ang2_;  // M_theta
  Conv2d rad1_, rad2_;  // M_phi
};

}  // namespace ckmap
