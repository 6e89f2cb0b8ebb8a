#pragma once

#include <complex>
#include <vector>

#include "ckmap/autodiff.hpp"
#include "ckmap/csi.hpp"
#include "ckmap/sampler.hpp"

namespace ckmap {

/// Per-radiator EM properties and aggregating coefficients, indexed
/// [ray, radiator, subcarrier, rx, tx] row-major.
struct RadianceOutputs {
  std::size_t n_a = 0, n_s = 0, n_c = 0, n_r = 0, n_t = 0;
  std::vector<double> sigma;  // >= 0
  std::vector<cplx> coeffs;

  RadianceOutputs() = default;
  RadianceOutputs(std::size_t na, std::size_t ns, std::size_t nc, std::size_t nr, std::size_t nt)
      : n_a(na), n_s(ns), n_c(nc), n_r(nr), n_t(nt),
        sigma(na * ns * nc * nr * nt, 0.0), coeffs(na * ns * nc * nr * nt) {}

  std::size_t index(std::size_t i, std::size_t j, std::size_t c, std::size_t r,
                    std::size_t t) const {
    return ((((i * n_s) + j) * n_c + c) * n_r + r) * n_t + t;
  }
  void validate(const RadiatorGrid& grid) const;
};

/// Absorption ratio of one radiator block: 1 - exp(-sigma * delta), in [0, 1).
double absorption(double sigma, double delta);

/// Accumulated transmittance along a ray. Index 0 is the radiator nearest the
/// UE; T[0] = 1 and T[j] is the product of (1 - alpha[k]) for k < j.
std::vector<double> transmittance(const std::vector<double>& alphas);

/// Volumetric aggregation: H[c,r,t] = sum_i sum_j alpha * T * C, with alpha
/// from sigma and the grid intervals and T accumulated per ray independently
/// for every (c,r,t) entry. All accumulation in f64.
CsiTensor render_channel(const RadiatorGrid& grid, const RadianceOutputs& out);

/// Per-(ray, radiator) complex contributions alpha*T*C; summing over (i, j)
/// reproduces render_channel. Used by the render CLI dump.
std::vector<cplx> render_contributions(const RadiatorGrid& grid, const RadianceOutputs& out);

/// Received symbol vector per subcarrier: y[c] = H[c] * x.
std::vector<cplx> render_received(const RadiatorGrid& grid, const RadianceOutputs& out,
                                  const std::vector<cplx>& x);

/// Aggregating coefficient matrix C = s * x^H / P with P = x^H x.
std::vector<cplx> aggregating_coeff(const std::vector<cplx>& s, const std::vector<cplx>& x,
                                    double tx_power);

namespace ad {

/// Differentiable rendering op. sigma is (N_a*N_s, N_c, N_r, N_t) nonnegative,
/// c_packed is (N_a*N_s, 2N_c, N_r, N_t) real-first packed; deltas has one
/// interval per flattened radiator. Returns packed (2N_c, N_r, N_t).
Var render_volume(const Var& sigma, const Var& c_packed, const std::vector<double>& deltas,
                  std::size_t n_a, std::size_t n_s);

}  // namespace ad

}  // namespace ckmap
