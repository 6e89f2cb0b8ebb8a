#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace ckmap {

using cplx = std::complex<double>;

enum class Band { kUp, kDown };

/// Complex channel frequency response over (subcarrier, rx antenna, tx antenna),
/// row-major (c, r, t). The universal currency of the toolkit.
struct CsiTensor {
  std::size_t n_c = 0, n_r = 0, n_t = 0;
  std::vector<cplx> data;

  CsiTensor() = default;
  CsiTensor(std::size_t nc, std::size_t nr, std::size_t nt)
      : n_c(nc), n_r(nr), n_t(nt), data(nc * nr * nt) {
    if (nc == 0 || nr == 0 || nt == 0)
      throw std::invalid_argument("CsiTensor: dimensions must be positive");
  }

  std::size_t size() const { return n_c * n_r * n_t; }
  std::size_t index(std::size_t c, std::size_t r, std::size_t t) const {
    return (c * n_r + r) * n_t + t;
  }
  cplx& at(std::size_t c, std::size_t r, std::size_t t) { return data[index(c, r, t)]; }
  const cplx& at(std::size_t c, std::size_t r, std::size_t t) const {
    return data[index(c, r, t)];
  }

  bool same_shape(const CsiTensor& o) const {
    return n_c == o.n_c && n_r == o.n_r && n_t == o.n_t;
  }
  bool all_finite() const;
  /// Squared Frobenius norm over all entries.
  double norm_sq() const;
  /// Squared Frobenius norm of one subcarrier slice (over rx, tx).
  double slice_norm_sq(std::size_t c) const;

  bool operator==(const CsiTensor& o) const {
    return same_shape(o) && data == o.data;
  }
};

/// Real-packed CSI: shape (2*n_c, n_r, n_t), real-first layout. Frequency slot c
/// holds Re(h[c]) and slot n_c + c holds Im(h[c]).
struct PackedReal {
  std::size_t n_c = 0, n_r = 0, n_t = 0;  // n_c is the complex subcarrier count
  std::vector<double> data;                // size 2*n_c*n_r*n_t

  std::size_t index(std::size_t slot, std::size_t r, std::size_t t) const {
    return (slot * n_r + r) * n_t + t;
  }
};

PackedReal pack(const CsiTensor& h);
CsiTensor unpack(const PackedReal& p);

/// MIMO-OFDM system parameters shared by generation, training and evaluation.
struct SystemConfig {
  std::size_t n_t = 8;
  std::size_t n_r = 1;
  std::size_t n_c_total = 64;
  std::size_t n_c_used = 8;
  double subcarrier_spacing = 312500.0;  // Hz
  double f_up_center = 6.715e9;          // Hz
  double f_down_center = 6.765e9;        // Hz
  std::size_t n_blocks = 4;
  std::size_t samples_per_block = 8;
  double tx_power = 1.0;     // W
  double noise_power = 0.1;  // W

  void validate() const;
  double band_center(Band b) const { return b == Band::kUp ? f_up_center : f_down_center; }
  /// Per-subcarrier frequencies, length n_c_used, centered on the band center:
  /// f_k = f_center + (k - (n_c_used-1)/2) * spacing.
  std::vector<double> subcarrier_freqs(Band b) const;
};

/// Mean over (tensor, subcarrier) of || pred - truth ||^2 / || truth ||^2,
/// each subcarrier slice normalized individually by its own Frobenius norm.
double nmse(std::span<const CsiTensor> pred, std::span<const CsiTensor> truth);
double nmse(const CsiTensor& pred, const CsiTensor& truth);

/// Adds circularly-symmetric Gaussian noise rescaled so the realized
/// 10*log10(||H||^2 / ||H_hat - H||^2) equals esnr_db exactly. An infinite
/// esnr_db returns h unchanged. Deterministic given seed.
CsiTensor corrupt_to_esnr(const CsiTensor& h, double esnr_db, std::uint64_t seed);

/// Realized estimation SNR in dB between an estimate and the ground truth.
double measure_esnr_db(const CsiTensor& estimate, const CsiTensor& truth);

/// Round every entry to f32 precision (the on-disk representation).
CsiTensor quantize_f32(const CsiTensor& h);

}  // namespace ckmap
