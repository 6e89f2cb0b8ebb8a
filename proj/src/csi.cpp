#include "ckmap/csi.hpp"

#include <cmath>
#include <limits>

#include "ckmap/rng.hpp"

namespace ckmap {

bool CsiTensor::all_finite() const {
  for (const cplx& v : data)
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
  return true;
}

double CsiTensor::norm_sq() const {
  double s = 0.0;
  for (const cplx& v : data) s += std::norm(v);
  return s;
}

double CsiTensor::slice_norm_sq(std::size_t c) const {
  double s = 0.0;
  for (std::size_t i = c * n_r * n_t; i < (c + 1) * n_r * n_t; ++i) s += std::norm(data[i]);
  return s;
}

PackedReal pack(const CsiTensor& h) {
  PackedReal p;
  p.n_c = h.n_c;
  p.n_r = h.n_r;
  p.n_t = h.n_t;
  p.data.resize(2 * h.size());
  const std::size_t half = h.size();
  for (std::size_t i = 0; i < half; ++i) {
    p.data[i] = h.data[i].real();
    p.data[half + i] = h.data[i].imag();
  }
  return p;
}

CsiTensor unpack(const PackedReal& p) {
  CsiTensor h(p.n_c, p.n_r, p.n_t);
  const std::size_t half = h.size();
  if (p.data.size() != 2 * half)
    throw std::invalid_argument("unpack: packed size does not match dimensions");
  for (std::size_t i = 0; i < half; ++i) h.data[i] = cplx(p.data[i], p.data[half + i]);
  return h;
}

void SystemConfig::validate() const {
  if (n_t == 0 || n_r == 0 || n_c_total == 0 || n_c_used == 0)
    throw std::invalid_argument("SystemConfig: counts must be positive");
  if (n_c_used > n_c_total)
    throw std::invalid_argument("SystemConfig: n_c_used exceeds n_c_total");
  if (subcarrier_spacing <= 0 || f_up_center <= 0 || f_down_center <= 0)
    throw std::invalid_argument("SystemConfig: frequencies must be positive");
  if (n_blocks == 0 || samples_per_block == 0)
    throw std::invalid_argument("SystemConfig: block/sample counts must be positive");
  if (tx_power <= 0 || noise_power <= 0)
    throw std::invalid_argument("SystemConfig: powers must be positive");
}

std::vector<double> SystemConfig::subcarrier_freqs(Band b) const {
  std::vector<double> f(n_c_used);
  const double center = band_center(b);
  const double mid = (static_cast<double>(n_c_used) - 1.0) / 2.0;
  for (std::size_t k = 0; k < n_c_used; ++k)
    f[k] = center + (static_cast<double>(k) - mid) * subcarrier_spacing;
  return f;
}

double nmse(std::span<const CsiTensor> pred, std::span<const CsiTensor> truth) {
  if (pred.size() != truth.size() || pred.empty())
    throw std::invalid_argument("nmse: lists must be nonempty and equal length");
  double acc = 0.0;
  std::size_t terms = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const CsiTensor& p = pred[i];
    const CsiTensor& h = truth[i];
    if (!p.same_shape(h)) throw std::invalid_argument("nmse: shape mismatch");
    for (std::size_t c = 0; c < h.n_c; ++c) {
      const double denom = h.slice_norm_sq(c);
      if (denom == 0.0) throw std::invalid_argument("nmse: degenerate ground truth");
      double err = 0.0;
      for (std::size_t k = c * h.n_r * h.n_t; k < (c + 1) * h.n_r * h.n_t; ++k)
        err += std::norm(p.data[k] - h.data[k]);
      acc += err / denom;
      ++terms;
    }
  }
  return acc / static_cast<double>(terms);
}

double nmse(const CsiTensor& pred, const CsiTensor& truth) {
  return nmse(std::span<const CsiTensor>(&pred, 1), std::span<const CsiTensor>(&truth, 1));
}

CsiTensor corrupt_to_esnr(const CsiTensor& h, double esnr_db, std::uint64_t seed) {
  if (std::isinf(esnr_db) && esnr_db > 0) return h;
  const double h_norm_sq = h.norm_sq();
  if (h_norm_sq == 0.0) throw std::invalid_argument("corrupt_to_esnr: zero-norm input");

  Rng rng = Rng(seed).derive(0x45534e52ull);  // "ESNR" stream tag
  std::vector<cplx> noise(h.size());
  double n_norm_sq = 0.0;
  for (auto& v : noise) {
    v = cplx(rng.normal(), rng.normal());
    n_norm_sq += std::norm(v);
  }
  // Rescale the raw draw so the realized ESNR is exact, not just in expectation.
  const double target_noise_sq = h_norm_sq / std::pow(10.0, esnr_db / 10.0);
  const double scale = std::sqrt(target_noise_sq / n_norm_sq);

  CsiTensor out = h;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += scale * noise[i];
  return out;
}

double measure_esnr_db(const CsiTensor& estimate, const CsiTensor& truth) {
  double err = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) err += std::norm(estimate.data[i] - truth.data[i]);
  if (err == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(truth.norm_sq() / err);
}

CsiTensor quantize_f32(const CsiTensor& h) {
  CsiTensor out = h;
  for (auto& v : out.data)
    v = cplx(static_cast<double>(static_cast<float>(v.real())),
             static_cast<double>(static_cast<float>(v.imag())));
  return out;
}

}  // namespace ckmap
