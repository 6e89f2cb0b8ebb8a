#include "ckmap/adm.hpp"

#include <stdexcept>

namespace ckmap {

void PilotPattern::validate(std::size_t n_c, std::size_t n_t) const {
  if (!enabled) return;
  if (subcarrier_stride == 0 || antenna_stride == 0)
    throw std::invalid_argument("PilotPattern: strides must be positive");
  if (subcarrier_stride > n_c || antenna_stride > n_t)
    throw std::invalid_argument("PilotPattern: stride larger than dimension");
}

QueryTensor build_raw_queries(const CsiTensor& h_up_rx, std::size_t n_a, std::size_t n_s) {
  const PackedReal p = pack(h_up_rx);
  const std::size_t slice = p.data.size();  // 2*N_c*N_r*N_t
  ad::Tensor t({n_a * n_s, 2 * h_up_rx.n_c, h_up_rx.n_r, h_up_rx.n_t});
  for (std::size_t b = 0; b < n_a * n_s; ++b)
    std::copy(p.data.begin(), p.data.end(), t.data.begin() + b * slice);
  return QueryTensor{std::move(t), QueryStage::kRaw};
}

CsiTensor observe_partial_downlink(const CsiTensor& h_down_true, const PilotPattern& pattern,
                                   std::optional<double> esnr_db, std::uint64_t seed) {
  pattern.validate(h_down_true.n_c, h_down_true.n_t);
  CsiTensor out(h_down_true.n_c, h_down_true.n_r, h_down_true.n_t);
  if (!pattern.enabled) return out;  // all zeros

  const CsiTensor& src =
      esnr_db ? corrupt_to_esnr(h_down_true, *esnr_db, seed) : h_down_true;
  CsiTensor corrupted_holder;  // keeps the temporary alive when corrupting
  const CsiTensor* s = &src;
  if (esnr_db) {
    corrupted_holder = src;
    s = &corrupted_holder;
  }
  for (std::size_t c = 0; c < out.n_c; c += pattern.subcarrier_stride)
    for (std::size_t r = 0; r < out.n_r; ++r)
      for (std::size_t t = 0; t < out.n_t; t += pattern.antenna_stride)
        out.at(c, r, t) = s->at(c, r, t);
  return out;
}

IndicatorSet build_indicators(const RaySet& rays, const RadiatorGrid& grid,
                              const CsiTensor& h_part) {
  const std::size_t n_a = rays.directions.size();
  if (grid.n_a != n_a) throw std::invalid_argument("build_indicators: ray/grid mismatch");
  const std::size_t n_s = grid.n_s;
  const std::size_t n_c = h_part.n_c, n_r = h_part.n_r, n_t = h_part.n_t;
  const std::size_t crt = n_r * n_t;

  IndicatorSet ind;

  ind.xi_ang = ad::Tensor({n_a * n_s, 3, n_r, n_t});
  for (std::size_t i = 0; i < n_a; ++i) {
    const Vec3& w = rays.directions[i];
    const double comp[3] = {w.x, w.y, w.z};
    for (std::size_t j = 0; j < n_s; ++j) {
      const std::size_t b = i * n_s + j;
      for (std::size_t k = 0; k < 3; ++k)
        for (std::size_t e = 0; e < crt; ++e)
          ind.xi_ang.data[(b * 3 + k) * crt + e] = comp[k];
    }
  }

  const PackedReal p = pack(h_part);
  ind.xi_ch = ad::Tensor({n_a * n_s, 2 * n_c, n_r, n_t});
  for (std::size_t b = 0; b < n_a * n_s; ++b)
    std::copy(p.data.begin(), p.data.end(), ind.xi_ch.data.begin() + b * p.data.size());

  ind.xi_rad = ad::Tensor({n_a, n_s, 2 * n_c, crt});
  for (std::size_t i = 0; i < n_a; ++i)
    for (std::size_t j = 0; j < n_s; ++j) {
      const double d = grid.delta(i, j);
      const std::size_t base = (i * n_s + j) * 2 * n_c * crt;
      for (std::size_t k = 0; k < 2 * n_c * crt; ++k) ind.xi_rad.data[base + k] = d;
    }

  return ind;
}

DeformModule::DeformModule(ParamStore& ps, std::size_t n_a, std::size_t n_s, std::size_t n_c,
                           std::size_t n_r, std::size_t n_t)
    : n_a_(n_a), n_s_(n_s), n_c_(n_c), n_r_(n_r), n_t_(n_t) {
  // Stage 1 maps (4N_c+3) concat channels back to 2N_c; stage 2 maps 3N_s
  // radial channels back to N_s. Final convs start at zero (identity module).
  ang1_ = make_conv(ps, "adm.ang1", 4 * n_c + 3, 2 * n_c, 3);
  ang2_ = make_conv(ps, "adm.ang2", 2 * n_c, 2 * n_c, 3, /*zero_init=*/true);
  rad1_ = make_conv(ps, "adm.rad1", 3 * n_s, n_s, 3);
  rad2_ = make_conv(ps, "adm.rad2", n_s, n_s, 3, /*zero_init=*/true);
}

ad::Var DeformModule::operator()(const ad::Var& q_raw, const IndicatorSet& ind,
                                 DeformShapes* shapes) const {
  const ad::Shape expect{n_a_ * n_s_, 2 * n_c_, n_r_, n_t_};
  if (q_raw.shape() != expect) throw std::invalid_argument("DeformModule: bad query shape");
  if (ind.xi_ang.shape != ad::Shape{n_a_ * n_s_, 3, n_r_, n_t_} ||
      ind.xi_ch.shape != expect ||
      ind.xi_rad.shape != ad::Shape{n_a_, n_s_, 2 * n_c_, n_r_ * n_t_})
    throw std::invalid_argument("DeformModule: bad indicator shape");

  ad::Var xi_ch = ad::constant(ind.xi_ch);
  ad::Var xi_ang = ad::constant(ind.xi_ang);
  ad::Var xi_rad = ad::constant(ind.xi_rad);

  // Stage 1: angular refinement on the channel axis.
  ad::Var cat1 = ad::concat({q_raw, xi_ch, xi_ang}, 1);
  if (shapes) shapes->concat_stage1 = cat1.shape();
  ad::Var q_ang = ad::add(ang2_(ad::gelu(ang1_(cat1))), q_raw);
  if (shapes) shapes->q_ang = q_ang.shape();

  // Stage 2: radial refinement; the radial axis becomes the channel axis.
  ad::Var q_r = ad::reshape(q_ang, {n_a_, n_s_, 2 * n_c_, n_r_ * n_t_});
  ad::Var ch_r = ad::reshape(xi_ch, {n_a_, n_s_, 2 * n_c_, n_r_ * n_t_});
  ad::Var cat2 = ad::concat({q_r, ch_r, xi_rad}, 1);
  if (shapes) shapes->concat_stage2 = cat2.shape();
  ad::Var q_rad = ad::add(rad2_(ad::gelu(rad1_(cat2))), q_r);

  ad::Var q = ad::reshape(q_rad, expect);
  if (shapes) shapes->q_final = q.shape();
  return q;
}

QueryTensor DeformModule::deform(const QueryTensor& q_raw, const IndicatorSet& ind,
                                 DeformShapes* shapes) const {
  ad::Var q = (*this)(ad::constant(q_raw.data), ind, shapes);
  return QueryTensor{q.value(), QueryStage::kFinal};
}

}  // namespace ckmap
