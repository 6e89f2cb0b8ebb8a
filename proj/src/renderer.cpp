#include "ckmap/renderer.hpp"

#include <cmath>
#include <stdexcept>

namespace ckmap {

namespace {

/// Shared forward accumulation. Layout: per-radiator-major (b, e) with
/// b = i*n_s + j flattened radiators and e over (c, r, t) entries. Radiator
/// j = 0 is nearest the UE. Parallel over entries; the ray sum runs in fixed
/// order so results are bit-stable for any thread count.
void render_forward(std::size_t n_a, std::size_t n_s, std::size_t entries, const double* sigma,
                    const double* c_re, const double* c_im, const double* deltas, double* out_re,
                    double* out_im) {
#pragma omp parallel for schedule(static)
  for (std::int64_t e = 0; e < static_cast<std::int64_t>(entries); ++e) {
    double acc_re = 0.0, acc_im = 0.0;
    for (std::size_t i = 0; i < n_a; ++i) {
      double trans = 1.0;
      for (std::size_t j = 0; j < n_s; ++j) {
        const std::size_t b = i * n_s + j;
        const std::size_t k = b * entries + static_cast<std::size_t>(e);
        const double alpha = -std::expm1(-sigma[k] * deltas[b]);
        const double w = alpha * trans;
        acc_re += w * c_re[k];
        acc_im += w * c_im[k];
        trans *= 1.0 - alpha;
      }
    }
    out_re[e] = acc_re;
    out_im[e] = acc_im;
  }
}

}  // namespace

void RadianceOutputs::validate(const RadiatorGrid& grid) const {
  if (n_a != grid.n_a || n_s != grid.n_s)
    throw std::invalid_argument("RadianceOutputs: shape mismatch with grid");
  if (sigma.size() != n_a * n_s * n_c * n_r * n_t || coeffs.size() != sigma.size())
    throw std::invalid_argument("RadianceOutputs: storage size mismatch");
  for (double s : sigma)
    if (!(s >= 0.0) || !std::isfinite(s))
      throw std::invalid_argument("RadianceOutputs: sigma must be finite and nonnegative");
}

double absorption(double sigma, double delta) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("absorption: sigma must be >= 0");
  if (!(delta > 0.0)) throw std::invalid_argument("absorption: delta must be > 0");
  return -std::expm1(-sigma * delta);
}

std::vector<double> transmittance(const std::vector<double>& alphas) {
  std::vector<double> t(alphas.size());
  double running = 1.0;
  for (std::size_t j = 0; j < alphas.size(); ++j) {
    if (!(alphas[j] >= 0.0) || !(alphas[j] < 1.0))
      throw std::invalid_argument("transmittance: alpha must be in [0, 1)");
    t[j] = running;
    running *= 1.0 - alphas[j];
  }
  return t;
}

CsiTensor render_channel(const RadiatorGrid& grid, const RadianceOutputs& out) {
  out.validate(grid);
  const std::size_t entries = out.n_c * out.n_r * out.n_t;
  const std::size_t total = out.sigma.size();
  std::vector<double> c_re(total), c_im(total);
  for (std::size_t k = 0; k < total; ++k) {
    c_re[k] = out.coeffs[k].real();
    c_im[k] = out.coeffs[k].imag();
  }
  std::vector<double> h_re(entries), h_im(entries);
  render_forward(out.n_a, out.n_s, entries, out.sigma.data(), c_re.data(), c_im.data(),
                 grid.deltas.data(), h_re.data(), h_im.data());

  CsiTensor h(out.n_c, out.n_r, out.n_t);
  for (std::size_t e = 0; e < entries; ++e) h.data[e] = cplx(h_re[e], h_im[e]);
  return h;
}

std::vector<cplx> render_contributions(const RadiatorGrid& grid, const RadianceOutputs& out) {
  out.validate(grid);
  const std::size_t entries = out.n_c * out.n_r * out.n_t;
  std::vector<cplx> contrib(out.sigma.size());
  for (std::size_t e = 0; e < entries; ++e) {
    for (std::size_t i = 0; i < out.n_a; ++i) {
      double trans = 1.0;
      for (std::size_t j = 0; j < out.n_s; ++j) {
        const std::size_t b = i * out.n_s + j;
        const std::size_t k = b * entries + e;
        const double alpha = -std::expm1(-out.sigma[k] * grid.deltas[b]);
        contrib[k] = alpha * trans * out.coeffs[k];
        trans *= 1.0 - alpha;
      }
    }
  }
  return contrib;
}

std::vector<cplx> render_received(const RadiatorGrid& grid, const RadianceOutputs& out,
                                  const std::vector<cplx>& x) {
  if (x.size() != out.n_t) throw std::invalid_argument("render_received: x length mismatch");
  for (const cplx& v : x)
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
      throw std::invalid_argument("render_received: x must be finite");
  const CsiTensor h = render_channel(grid, out);
  std::vector<cplx> y(out.n_c * out.n_r);
  for (std::size_t c = 0; c < out.n_c; ++c)
    for (std::size_t r = 0; r < out.n_r; ++r) {
      cplx acc = 0.0;
      for (std::size_t t = 0; t < out.n_t; ++t) acc += h.at(c, r, t) * x[t];
      y[c * out.n_r + r] = acc;
    }
  return y;
}

std::vector<cplx> aggregating_coeff(const std::vector<cplx>& s, const std::vector<cplx>& x,
                                    double tx_power) {
  if (!(tx_power > 0.0)) throw std::invalid_argument("aggregating_coeff: power must be > 0");
  double xhx = 0.0;
  for (const cplx& v : x) xhx += std::norm(v);
  if (std::abs(xhx - tx_power) > 1e-9 * tx_power)
    throw std::invalid_argument("aggregating_coeff: power must equal x^H x");
  std::vector<cplx> c(s.size() * x.size());
  for (std::size_t r = 0; r < s.size(); ++r)
    for (std::size_t t = 0; t < x.size(); ++t)
      c[r * x.size() + t] = s[r] * std::conj(x[t]) / tx_power;
  return c;
}

namespace ad {

Var render_volume(const Var& sigma, const Var& c_packed, const std::vector<double>& deltas,
                  std::size_t n_a, std::size_t n_s) {
  const Shape& ss = sigma.shape();
  const Shape& cs = c_packed.shape();
  if (ss.size() != 4 || cs.size() != 4 || ss[0] != n_a * n_s || cs[0] != ss[0] ||
      cs[1] != 2 * ss[1] || cs[2] != ss[2] || cs[3] != ss[3])
    throw std::invalid_argument("render_volume: shape mismatch");
  if (deltas.size() != n_a * n_s)
    throw std::invalid_argument("render_volume: deltas size mismatch");

  const std::size_t n_c = ss[1], n_r = ss[2], n_t = ss[3];
  const std::size_t entries = n_c * n_r * n_t;
  const std::size_t crt = n_r * n_t;
  const std::size_t B = n_a * n_s;

  // Repack C into per-radiator-major separated re/im planes.
  std::vector<double> c_re(B * entries), c_im(B * entries);
  const double* cp = c_packed.value().data.data();
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < n_c; ++c)
      for (std::size_t k = 0; k < crt; ++k) {
        c_re[b * entries + c * crt + k] = cp[(b * 2 * n_c + c) * crt + k];
        c_im[b * entries + c * crt + k] = cp[(b * 2 * n_c + n_c + c) * crt + k];
      }

  std::vector<double> h_re(entries), h_im(entries);
  render_forward(n_a, n_s, entries, sigma.value().data.data(), c_re.data(), c_im.data(),
                 deltas.data(), h_re.data(), h_im.data());

  Tensor out({2 * n_c, n_r, n_t});
  for (std::size_t c = 0; c < n_c; ++c)
    for (std::size_t k = 0; k < crt; ++k) {
      out.data[c * crt + k] = h_re[c * crt + k];
      out.data[(n_c + c) * crt + k] = h_im[c * crt + k];
    }

  std::vector<double> dvec = deltas;
  return make_op(
      {sigma, c_packed}, std::move(out),
      [n_a, n_s, n_c, n_r, n_t, entries, crt, B, dvec](Node& n) {
        if (n.grad.data.empty()) return;
        const Tensor& sv = n.parents[0]->value;
        const Tensor& cv = n.parents[1]->value;
        const bool need_sigma = n.parents[0]->requires_grad;
        const bool need_c = n.parents[1]->requires_grad;
        if (!need_sigma && !need_c) return;
        Tensor* gs = need_sigma ? &n.parents[0]->ensure_grad() : nullptr;
        Tensor* gc = need_c ? &n.parents[1]->ensure_grad() : nullptr;

        const double* grad = n.grad.data.data();
        const double* sd = sv.data.data();
        const double* cd = cv.data.data();

        // Per (entry, ray): forward alpha/T sweep, then a reverse suffix sweep.
        // dL/dsigma_j = delta_j * ((1-alpha_j) T_j D_j - sum_{j'>j} alpha T D)
        // dL/dC_j = alpha_j T_j * gradH, with D_j = Re/Im-weighted gradient.
#pragma omp parallel
        {
          std::vector<double> alpha(n_s), trans(n_s);
#pragma omp for schedule(static)
          for (std::int64_t e = 0; e < static_cast<std::int64_t>(entries); ++e) {
            const std::size_t c = static_cast<std::size_t>(e) / crt;
            const std::size_t k_sp = static_cast<std::size_t>(e) % crt;
            const double g_re = grad[c * crt + k_sp];
            const double g_im = grad[(n_c + c) * crt + k_sp];
            if (g_re == 0.0 && g_im == 0.0) continue;
            for (std::size_t i = 0; i < n_a; ++i) {
              double t_run = 1.0;
              for (std::size_t j = 0; j < n_s; ++j) {
                const std::size_t b = i * n_s + j;
                const std::size_t k = b * entries + static_cast<std::size_t>(e);
                alpha[j] = -std::expm1(-sd[k] * dvec[b]);
                trans[j] = t_run;
                t_run *= 1.0 - alpha[j];
              }
              double suffix = 0.0;
              for (std::size_t jr = n_s; jr-- > 0;) {
                const std::size_t b = i * n_s + jr;
                const std::size_t k = b * entries + static_cast<std::size_t>(e);
                const std::size_t re_idx = (b * 2 * n_c + c) * crt + k_sp;
                const std::size_t im_idx = (b * 2 * n_c + n_c + c) * crt + k_sp;
                const double w = alpha[jr] * trans[jr];
                const double dj = g_re * cd[re_idx] + g_im * cd[im_idx];
                if (gc) {
                  gc->data[re_idx] += w * g_re;
                  gc->data[im_idx] += w * g_im;
                }
                if (gs)
                  gs->data[k] += dvec[b] * ((1.0 - alpha[jr]) * trans[jr] * dj - suffix);
                suffix += w * dj;
              }
            }
          }
        }
      });
}

}  // namespace ad

}  // namespace ckmap
