#include "ckmap/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <unordered_set>

namespace ckmap::ad {

namespace {

std::atomic<std::uint64_t> g_next_id{1};

NodePtr new_node(Tensor value, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  n->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  return n;
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a.value().same_shape(b.value()))
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

}  // namespace

bool Tensor::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

Var constant(Tensor value) { return Var{new_node(std::move(value), false)}; }

Var parameter(Tensor value) { return Var{new_node(std::move(value), true)}; }

Var make_op(std::vector<Var> inputs, Tensor value, std::function<void(Node&)> backprop) {
  bool req = false;
  for (const Var& v : inputs) req = req || v.node->requires_grad;
  auto n = new_node(std::move(value), req);
  if (req) {
    n->parents.reserve(inputs.size());
    for (Var& v : inputs) n->parents.push_back(v.node);
    n->backprop = std::move(backprop);
  }
  return Var{n};
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += b.value()[i];
  return make_op({a, b}, std::move(out), [](Node& n) {
    if (n.grad.data.empty()) return;
    for (int p = 0; p < 2; ++p)
      if (n.parents[p]->requires_grad) {
        Tensor& g = n.parents[p]->ensure_grad();
        for (std::size_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i];
      }
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= b.value()[i];
  return make_op({a, b}, std::move(out), [](Node& n) {
    if (n.grad.data.empty()) return;
    if (n.parents[0]->requires_grad) {
      Tensor& g = n.parents[0]->ensure_grad();
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i];
    }
    if (n.parents[1]->requires_grad) {
      Tensor& g = n.parents[1]->ensure_grad();
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] -= n.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= b.value()[i];
  return make_op({a, b}, std::move(out), [](Node& n) {
    if (n.grad.data.empty()) return;
    const Tensor& av = n.parents[0]->value;
    const Tensor& bv = n.parents[1]->value;
    if (n.parents[0]->requires_grad) {
      Tensor& g = n.parents[0]->ensure_grad();
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i] * bv[i];
    }
    if (n.parents[1]->requires_grad) {
      Tensor& g = n.parents[1]->ensure_grad();
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i] * av[i];
    }
  });
}

Var scale(const Var& a, double s) {
  Tensor out = a.value();
  for (double& v : out.data) v *= s;
  return make_op({a}, std::move(out), [s](Node& n) {
    if (n.grad.data.empty() || !n.parents[0]->requires_grad) return;
    Tensor& g = n.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += s * n.grad[i];
  });
}

Var add_scalar(const Var& a, double s) {
  Tensor out = a.value();
  for (double& v : out.data) v += s;
  return make_op({a}, std::move(out), [](Node& n) {
    if (n.grad.data.empty() || !n.parents[0]->requires_grad) return;
    Tensor& g = n.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i];
  });
}

Var gelu(const Var& x) {
  Tensor out = x.value();
  for (double& v : out.data) v = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
  return make_op({x}, std::move(out), [](Node& n) {
    if (n.grad.data.empty() || !n.parents[0]->requires_grad) return;
    const Tensor& xv = n.parents[0]->value;
    Tensor& g = n.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.numel(); ++i) {
      const double v = xv[i];
      const double phi = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
      g[i] += n.grad[i] * (phi + v * pdf);
    }
  });
}

Var softplus(const Var& x) {
  Tensor out = x.value();
  for (double& v : out.data) v = std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v)));
  return make_op({x}, std::move(out), [](Node& n) {
    if (n.grad.data.empty() || !n.parents[0]->requires_grad) return;
    const Tensor& xv = n.parents[0]->value;
    Tensor& g = n.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.numel(); ++i)
      g[i] += n.grad[i] / (1.0 + std::exp(-xv[i]));
  });
}

Var sum(const Var& x) {
  double s = 0.0;
  for (double v : x.value().data) s += v;
  return make_op({x}, Tensor::scalar(s), [](Node& n) {
    if (n.grad.data.empty() || !n.parents[0]->requires_grad) return;
    Tensor& g = n.parents[0]->ensure_grad();
    const double gs = n.grad[0];
    for (double& v : g.data) v += gs;
  });
}

Var reshape(const Var& x, Shape new_shape) {
  if (shape_numel(new_shape) != x.value().numel())
    throw std::invalid_argument("reshape: numel mismatch");
  Tensor out(std::move(new_shape), x.value().data);
  return make_op({x}, std::move(out), [](Node& n) {
    if (n.grad.data.empty() || !n.parents[0]->requires_grad) return;
    Tensor& g = n.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i];
  });
}

namespace {

// Concat/slice treat the tensor as (outer, axis, inner).
void axis_spans(const Shape& s, std::size_t axis, std::size_t& outer, std::size_t& inner) {
  outer = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  inner = 1;
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
}

}  // namespace

Var concat(const std::vector<Var>& xs, std::size_t axis) {
  if (xs.empty()) throw std::invalid_argument("concat: no inputs");
  const Shape& base = xs[0].shape();
  if (axis >= base.size()) throw std::invalid_argument("concat: bad axis");
  std::size_t total_axis = 0;
  for (const Var& v : xs) {
    const Shape& s = v.shape();
    if (s.size() != base.size()) throw std::invalid_argument("concat: rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i)
      if (i != axis && s[i] != base[i]) throw std::invalid_argument("concat: shape mismatch");
    total_axis += s[axis];
  }
  Shape out_shape = base;
  out_shape[axis] = total_axis;

  std::size_t outer, inner;
  axis_spans(out_shape, axis, outer, inner);
  Tensor out(out_shape);
  std::size_t offset = 0;
  for (const Var& v : xs) {
    const std::size_t len = v.shape()[axis];
    const Tensor& src = v.value();
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(&src.data[o * len * inner], len * inner,
                  &out.data[(o * total_axis + offset) * inner]);
    offset += len;
  }

  const std::size_t ax = axis;
  return make_op(xs, std::move(out), [ax](Node& n) {
    if (n.grad.data.empty()) return;
    std::size_t outer, inner;
    axis_spans(n.value.shape, ax, outer, inner);
    const std::size_t total_axis = n.value.shape[ax];
    std::size_t offset = 0;
    for (auto& parent : n.parents) {
      const std::size_t len = parent->value.shape[ax];
      if (parent->requires_grad) {
        Tensor& g = parent->ensure_grad();
        for (std::size_t o = 0; o < outer; ++o) {
          const double* src = &n.grad.data[(o * total_axis + offset) * inner];
          double* dst = &g.data[o * len * inner];
          for (std::size_t i = 0; i < len * inner; ++i) dst[i] += src[i];
        }
      }
      offset += len;
    }
  });
}

Var slice(const Var& x, std::size_t axis, std::size_t start, std::size_t len) {
  const Shape& s = x.shape();
  if (axis >= s.size() || start + len > s[axis])
    throw std::invalid_argument("slice: out of range");
  Shape out_shape = s;
  out_shape[axis] = len;
  std::size_t outer, inner;
  axis_spans(s, axis, outer, inner);
  const std::size_t full = s[axis];

  Tensor out(out_shape);
  for (std::size_t o = 0; o < outer; ++o)
    std::copy_n(&x.value().data[(o * full + start) * inner], len * inner,
                &out.data[o * len * inner]);

  return make_op({x}, std::move(out), [axis, start, len](Node& n) {
    if (n.grad.data.empty() || !n.parents[0]->requires_grad) return;
    const Shape& ps = n.parents[0]->value.shape;
    std::size_t outer, inner;
    axis_spans(ps, axis, outer, inner);
    const std::size_t full = ps[axis];
    Tensor& g = n.parents[0]->ensure_grad();
    for (std::size_t o = 0; o < outer; ++o) {
      const double* src = &n.grad.data[o * len * inner];
      double* dst = &g.data[(o * full + start) * inner];
      for (std::size_t i = 0; i < len * inner; ++i) dst[i] += src[i];
    }
  });
}

namespace {

struct ConvDims {
  std::size_t b, cin, h, w, cout, kh, kw, ph, pw;
};

ConvDims conv_dims(const Var& x, const Var& wt) {
  const Shape& xs = x.shape();
  const Shape& ws = wt.shape();
  if (xs.size() != 4 || ws.size() != 4) throw std::invalid_argument("conv2d: rank must be 4");
  if (xs[1] != ws[1]) throw std::invalid_argument("conv2d: channel mismatch");
  return ConvDims{xs[0], xs[1], xs[2], xs[3], ws[0], ws[2], ws[3], ws[2] / 2, ws[3] / 2};
}

}  // namespace

Var conv2d(const Var& x, const Var& w, const Var& b) {
  const ConvDims d = conv_dims(x, w);
  if (b.shape() != Shape{d.cout}) throw std::invalid_argument("conv2d: bias shape");

  Tensor out({d.b, d.cout, d.h, d.w});
  const double* xd = x.value().data.data();
  const double* wd = w.value().data.data();
  const double* bd = b.value().data.data();
  double* od = out.data.data();
  const std::size_t x_plane = d.h * d.w;
  const std::size_t x_batch = d.cin * x_plane;
  const std::size_t o_batch = d.cout * x_plane;

#pragma omp parallel for schedule(static)
  for (std::int64_t bi = 0; bi < static_cast<std::int64_t>(d.b); ++bi) {
    for (std::size_t co = 0; co < d.cout; ++co) {
      double* oplane = od + bi * o_batch + co * x_plane;
      for (std::size_t i = 0; i < x_plane; ++i) oplane[i] = bd[co];
      for (std::size_t ci = 0; ci < d.cin; ++ci) {
        const double* xplane = xd + bi * x_batch + ci * x_plane;
        const double* wk = wd + (co * d.cin + ci) * d.kh * d.kw;
        for (std::size_t kh = 0; kh < d.kh; ++kh) {
          // valid output rows for this kernel row: ih = oh + kh - ph in [0, h)
          const std::ptrdiff_t roff = static_cast<std::ptrdiff_t>(kh) -
                                      static_cast<std::ptrdiff_t>(d.ph);
          const std::size_t oh_lo = roff < 0 ? static_cast<std::size_t>(-roff) : 0;
          const std::size_t oh_hi =
              std::min(d.h, roff > 0 ? d.h - static_cast<std::size_t>(roff) : d.h);
          for (std::size_t kw = 0; kw < d.kw; ++kw) {
            const double wv = wk[kh * d.kw + kw];
            const std::ptrdiff_t coff = static_cast<std::ptrdiff_t>(kw) -
                                        static_cast<std::ptrdiff_t>(d.pw);
            const std::size_t ow_lo = coff < 0 ? static_cast<std::size_t>(-coff) : 0;
            const std::size_t ow_hi =
                std::min(d.w, coff > 0 ? d.w - static_cast<std::size_t>(coff) : d.w);
            for (std::size_t oh = oh_lo; oh < oh_hi; ++oh) {
              const double* xr =
                  xplane + static_cast<std::size_t>(static_cast<std::ptrdiff_t>(oh) + roff) * d.w;
              double* orow = oplane + oh * d.w;
              for (std::size_t ow = ow_lo; ow < ow_hi; ++ow)
                orow[ow] += wv * xr[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(ow) +
                                                             coff)];
            }
          }
        }
      }
    }
  }

  return make_op({x, w, b}, std::move(out), [d](Node& n) {
    if (n.grad.data.empty()) return;
    const Tensor& xv = n.parents[0]->value;
    const Tensor& wv = n.parents[1]->value;
    const std::size_t plane = d.h * d.w;
    const std::size_t x_batch = d.cin * plane;
    const std::size_t o_batch = d.cout * plane;
    const double* gd = n.grad.data.data();

    if (n.parents[0]->requires_grad) {
      Tensor& gx = n.parents[0]->ensure_grad();
      double* gxd = gx.data.data();
      const double* wd = wv.data.data();
#pragma omp parallel for schedule(static)
      for (std::int64_t bi = 0; bi < static_cast<std::int64_t>(d.b); ++bi) {
        for (std::size_t co = 0; co < d.cout; ++co) {
          const double* gplane = gd + bi * o_batch + co * plane;
          for (std::size_t ci = 0; ci < d.cin; ++ci) {
            double* gxplane = gxd + bi * x_batch + ci * plane;
            const double* wk = wd + (co * d.cin + ci) * d.kh * d.kw;
            for (std::size_t kh = 0; kh < d.kh; ++kh) {
              const std::ptrdiff_t roff = static_cast<std::ptrdiff_t>(kh) -
                                          static_cast<std::ptrdiff_t>(d.ph);
              const std::size_t oh_lo = roff < 0 ? static_cast<std::size_t>(-roff) : 0;
              const std::size_t oh_hi =
                  std::min(d.h, roff > 0 ? d.h - static_cast<std::size_t>(roff) : d.h);
              for (std::size_t kw = 0; kw < d.kw; ++kw) {
                const double wvv = wk[kh * d.kw + kw];
                if (wvv == 0.0) continue;
                const std::ptrdiff_t coff = static_cast<std::ptrdiff_t>(kw) -
                                            static_cast<std::ptrdiff_t>(d.pw);
                const std::size_t ow_lo = coff < 0 ? static_cast<std::size_t>(-coff) : 0;
                const std::size_t ow_hi =
                    std::min(d.w, coff > 0 ? d.w - static_cast<std::size_t>(coff) : d.w);
                for (std::size_t oh = oh_lo; oh < oh_hi; ++oh) {
                  const double* grow = gplane + oh * d.w;
                  double* gxrow =
                      gxplane + static_cast<std::size_t>(static_cast<std::ptrdiff_t>(oh) + roff) *
                                    d.w;
                  for (std::size_t ow = ow_lo; ow < ow_hi; ++ow)
                    gxrow[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(ow) + coff)] +=
                        wvv * grow[ow];
                }
              }
            }
          }
        }
      }
    }

    if (n.parents[1]->requires_grad) {
      Tensor& gw = n.parents[1]->ensure_grad();
      double* gwd = gw.data.data();
      const double* xd = xv.data.data();
      // One thread owns each output channel: batch loop stays in canonical
      // order, so results do not depend on the thread count.
#pragma omp parallel for schedule(static)
      for (std::int64_t co = 0; co < static_cast<std::int64_t>(d.cout); ++co) {
        for (std::size_t ci = 0; ci < d.cin; ++ci) {
          double* gwk = gwd + (co * d.cin + ci) * d.kh * d.kw;
          for (std::size_t kh = 0; kh < d.kh; ++kh) {
            const std::ptrdiff_t roff = static_cast<std::ptrdiff_t>(kh) -
                                        static_cast<std::ptrdiff_t>(d.ph);
            const std::size_t oh_lo = roff < 0 ? static_cast<std::size_t>(-roff) : 0;
            const std::size_t oh_hi =
                std::min(d.h, roff > 0 ? d.h - static_cast<std::size_t>(roff) : d.h);
            for (std::size_t kw = 0; kw < d.kw; ++kw) {
              const std::ptrdiff_t coff = static_cast<std::ptrdiff_t>(kw) -
                                          static_cast<std::ptrdiff_t>(d.pw);
              const std::size_t ow_lo = coff < 0 ? static_cast<std::size_t>(-coff) : 0;
              const std::size_t ow_hi =
                  std::min(d.w, coff > 0 ? d.w - static_cast<std::size_t>(coff) : d.w);
              double acc = 0.0;
              for (std::size_t bi = 0; bi < d.b; ++bi) {
                const double* gplane = gd + bi * o_batch + co * plane;
                const double* xplane = xd + bi * x_batch + ci * plane;
                for (std::size_t oh = oh_lo; oh < oh_hi; ++oh) {
                  const double* grow = gplane + oh * d.w;
                  const double* xrow =
                      xplane + static_cast<std::size_t>(static_cast<std::ptrdiff_t>(oh) + roff) *
                                   d.w;
                  for (std::size_t ow = ow_lo; ow < ow_hi; ++ow)
                    acc += grow[ow] *
                           xrow[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(ow) + coff)];
                }
              }
              gwk[kh * d.kw + kw] += acc;
            }
          }
        }
      }
    }

    if (n.parents[2]->requires_grad) {
      Tensor& gb = n.parents[2]->ensure_grad();
      for (std::size_t co = 0; co < d.cout; ++co) {
        double acc = 0.0;
        for (std::size_t bi = 0; bi < d.b; ++bi) {
          const double* gplane = gd + bi * o_batch + co * plane;
          for (std::size_t i = 0; i < plane; ++i) acc += gplane[i];
        }
        gb[co] += acc;
      }
    }
  });
}

Var linear(const Var& x, const Var& w, const Var& b) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  if (xs.size() != 2 || ws.size() != 2 || xs[1] != ws[1])
    throw std::invalid_argument("linear: shape mismatch");
  const std::size_t B = xs[0], in = xs[1], out_dim = ws[0];
  if (b.shape() != Shape{out_dim}) throw std::invalid_argument("linear: bias shape");

  Tensor out({B, out_dim});
  for (std::size_t i = 0; i < B; ++i) {
    const double* xr = &x.value().data[i * in];
    for (std::size_t o = 0; o < out_dim; ++o) {
      const double* wr = &w.value().data[o * in];
      double acc = b.value()[o];
      for (std::size_t k = 0; k < in; ++k) acc += xr[k] * wr[k];
      out.data[i * out_dim + o] = acc;
    }
  }

  return make_op({x, w, b}, std::move(out), [B, in, out_dim](Node& n) {
    if (n.grad.data.empty()) return;
    const Tensor& xv = n.parents[0]->value;
    const Tensor& wv = n.parents[1]->value;
    if (n.parents[0]->requires_grad) {
      Tensor& gx = n.parents[0]->ensure_grad();
      for (std::size_t i = 0; i < B; ++i)
        for (std::size_t o = 0; o < out_dim; ++o) {
          const double g = n.grad[i * out_dim + o];
          for (std::size_t k = 0; k < in; ++k) gx[i * in + k] += g * wv[o * in + k];
        }
    }
    if (n.parents[1]->requires_grad) {
      Tensor& gw = n.parents[1]->ensure_grad();
      for (std::size_t o = 0; o < out_dim; ++o)
        for (std::size_t i = 0; i < B; ++i) {
          const double g = n.grad[i * out_dim + o];
          for (std::size_t k = 0; k < in; ++k) gw[o * in + k] += g * xv[i * in + k];
        }
    }
    if (n.parents[2]->requires_grad) {
      Tensor& gb = n.parents[2]->ensure_grad();
      for (std::size_t o = 0; o < out_dim; ++o) {
        double acc = 0.0;
        for (std::size_t i = 0; i < B; ++i) acc += n.grad[i * out_dim + o];
        gb[o] += acc;
      }
    }
  });
}

Var group_norm(const Var& x, const Var& gamma, const Var& beta, std::size_t groups, double eps) {
  const Shape& xs = x.shape();
  if (xs.size() != 4) throw std::invalid_argument("group_norm: rank must be 4");
  const std::size_t B = xs[0], C = xs[1], plane = xs[2] * xs[3];
  if (C % groups != 0) throw std::invalid_argument("group_norm: groups must divide channels");
  if (gamma.shape() != Shape{C} || beta.shape() != Shape{C})
    throw std::invalid_argument("group_norm: affine shape mismatch");
  const std::size_t cpg = C / groups;
  const std::size_t m = cpg * plane;

  Tensor out(xs);
  Tensor stats({B, groups, 2});  // mean, inv_std per (batch, group)
  for (std::size_t bi = 0; bi < B; ++bi) {
    for (std::size_t g = 0; g < groups; ++g) {
      const std::size_t base = (bi * C + g * cpg) * plane;
      double mean = 0.0;
      for (std::size_t i = 0; i < m; ++i) mean += x.value()[base + i];
      mean /= static_cast<double>(m);
      double var = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        const double dv = x.value()[base + i] - mean;
        var += dv * dv;
      }
      var /= static_cast<double>(m);
      const double inv_std = 1.0 / std::sqrt(var + eps);
      stats.data[(bi * groups + g) * 2] = mean;
      stats.data[(bi * groups + g) * 2 + 1] = inv_std;
      for (std::size_t cc = 0; cc < cpg; ++cc) {
        const std::size_t c = g * cpg + cc;
        const double ga = gamma.value()[c], be = beta.value()[c];
        const std::size_t off = (bi * C + c) * plane;
        for (std::size_t i = 0; i < plane; ++i)
          out.data[off + i] = ga * (x.value()[off + i] - mean) * inv_std + be;
      }
    }
  }

  return make_op({x, gamma, beta}, std::move(out),
                 [B, C, plane, groups, cpg, m, stats](Node& n) {
    if (n.grad.data.empty()) return;
    const Tensor& xv = n.parents[0]->value;
    const Tensor& ga = n.parents[1]->value;
    const bool need_x = n.parents[0]->requires_grad;
    const bool need_g = n.parents[1]->requires_grad;
    const bool need_b = n.parents[2]->requires_grad;

    if (need_g || need_b) {
      Tensor* gg = need_g ? &n.parents[1]->ensure_grad() : nullptr;
      Tensor* gb = need_b ? &n.parents[2]->ensure_grad() : nullptr;
      for (std::size_t c = 0; c < C; ++c) {
        double sg = 0.0, sb = 0.0;
        const std::size_t g = c / cpg;
        for (std::size_t bi = 0; bi < B; ++bi) {
          const double mean = stats.data[(bi * groups + g) * 2];
          const double inv_std = stats.data[(bi * groups + g) * 2 + 1];
          const std::size_t off = (bi * C + c) * plane;
          for (std::size_t i = 0; i < plane; ++i) {
            const double xh = (xv[off + i] - mean) * inv_std;
            sg += n.grad[off + i] * xh;
            sb += n.grad[off + i];
          }
        }
        if (gg) gg->data[c] += sg;
        if (gb) gb->data[c] += sb;
      }
    }

    if (need_x) {
      Tensor& gx = n.parents[0]->ensure_grad();
      for (std::size_t bi = 0; bi < B; ++bi) {
        for (std::size_t g = 0; g < groups; ++g) {
          const double mean = stats.data[(bi * groups + g) * 2];
          const double inv_std = stats.data[(bi * groups + g) * 2 + 1];
          const std::size_t base = (bi * C + g * cpg) * plane;
          // dxhat = dy * gamma; two reduced terms over the group
          double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
          for (std::size_t cc = 0; cc < cpg; ++cc) {
            const std::size_t c = g * cpg + cc;
            const std::size_t off = (bi * C + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              const double dxh = n.grad[off + i] * ga[c];
              const double xh = (xv[off + i] - mean) * inv_std;
              sum_dxhat += dxh;
              sum_dxhat_xhat += dxh * xh;
            }
          }
          const double inv_m = 1.0 / static_cast<double>(m);
          for (std::size_t cc = 0; cc < cpg; ++cc) {
            const std::size_t c = g * cpg + cc;
            const std::size_t off = (bi * C + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              const double dxh = n.grad[off + i] * ga[c];
              const double xh = (xv[off + i] - mean) * inv_std;
              gx[off + i] +=
                  inv_std * (dxh - inv_m * sum_dxhat - xh * inv_m * sum_dxhat_xhat);
            }
          }
        }
      }
    }
  });
}

Var mean_pool_spatial(const Var& x) {
  const Shape& xs = x.shape();
  if (xs.size() != 4) throw std::invalid_argument("mean_pool_spatial: rank must be 4");
  const std::size_t B = xs[0], C = xs[1], plane = xs[2] * xs[3];
  Tensor out({B, C});
  for (std::size_t i = 0; i < B * C; ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < plane; ++k) acc += x.value()[i * plane + k];
    out.data[i] = acc / static_cast<double>(plane);
  }
  return make_op({x}, std::move(out), [plane](Node& n) {
    if (n.grad.data.empty() || !n.parents[0]->requires_grad) return;
    Tensor& gx = n.parents[0]->ensure_grad();
    const double inv = 1.0 / static_cast<double>(plane);
    for (std::size_t i = 0; i < n.grad.numel(); ++i) {
      const double g = n.grad[i] * inv;
      for (std::size_t k = 0; k < plane; ++k) gx[i * plane + k] += g;
    }
  });
}

Var channel_affine(const Var& x, const Var& w, const Var& b) {
  const Shape& xs = x.shape();
  if (xs.size() != 4) throw std::invalid_argument("channel_affine: rank must be 4");
  const std::size_t B = xs[0], C = xs[1], plane = xs[2] * xs[3];
  if (w.shape() != Shape{B, C} || b.shape() != Shape{B, C})
    throw std::invalid_argument("channel_affine: modulation shape mismatch");

  Tensor out(xs);
  for (std::size_t i = 0; i < B * C; ++i) {
    const double wv = w.value()[i], bv = b.value()[i];
    for (std::size_t k = 0; k < plane; ++k)
      out.data[i * plane + k] = wv * x.value()[i * plane + k] + bv;
  }
  return make_op({x, w, b}, std::move(out), [plane](Node& n) {
    if (n.grad.data.empty()) return;
    const Tensor& xv = n.parents[0]->value;
    const Tensor& wv = n.parents[1]->value;
    const std::size_t bc = wv.numel();
    if (n.parents[0]->requires_grad) {
      Tensor& gx = n.parents[0]->ensure_grad();
      for (std::size_t i = 0; i < bc; ++i)
        for (std::size_t k = 0; k < plane; ++k)
          gx[i * plane + k] += n.grad[i * plane + k] * wv[i];
    }
    if (n.parents[1]->requires_grad) {
      Tensor& gw = n.parents[1]->ensure_grad();
      for (std::size_t i = 0; i < bc; ++i) {
        double acc = 0.0;
        for (std::size_t k = 0; k < plane; ++k) acc += n.grad[i * plane + k] * xv[i * plane + k];
        gw[i] += acc;
      }
    }
    if (n.parents[2]->requires_grad) {
      Tensor& gb = n.parents[2]->ensure_grad();
      for (std::size_t i = 0; i < bc; ++i) {
        double acc = 0.0;
        for (std::size_t k = 0; k < plane; ++k) acc += n.grad[i * plane + k];
        gb[i] += acc;
      }
    }
  });
}

void backward(const Var& root) {
  if (root.value().numel() != 1)
    throw std::invalid_argument("backward: root must be a scalar");

  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<Node*> stack{root.node.get()};
  seen.insert(root.node.get());
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (const NodePtr& p : n->parents)
      if (seen.insert(p.get()).second) stack.push_back(p.get());
  }
  std::sort(order.begin(), order.end(), [](Node* a, Node* b) { return a->id > b->id; });

  root.node->ensure_grad();
  root.node->grad.data[0] += 1.0;
  for (Node* n : order)
    if (n->requires_grad && n->backprop) n->backprop(*n);
}

void zero_grad(const std::vector<Var>& params) {
  for (const Var& p : params)
    if (!p.node->grad.data.empty())
      std::fill(p.node->grad.data.begin(), p.node->grad.data.end(), 0.0);
}

}  // namespace ckmap::ad
