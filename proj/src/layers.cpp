#include "ckmap/layers.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ckmap {

ad::Var ParamStore::insert(const std::string& name, ad::Tensor value) {
  for (const auto& [n, v] : items_)
    if (n == name) throw std::invalid_argument("ParamStore: duplicate name " + name);
  ad::Var v = ad::parameter(std::move(value));
  items_.emplace_back(name, v);
  return v;
}

ad::Var ParamStore::fan_in_uniform(const std::string& name, ad::Shape shape, std::size_t fan_in) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  ad::Tensor t(std::move(shape));
  for (double& v : t.data) v = rng_.uniform(-bound, bound);
  return insert(name, std::move(t));
}

ad::Var ParamStore::zeros(const std::string& name, ad::Shape shape) {
  return insert(name, ad::Tensor::zeros(std::move(shape)));
}

ad::Var ParamStore::full(const std::string& name, ad::Shape shape, double value) {
  return insert(name, ad::Tensor::full(std::move(shape), value));
}

std::vector<ad::Var> ParamStore::params() const {
  std::vector<ad::Var> out;
  out.reserve(items_.size());
  for (const auto& [n, v] : items_) out.push_back(v);
  return out;
}

std::size_t ParamStore::count() const {
  std::size_t n = 0;
  for (const auto& [name, v] : items_) n += v.value().numel();
  return n;
}

void ParamStore::load(const std::vector<std::pair<std::string, ad::Tensor>>& arrays) {
  for (const auto& [name, tensor] : arrays) {
    bool found = false;
    for (auto& [n, v] : items_) {
      if (n == name) {
        if (v.value().shape != tensor.shape)
          throw std::invalid_argument("ParamStore: shape mismatch for " + name);
        v.node->value.data = tensor.data;
        found = true;
        break;
      }
    }
    if (!found) throw std::invalid_argument("ParamStore: unknown parameter " + name);
  }
}

Conv2d make_conv(ParamStore& ps, const std::string& name, std::size_t cin, std::size_t cout,
                 std::size_t kernel, bool zero_init) {
  const ad::Shape ws{cout, cin, kernel, kernel};
  Conv2d c;
  c.w = zero_init ? ps.zeros(name + ".w", ws)
                  : ps.fan_in_uniform(name + ".w", ws, cin * kernel * kernel);
  c.b = ps.zeros(name + ".b", {cout});
  return c;
}

Linear make_linear(ParamStore& ps, const std::string& name, std::size_t in, std::size_t out,
                   bool zero_init) {
  Linear l;
  l.w = zero_init ? ps.zeros(name + ".w", {out, in})
                  : ps.fan_in_uniform(name + ".w", {out, in}, in);
  l.b = ps.zeros(name + ".b", {out});
  return l;
}

GroupNorm make_group_norm(ParamStore& ps, const std::string& name, std::size_t channels) {
  GroupNorm g;
  g.gamma = ps.full(name + ".gamma", {channels}, 1.0);
  g.beta = ps.zeros(name + ".beta", {channels});
  g.groups = std::gcd<std::size_t>(8, channels);
  return g;
}

ad::Var ResidualBlock::operator()(const ad::Var& x) const {
  ad::Var h = conv2(ad::gelu(conv1(x)));
  ad::Var s = skip ? (*skip)(x) : x;
  return ad::gelu(ad::add(h, s));
}

ResidualBlock make_residual_block(ParamStore& ps, const std::string& name, std::size_t cin,
                                  std::size_t cout) {
  ResidualBlock b;
  b.conv1 = make_conv(ps, name + ".conv1", cin, cout, 3);
  b.conv2 = make_conv(ps, name + ".conv2", cout, cout, 3);
  if (cin != cout) b.skip = make_conv(ps, name + ".skip", cin, cout, 1);
  return b;
}

ad::Var FreqAttention::operator()(const ad::Var& x, const std::vector<double>& freqs_ghz) const {
  if (freqs_ghz.size() != n_c)
    throw std::invalid_argument("FreqAttention: frequency list length mismatch");
  const std::size_t batch = x.shape()[0];
  if (x.shape()[1] != channels)
    throw std::invalid_argument("FreqAttention: channel mismatch");

  ad::Tensor f({batch, n_c});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < n_c; ++c) f.data[b * n_c + c] = freqs_ghz[c];

  ad::Var pooled = ad::mean_pool_spatial(x);
  ad::Var merged = ad::concat({pooled, ad::constant(std::move(f))}, 1);

  const std::size_t hidden = fc1.b.shape()[0];
  ad::Var h = fc1(merged);
  h = ad::reshape(h, {batch, hidden, 1, 1});
  h = ad::gelu(gn1(h));
  h = ad::reshape(h, {batch, hidden});
  h = fc2(h);
  h = ad::reshape(h, {batch, hidden, 1, 1});
  h = ad::gelu(gn2(h));
  h = ad::reshape(h, {batch, hidden});

  ad::Var wb = head(h);  // (batch, 2*channels): delta-weight then bias
  ad::Var weight = ad::add_scalar(ad::slice(wb, 1, 0, channels), 1.0);
  ad::Var bias = ad::slice(wb, 1, channels, channels);
  return ad::channel_affine(x, weight, bias);
}

FreqAttention make_freq_attention(ParamStore& ps, const std::string& name, std::size_t channels,
                                  std::size_t n_c, std::size_t hidden) {
  FreqAttention fa;
  fa.channels = channels;
  fa.n_c = n_c;
  fa.fc1 = make_linear(ps, name + ".fc1", channels + n_c, hidden);
  fa.fc2 = make_linear(ps, name + ".fc2", hidden, hidden);
  fa.gn1 = make_group_norm(ps, name + ".gn1", hidden);
  fa.gn2 = make_group_norm(ps, name + ".gn2", hidden);
  fa.head = make_linear(ps, name + ".head", hidden, 2 * channels, /*zero_init=*/true);
  return fa;
}

}  // namespace ckmap
