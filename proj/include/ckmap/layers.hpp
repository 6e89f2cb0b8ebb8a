#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ckmap/autodiff.hpp"
#include "ckmap/rng.hpp"

namespace ckmap {

/// Owns the trainable leaves of a model in creation order. Initialization is
/// a pure function of the seed and creation order; the checkpoint format
/// stores arrays under these names.
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed) : rng_(Rng(seed).derive(0x494e4954ull)) {}

  /// Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weight.
  ad::Var fan_in_uniform(const std::string& name, ad::Shape shape, std::size_t fan_in);
  ad::Var zeros(const std::string& name, ad::Shape shape);
  ad::Var full(const std::string& name, ad::Shape shape, double value);

  const std::vector<std::pair<std::string, ad::Var>>& named() const { return items_; }
  std::vector<ad::Var> params() const;
  std::size_t count() const;

  /// Overwrites parameter values by name (checkpoint restore). Throws on
  /// unknown name or shape mismatch.
  void load(const std::vector<std::pair<std::string, ad::Tensor>>& arrays);

 private:
  ad::Var insert(const std::string& name, ad::Tensor value);
  Rng rng_;
  std::vector<std::pair<std::string, ad::Var>> items_;
};

struct Conv2d {
  ad::Var w, b;
  ad::Var operator()(const ad::Var& x) const { return ad::conv2d(x, w, b); }
};
Conv2d make_conv(ParamStore& ps, const std::string& name, std::size_t cin, std::size_t cout,
                 std::size_t kernel, bool zero_init = false);

struct Linear {
  ad::Var w, b;
  ad::Var operator()(const ad::Var& x) const { return ad::linear(x, w, b); }
};
Linear make_linear(ParamStore& ps, const std::string& name, std::size_t in, std::size_t out,
                   bool zero_init = false);

struct GroupNorm {
  ad::Var gamma, beta;
  std::size_t groups = 1;
  ad::Var operator()(const ad::Var& x) const { return ad::group_norm(x, gamma, beta, groups); }
};
/// Group count is gcd(8, channels).
GroupNorm make_group_norm(ParamStore& ps, const std::string& name, std::size_t channels);

/// Two 3x3 convolutions with GELU and a skip connection (1x1 projection when
/// the channel count changes).
struct ResidualBlock {
  Conv2d conv1, conv2;
  std::optional<Conv2d> skip;
  ad::Var operator()(const ad::Var& x) const;
};
ResidualBlock make_residual_block(ParamStore& ps, const std::string& name, std::size_t cin,
                                  std::size_t cout);

/// Feature modulator conditioned on pooled features and explicit subcarrier
/// frequencies (GHz). The affine head starts at zero, so the layer is the
/// identity at initialization.
struct FreqAttention {
  Linear fc1, fc2, head;
  GroupNorm gn1, gn2;
  std::size_t channels = 0, n_c = 0;
  ad::Var operator()(const ad::Var& x, const std::vector<double>& freqs_ghz) const;
};
FreqAttention make_freq_attention(ParamStore& ps, const std::string& name, std::size_t channels,
                                  std::size_t n_c, std::size_t hidden);

}  // namespace ckmap
