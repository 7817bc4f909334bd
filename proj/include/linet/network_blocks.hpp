#pragma once

#include <bit>
#include <string>
#include <vector>

#include "linet/module.hpp"

namespace linet {

enum class NormKind { none, instance };
enum class Activation { silu, leaky_relu };
enum class OutputHead { linear, sigmoid, tanh };

/// Shape recipe shared by encoders, decoders and patch discriminators.
struct BlockConfig {
  int in_channels = 1;
  int input_size = 64;
  int stages = 4;
  int base_width = 32;
  int max_width = 256;
  int res_blocks = 4;
  /// Per-stage normalization; empty means none on stage 0 and instance after.
  std::vector<NormKind> norms;

  int width(int stage) const { return std::min(base_width << stage, max_width); }
  int output_size() const { return input_size >> stages; }
  NormKind norm(int stage) const {
    if (stage < int(norms.size())) return norms[stage];
    return stage == 0 ? NormKind::none : NormKind::instance;
  }

  void validate() const {
    auto pow2 = [](int v) { return v > 0 && std::has_single_bit(unsigned(v)); };
    if (stages < 1) throw ConfigError("stage count must be >= 1");
    if (in_channels < 1) throw ConfigError("in_channels must be >= 1");
    if (!pow2(base_width) || !pow2(max_width)) throw ConfigError("widths must be powers of two");
    if (res_blocks < 0) throw ConfigError("res_blocks must be >= 0");
    if (input_size < 1 || (input_size >> stages) < 1 || ((input_size >> stages) << stages) != input_size)
      throw ConfigError("input size " + std::to_string(input_size) + " cannot be halved " +
                        std::to_string(stages) + " times");
  }
};

template <typename Scalar>
Var<Scalar> activate(const Var<Scalar>& x, Activation a) {
  return a == Activation::silu ? silu(x) : leaky_relu(x, Scalar(0.2));
}

template <typename Scalar>
Var<Scalar> apply_head(const Var<Scalar>& x, OutputHead h) {
  switch (h) {
    case OutputHead::sigmoid: return sigmoid(x);
    case OutputHead::tanh: return tanh(x);
    default: return x;
  }
}

/// One conv + optional instance norm + activation.
template <typename Scalar>
struct ConvUnit {
  Conv2d<Scalar> conv;
  NormKind norm_kind = NormKind::none;
  InstanceNorm<Scalar> norm;
  Activation act = Activation::silu;

  ConvUnit() = default;
  ConvUnit(int in, int out, int kernel, int stride, int pad, NormKind nk, Activation a, Rng& rng)
      : conv(in, out, kernel, stride, pad, rng, false, nk != NormKind::instance), norm_kind(nk), act(a) {
    if (nk == NormKind::instance) norm = InstanceNorm<Scalar>(out);
  }

  Var<Scalar> operator()(const Var<Scalar>& x) const {
    Var<Scalar> y = conv(x);
    if (norm_kind == NormKind::instance) y = norm(y);
    return activate(y, act);
  }

  void collect(ParameterList<Scalar>& out, const std::string& prefix) const {
    conv.collect(out, prefix + ".conv");
    if (norm_kind == NormKind::instance) norm.collect(out, prefix + ".norm");
  }
};

/// Strided encoder: each stage halves H and W and doubles channels up to the cap.
template <typename Scalar>
class Encoder {
 public:
  Encoder() = default;
  Encoder(const BlockConfig& cfg, Rng& rng, Activation act = Activation::silu) : cfg_(cfg) {
    cfg.validate();
    int in = cfg.in_channels;
    for (int s = 0; s < cfg.stages; ++s) {
      units_.emplace_back(in, cfg.width(s), 4, 2, 1, cfg.norm(s), act, rng);
      in = cfg.width(s);
    }
  }

  const BlockConfig& config() const { return cfg_; }
  int out_channels() const { return cfg_.width(cfg_.stages - 1); }

  Var<Scalar> operator()(const Var<Scalar>& x) const { return forward_all(x).back(); }

  /// Output of every stage, shallowest first.
  std::vector<Var<Scalar>> forward_all(const Var<Scalar>& x) const {
    if (x.shape().c != cfg_.in_channels || x.shape().h != cfg_.input_size || x.shape().w != cfg_.input_size)
      throw ShapeMismatch("encoder expects " + std::to_string(cfg_.in_channels) + "x" +
                          std::to_string(cfg_.input_size) + "^2 input, got " + x.shape().str());
    std::vector<Var<Scalar>> outs;
    Var<Scalar> h = x;
    for (const auto& u : units_) {
      h = u(h);
      outs.push_back(h);
    }
    return outs;
  }

  void collect(ParameterList<Scalar>& out, const std::string& prefix) const {
    for (std::size_t i = 0; i < units_.size(); ++i) units_[i].collect(out, prefix + ".stage" + std::to_string(i));
  }

 private:
  BlockConfig cfg_;
  std::vector<ConvUnit<Scalar>> units_;
};

/// Mirror of Encoder: nearest 2x upsampling + 3x3 conv per stage, then a 3x3
/// head conv. Optional skip inputs are concatenated after each upsampling;
/// skip_channels[j] is the channel count at resolution input_size >> j.
template <typename Scalar>
class Decoder {
 public:
  Decoder() = default;
  Decoder(const BlockConfig& cfg, int in_channels, int out_channels, OutputHead head, Rng& rng,
          bool zero_init_head = false, std::vector<int> skip_channels = {})
      : cfg_(cfg), head_kind_(head), skip_channels_(std::move(skip_channels)) {
    cfg.validate();
    skip_channels_.resize(cfg.stages, 0);
    int in = in_channels;
    for (int j = cfg.stages - 1; j >= 0; --j) {
      const int out = cfg.width(std::max(j - 1, 0));
      units_.emplace_back(in + skip_channels_[j], out, 3, 1, 1, cfg.norm(j == 0 ? 1 : j), Activation::silu, rng);
      in = out;
    }
    head_ = Conv2d<Scalar>(in, out_channels, 3, 1, 1, rng, zero_init_head);
  }

  /// skips[j] is consumed at resolution input_size >> j (may be undefined).
  Var<Scalar> operator()(const Var<Scalar>& x, const std::vector<Var<Scalar>>& skips = {}) const {
    const int expect = cfg_.output_size();
    if (x.shape().h != expect || x.shape().w != expect)
      throw ShapeMismatch("decoder expects " + std::to_string(expect) + "^2 input, got " + x.shape().str());
    Var<Scalar> h = x;
    int u = 0;
    for (int j = cfg_.stages - 1; j >= 0; --j, ++u) {
      h = upsample2x(h);
      if (skip_channels_[j] > 0) {
        if (j >= int(skips.size()) || !skips[j].defined()) throw ShapeMismatch("decoder missing skip input");
        h = concat_channels(h, skips[j]);
      }
      h = units_[u](h);
    }
    return apply_head(head_(h), head_kind_);
  }

  void collect(ParameterList<Scalar>& out, const std::string& prefix) const {
    for (std::size_t i = 0; i < units_.size(); ++i) units_[i].collect(out, prefix + ".stage" + std::to_string(i));
    head_.collect(out, prefix + ".head");
  }

 private:
  BlockConfig cfg_;
  OutputHead head_kind_ = OutputHead::linear;
  std::vector<int> skip_channels_;
  std::vector<ConvUnit<Scalar>> units_;
  Conv2d<Scalar> head_;
};

/// Maps an image to an S x S score map, S = input_size >> stages.
template <typename Scalar>
class PatchDiscriminator {
 public:
  PatchDiscriminator() = default;
  PatchDiscriminator(const BlockConfig& cfg, OutputHead head, Rng& rng)
      : encoder_(cfg, rng, Activation::leaky_relu), head_kind_(head) {
    score_ = Conv2d<Scalar>(encoder_.out_channels(), 1, 3, 1, 1, rng);
  }

  Var<Scalar> operator()(const Var<Scalar>& x) const { return apply_head(score_(encoder_(x)), head_kind_); }

  void collect(ParameterList<Scalar>& out, const std::string& prefix) const {
    encoder_.collect(out, prefix + ".encoder");
    score_.collect(out, prefix + ".score");
  }

 private:
  Encoder<Scalar> encoder_;
  OutputHead head_kind_ = OutputHead::linear;
  Conv2d<Scalar> score_;
};

template <typename Scalar>
Encoder<Scalar> build_encoder(const BlockConfig& cfg, Rng& rng) {
  return Encoder<Scalar>(cfg, rng);
}

template <typename Scalar>
Decoder<Scalar> build_decoder(const BlockConfig& cfg, Rng& rng, OutputHead head = OutputHead::linear) {
  return Decoder<Scalar>(cfg, cfg.width(cfg.stages - 1), cfg.in_channels, head, rng);
}

template <typename Scalar>
PatchDiscriminator<Scalar> build_patch_discriminator(const BlockConfig& cfg, Rng& rng,
                                                     OutputHead head = OutputHead::linear) {
  return PatchDiscriminator<Scalar>(cfg, head, rng);
}

// ---------------------------------------------------------------------------
// AdaIN

inline constexpr double kAdaInEps = 1e-5;
inline constexpr double kStdFloor = 1e-3;

/// Per-sample, per-channel style statistics, each (N, C, 1, 1).
template <typename Scalar>
struct AdaINParams {
  Var<Scalar> mean;
  Var<Scalar> std;
};

/// Standardizes each channel of `content` over H*W, then scales by std and
/// shifts by mean.
template <typename Scalar>
Var<Scalar> adain(const Var<Scalar>& content, const AdaINParams<Scalar>& params) {
  const Shape s = content.shape();
  for (const Shape& p : {params.mean.shape(), params.std.shape()})
    if (p.c != s.c || p.h != 1 || p.w != 1 || (p.n != s.n && p.n != 1))
      throw ShapeMismatch("adain params " + p.str() + " for content " + s.str());
  return channel_affine(instance_standardize(content, Scalar(kAdaInEps)), params.std, params.mean);
}

/// conv -> AdaIN -> activation -> conv -> AdaIN, plus identity skip.
template <typename Scalar>
class AdaINResBlock {
 public:
  AdaINResBlock() = default;
  AdaINResBlock(int channels, Rng& rng, bool zero_init = false)
      : conv1_(channels, channels, 3, 1, 1, rng, zero_init, false), conv2_(channels, channels, 3, 1, 1, rng, zero_init, false) {}

  int channels() const { return conv1_.out_channels(); }

  Var<Scalar> operator()(const Var<Scalar>& x, const AdaINParams<Scalar>& first,
                         const AdaINParams<Scalar>& second) const {
    if (x.shape().c != channels()) throw ShapeMismatch("residual block channels " + x.shape().str());
    Var<Scalar> h = silu(adain(conv1_(x), first));
    h = adain(conv2_(h), second);
    return add(x, h);
  }

  void collect(ParameterList<Scalar>& out, const std::string& prefix) const {
    conv1_.collect(out, prefix + ".conv1");
    conv2_.collect(out, prefix + ".conv2");
  }

 private:
  Conv2d<Scalar> conv1_, conv2_;
};

/// Affine map from a style vector to one AdaINParams; std = softplus(.) + floor.
template <typename Scalar>
class StyleHead {
 public:
  StyleHead() = default;
  StyleHead(int style_dim, int channels, Rng& rng)
      : mean_(style_dim, channels, rng), std_(style_dim, channels, rng) {
    // softplus(0.5413) ~= 1: start near unit scale.
    std_.bias.mutable_value().array().setConstant(Scalar(0.5413));
  }

  AdaINParams<Scalar> operator()(const Var<Scalar>& style) const {
    return {mean_(style), add_scalar(softplus(std_(style)), Scalar(kStdFloor))};
  }

  void collect(ParameterList<Scalar>& out, const std::string& prefix) const {
    mean_.collect(out, prefix + ".mean");
    std_.collect(out, prefix + ".std");
  }

 private:
  Linear<Scalar> mean_, std_;
};

}  // namespace linet
