#pragma once

#include <memory>
#include <string>
#include <vector>

#include "linet/module.hpp"

namespace linet {

/// Fixed feature network queried at a set of named tap layers.
template <typename Scalar>
class PerceptualNetwork {
 public:
  virtual ~PerceptualNetwork() = default;
  virtual std::vector<std::string> taps() const = 0;
  /// Activations at each tap, in taps() order. Gradients flow to `x` only.
  virtual std::vector<Var<Scalar>> activations(const Var<Scalar>& x) const = 0;
};

/// Taps the raw input. Useful as a reduction reference.
template <typename Scalar>
class InputTapNetwork : public PerceptualNetwork<Scalar> {
 public:
  std::vector<std::string> taps() const override { return {"input"}; }
  std::vector<Var<Scalar>> activations(const Var<Scalar>& x) const override { return {x}; }
};

inline constexpr std::uint64_t kExtractorSeed = 0x5eedf00dULL;
inline constexpr int kFeatureDim = 64;

/// Seeded random-weight conv stack: 4x4 stride-2 convs with leaky ReLU,
/// tapped after every stage. Weights are drawn in double and cast, so the
/// float and double instances with one seed agree.
template <typename Scalar>
class FixedConvExtractor : public PerceptualNetwork<Scalar> {
 public:
  explicit FixedConvExtractor(std::uint64_t seed = kExtractorSeed, int in_channels = 3,
                              std::vector<int> widths = {16, 32, kFeatureDim}) {
    Rng rng(seed);
    int in = in_channels;
    for (int w : widths) {
      Conv2d<double> c(in, w, 4, 2, 1, rng);
      Conv2d<Scalar> fixed;
      fixed.weight = Var<Scalar>(c.weight.value().template cast<Scalar>());
      fixed.bias = Var<Scalar>(c.bias.value().template cast<Scalar>());
      fixed.stride = 2;
      fixed.pad = 1;
      convs_.push_back(std::move(fixed));
      in = w;
    }
  }

  std::vector<std::string> taps() const override {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < convs_.size(); ++i) names.push_back("conv" + std::to_string(i));
    return names;
  }

  std::vector<Var<Scalar>> activations(const Var<Scalar>& x) const override {
    std::vector<Var<Scalar>> out;
    Var<Scalar> h = x;
    for (const auto& c : convs_) {
      h = leaky_relu(c(h), Scalar(0.2));
      out.push_back(h);
    }
    return out;
  }

  /// Global-average-pooled last tap, (N, F, 1, 1).
  Var<Scalar> features(const Var<Scalar>& x) const { return global_avg_pool(activations(x).back()); }

  int feature_dim() const { return convs_.back().weight.shape().n; }

 private:
  std::vector<Conv2d<Scalar>> convs_;
};

/// Sum over networks and taps of summed |a - b| activations, averaged over
/// the batch.
template <typename Scalar>
Var<Scalar> perceptual_loss(const std::vector<const PerceptualNetwork<Scalar>*>& nets, const Var<Scalar>& pred,
                            const Var<Scalar>& gt) {
  check_same_shape(pred.shape(), gt.shape(), "perceptual_loss");
  std::vector<Var<Scalar>> terms;
  for (const auto* net : nets) {
    const auto a = net->activations(pred);
    const auto b = net->activations(gt);
    for (std::size_t i = 0; i < a.size(); ++i) terms.push_back(sum(abs(sub(a[i], b[i]))));
  }
  if (terms.empty()) return Var<Scalar>(Tensor<Scalar>::scalar(0));
  std::vector<Scalar> w(terms.size(), Scalar(1) / Scalar(pred.shape().n));
  return weighted_sum<Scalar>(terms, w);
}

/// The default pair standing in for the classification and verification
/// networks: two extractors with distinct seeds.
template <typename Scalar>
std::vector<std::unique_ptr<PerceptualNetwork<Scalar>>> default_perceptual_networks() {
  std::vector<std::unique_ptr<PerceptualNetwork<Scalar>>> nets;
  nets.push_back(std::make_unique<FixedConvExtractor<Scalar>>(kExtractorSeed));
  nets.push_back(std::make_unique<FixedConvExtractor<Scalar>>(kExtractorSeed + 1));
  return nets;
}

}  // namespace linet
