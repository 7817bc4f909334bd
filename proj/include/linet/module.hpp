#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "linet/ops.hpp"
#include "linet/rng.hpp"

namespace linet {

template <typename Scalar>
struct NamedParameter {
  std::string name;
  Var<Scalar> var;
};

/// Flat, ordered view of a network's trainable tensors. Order defines the
/// checkpoint layout, so modules must append deterministically.
template <typename Scalar>
using ParameterList = std::vector<NamedParameter<Scalar>>;

template <typename Scalar>
void zero_grad(ParameterList<Scalar>& params) {
  for (auto& p : params) p.var.zero_grad();
}

template <typename Scalar>
Eigen::Index parameter_count(const ParameterList<Scalar>& params) {
  Eigen::Index n = 0;
  for (const auto& p : params) n += p.var.shape().size();
  return n;
}

/// Uniform(-bound, bound) tensor with bound = gain / sqrt(fan_in).
template <typename Scalar>
Tensor<Scalar> fan_in_uniform(Shape shape, int fan_in, Rng& rng, double gain = 1.0) {
  Tensor<Scalar> t(shape);
  const double bound = gain / std::sqrt(double(fan_in));
  for (Eigen::Index i = 0; i < t.size(); ++i) t.array()[i] = Scalar(rng.uniform(-bound, bound));
  return t;
}

template <typename Scalar>
struct Conv2d {
  Var<Scalar> weight, bias;
  int stride = 1, pad = 0;

  Conv2d() = default;
  /// Without a bias the zero bias is a constant; use it before a normalization
  /// that would cancel the bias anyway.
  Conv2d(int in, int out, int kernel, int stride_, int pad_, Rng& rng, bool zero_init = false, bool with_bias = true)
      : stride(stride_), pad(pad_) {
    const Shape ws{out, in, kernel, kernel};
    weight = Var<Scalar>::parameter(zero_init ? Tensor<Scalar>(ws)
                                              : fan_in_uniform<Scalar>(ws, in * kernel * kernel, rng, std::sqrt(3.0)));
    Tensor<Scalar> b(Shape{1, out, 1, 1});
    bias = with_bias ? Var<Scalar>::parameter(std::move(b)) : Var<Scalar>(std::move(b));
  }

  int out_channels() const { return weight.shape().n; }
  bool has_bias() const { return bias.requires_grad(); }
  Var<Scalar> operator()(const Var<Scalar>& x) const { return conv2d(x, weight, bias, stride, pad); }

  void collect(ParameterList<Scalar>& out, const std::string& prefix) const {
    out.push_back({prefix + ".weight", weight});
    if (has_bias()) out.push_back({prefix + ".bias", bias});
  }
};

template <typename Scalar>
struct Linear {
  Var<Scalar> weight, bias;

  Linear() = default;
  Linear(int in, int out, Rng& rng, bool zero_init = false) {
    const Shape ws{out, in, 1, 1};
    weight = Var<Scalar>::parameter(zero_init ? Tensor<Scalar>(ws) : fan_in_uniform<Scalar>(ws, in, rng, std::sqrt(3.0)));
    bias = Var<Scalar>::parameter(Tensor<Scalar>(Shape{1, out, 1, 1}));
  }

  Var<Scalar> operator()(const Var<Scalar>& x) const {
    const Shape s = x.shape();
    const Var<Scalar> flat = (s.h == 1 && s.w == 1) ? x : reshape(x, Shape{s.n, int(s.sample_size()), 1, 1});
    return linear(flat, weight, bias);
  }

  void collect(ParameterList<Scalar>& out, const std::string& prefix) const {
    out.push_back({prefix + ".weight", weight});
    out.push_back({prefix + ".bias", bias});
  }
};

/// Instance normalization with a learned per-channel affine.
template <typename Scalar>
struct InstanceNorm {
  static constexpr double kEps = 1e-5;
  Var<Scalar> gamma, beta;

  InstanceNorm() = default;
  explicit InstanceNorm(int channels)
      : gamma(Var<Scalar>::parameter(Tensor<Scalar>(Shape{1, channels, 1, 1}, Scalar(1)))),
        beta(Var<Scalar>::parameter(Tensor<Scalar>(Shape{1, channels, 1, 1}))) {}

  Var<Scalar> operator()(const Var<Scalar>& x) const {
    return channel_affine(instance_standardize(x, Scalar(kEps)), gamma, beta);
  }

  void collect(ParameterList<Scalar>& out, const std::string& prefix) const {
    out.push_back({prefix + ".gamma", gamma});
    out.push_back({prefix + ".beta", beta});
  }
};

}  // namespace linet
