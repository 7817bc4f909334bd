#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "linet/module.hpp"

namespace linet {

struct AdamOptions {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam over a fixed parameter list. Parameters without a gradient buffer
/// are treated as having a zero gradient.
template <typename Scalar>
class Adam {
 public:
  Adam() = default;
  Adam(ParameterList<Scalar> params, AdamOptions options) : params_(std::move(params)), options_(options) {
    for (const auto& p : params_) {
      first_.emplace_back(p.var.shape());
      second_.emplace_back(p.var.shape());
    }
  }

  void set_lr(double lr) { options_.lr = lr; }
  double lr() const { return options_.lr; }
  const AdamOptions& options() const { return options_; }
  std::int64_t steps() const { return steps_; }

  void zero_grad() { linet::zero_grad(params_); }

  void step() {
    ++steps_;
    const double c1 = 1.0 - std::pow(options_.beta1, double(steps_));
    const double c2 = 1.0 - std::pow(options_.beta2, double(steps_));
    const Scalar b1 = Scalar(options_.beta1), b2 = Scalar(options_.beta2);
    const Scalar step_size = Scalar(options_.lr / c1);
    const Scalar inv_c2 = Scalar(1.0 / c2);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Var<Scalar>& p = params_[i].var;
      auto& m = first_[i].array();
      auto& v = second_[i].array();
      if (p.has_grad()) {
        const auto& g = p.grad().array();
        m = b1 * m + (Scalar(1) - b1) * g;
        v = b2 * v + (Scalar(1) - b2) * g.square();
      } else {
        m *= b1;
        v *= b2;
      }
      p.mutable_value().array() -= step_size * m / ((v * inv_c2).sqrt() + Scalar(options_.eps));
    }
  }

  const ParameterList<Scalar>& parameters() const { return params_; }
  std::vector<Tensor<Scalar>>& first_moments() { return first_; }
  std::vector<Tensor<Scalar>>& second_moments() { return second_; }
  const std::vector<Tensor<Scalar>>& first_moments() const { return first_; }
  const std::vector<Tensor<Scalar>>& second_moments() const { return second_; }
  void set_steps(std::int64_t s) { steps_ = s; }

 private:
  ParameterList<Scalar> params_;
  AdamOptions options_;
  std::vector<Tensor<Scalar>> first_, second_;
  std::int64_t steps_ = 0;
};

}  // namespace linet
