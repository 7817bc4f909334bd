#pragma once

// Central finite-difference oracle for the autodiff engine. Independent of the
// backward closures: it only evaluates forward passes.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "linet/module.hpp"

namespace linet::testing {

struct GradCheckResult {
  double max_rel_error = 0.0;
  int checked = 0;
  std::string worst;
};

/// |a - n| / max(|a|, |n|, floor); the floor keeps noise-level gradients
/// from dominating.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Compares backward() against central differences for up to
/// `per_tensor` randomly chosen entries of every tensor in `wrt`.
inline GradCheckResult check_gradients(const std::function<Var<double>()>& loss_fn, ParameterList<double> wrt,
                                       int per_tensor = 12, std::uint64_t seed = 7, double h = 1e-5) {
  for (auto& p : wrt) p.var.zero_grad();
  Var<double> loss = loss_fn();
  backward(loss);

  GradCheckResult result;
  Rng rng(seed);
  for (auto& p : wrt) {
    Tensor<double> analytic = p.var.has_grad() ? p.var.grad() : Tensor<double>(p.var.shape());
    const Eigen::Index n = p.var.shape().size();
    const int count = int(std::min<Eigen::Index>(n, per_tensor));
    for (int k = 0; k < count; ++k) {
      const Eigen::Index i = count == n ? k : Eigen::Index(rng.index(std::uint64_t(n)));
      double& x = p.var.mutable_value().array()[i];
      const double saved = x;
      double plus, minus;
      {
        NoGradGuard guard;
        x = saved + h;
        plus = loss_fn().item();
        x = saved - h;
        minus = loss_fn().item();
      }
      x = saved;
      const double numeric = (plus - minus) / (2.0 * h);
      const double err = relative_error(analytic.array()[i], numeric);
      ++result.checked;
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst = p.name + "[" + std::to_string(i) + "] analytic=" + std::to_string(analytic.array()[i]) +
                       " numeric=" + std::to_string(numeric);
      }
    }
  }
  for (auto& p : wrt) p.var.zero_grad();
  return result;
}

inline Tensor<double> random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(s);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.array()[i] = rng.uniform(lo, hi);
  return t;
}

}  // namespace linet::testing
