#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "linet/autograd.hpp"

namespace linet {

// Differentiable operations on Var<Scalar>. Every op accumulates into parent
// gradients only when that parent requires one.

namespace detail {

template <typename Scalar>
using Arr = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
bool wants_grad(const Node<Scalar>& self, std::size_t i) {
  return self.parents[i]->requires_grad;
}

template <typename Scalar>
Tensor<Scalar>& parent_grad(Node<Scalar>& self, std::size_t i) {
  return self.parents[i]->grad_buffer();
}

template <typename Scalar>
const Tensor<Scalar>& parent_value(const Node<Scalar>& self, std::size_t i) {
  return self.parents[i]->value;
}

/// Elementwise unary op; `deriv(x, y)` returns dy/dx given input and output arrays.
template <typename Scalar, typename Fwd, typename Deriv>
Var<Scalar> unary(const Var<Scalar>& x, Fwd fwd, Deriv deriv) {
  Tensor<Scalar> out(x.shape(), fwd(x.value().array()));
  return Var<Scalar>::from_op(std::move(out), {x.node()}, [deriv](Node<Scalar>& self) {
    const auto& in = parent_value(self, 0).array();
    parent_grad(self, 0).array() += self.grad.array() * deriv(in, self.value.array());
  });
}

// Output columns [lo, hi) whose input column ox*stride - pad + kx is in range.
inline std::pair<int, int> valid_columns(int kx, int stride, int pad, int w, int wo) {
  int lo = 0;
  while (lo < wo && lo * stride - pad + kx < 0) ++lo;
  int hi = wo;
  while (hi > lo && (hi - 1) * stride - pad + kx >= w) --hi;
  return {lo, hi};
}

// Unfolds one (C,H,W) sample into a (C*k*k, Ho*Wo) row-major column matrix.
template <typename Scalar>
void im2col(const Scalar* x, int c, int h, int w, int k, int stride, int pad, int ho, int wo,
            Scalar* cols, Eigen::Index ld) {
  for (int ci = 0; ci < c; ++ci) {
    const Scalar* xc = x + Eigen::Index(ci) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        Scalar* row = cols + (Eigen::Index(ci) * k * k + ky * k + kx) * ld;
        const auto [lo, hi] = valid_columns(kx, stride, pad, w, wo);
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride - pad + ky;
          Scalar* dst = row + Eigen::Index(oy) * wo;
          if (iy < 0 || iy >= h) {
            std::fill(dst, dst + wo, Scalar(0));
            continue;
          }
          std::fill(dst, dst + lo, Scalar(0));
          std::fill(dst + hi, dst + wo, Scalar(0));
          const Scalar* src = xc + Eigen::Index(iy) * w - pad + kx;
          if (stride == 1) {
            std::copy(src + lo, src + hi, dst + lo);
          } else {
            for (int ox = lo; ox < hi; ++ox) dst[ox] = src[ox * stride];
          }
        }
      }
    }
  }
}

template <typename Scalar>
void col2im(const Scalar* cols, int c, int h, int w, int k, int stride, int pad, int ho, int wo,
            Scalar* x, Eigen::Index ld) {
  for (int ci = 0; ci < c; ++ci) {
    Scalar* xc = x + Eigen::Index(ci) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const Scalar* row = cols + (Eigen::Index(ci) * k * k + ky * k + kx) * ld;
        const auto [lo, hi] = valid_columns(kx, stride, pad, w, wo);
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          const Scalar* src = row + Eigen::Index(oy) * wo;
          Scalar* dst = xc + Eigen::Index(iy) * w - pad + kx;
          if (stride == 1) {
            for (int ox = lo; ox < hi; ++ox) dst[ox] += src[ox];
          } else {
            for (int ox = lo; ox < hi; ++ox) dst[ox * stride] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise arithmetic

template <typename Scalar>
Var<Scalar> add(const Var<Scalar>& a, const Var<Scalar>& b) {
  check_same_shape(a.shape(), b.shape(), "add");
  Tensor<Scalar> out(a.shape(), a.value().array() + b.value().array());
  return Var<Scalar>::from_op(std::move(out), {a.node(), b.node()}, [](Node<Scalar>& self) {
    for (std::size_t i = 0; i < 2; ++i)
      if (detail::wants_grad(self, i)) detail::parent_grad(self, i).array() += self.grad.array();
  });
}

template <typename Scalar>
Var<Scalar> sub(const Var<Scalar>& a, const Var<Scalar>& b) {
  check_same_shape(a.shape(), b.shape(), "sub");
  Tensor<Scalar> out(a.shape(), a.value().array() - b.value().array());
  return Var<Scalar>::from_op(std::move(out), {a.node(), b.node()}, [](Node<Scalar>& self) {
    if (detail::wants_grad(self, 0)) detail::parent_grad(self, 0).array() += self.grad.array();
    if (detail::wants_grad(self, 1)) detail::parent_grad(self, 1).array() -= self.grad.array();
  });
}

template <typename Scalar>
Var<Scalar> mul(const Var<Scalar>& a, const Var<Scalar>& b) {
  check_same_shape(a.shape(), b.shape(), "mul");
  Tensor<Scalar> out(a.shape(), a.value().array() * b.value().array());
  return Var<Scalar>::from_op(std::move(out), {a.node(), b.node()}, [](Node<Scalar>& self) {
    if (detail::wants_grad(self, 0))
      detail::parent_grad(self, 0).array() += self.grad.array() * detail::parent_value(self, 1).array();
    if (detail::wants_grad(self, 1))
      detail::parent_grad(self, 1).array() += self.grad.array() * detail::parent_value(self, 0).array();
  });
}

template <typename Scalar>
Var<Scalar> scale(const Var<Scalar>& x, Scalar s) {
  return detail::unary(
      x, [s](const detail::Arr<Scalar>& a) { return (a * s).eval(); },
      [s](const detail::Arr<Scalar>& a, const detail::Arr<Scalar>&) { return detail::Arr<Scalar>::Constant(a.size(), s); });
}

template <typename Scalar>
Var<Scalar> add_scalar(const Var<Scalar>& x, Scalar s) {
  return detail::unary(
      x, [s](const detail::Arr<Scalar>& a) { return (a + s).eval(); },
      [](const detail::Arr<Scalar>& a, const detail::Arr<Scalar>&) { return detail::Arr<Scalar>::Ones(a.size()); });
}

/// Sum of vars of equal shape, each weighted.
template <typename Scalar>
Var<Scalar> weighted_sum(const std::vector<Var<Scalar>>& terms, const std::vector<Scalar>& weights) {
  if (terms.empty() || terms.size() != weights.size()) throw ShapeMismatch("weighted_sum arity");
  Tensor<Scalar> out(terms[0].shape());
  std::vector<typename Var<Scalar>::NodePtr> parents;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    check_same_shape(terms[i].shape(), out.shape(), "weighted_sum");
    out.array() += weights[i] * terms[i].value().array();
    parents.push_back(terms[i].node());
  }
  return Var<Scalar>::from_op(std::move(out), std::move(parents), [weights](Node<Scalar>& self) {
    for (std::size_t i = 0; i < weights.size(); ++i)
      if (detail::wants_grad(self, i)) detail::parent_grad(self, i).array() += weights[i] * self.grad.array();
  });
}

// ---------------------------------------------------------------------------
// Pointwise nonlinearities

template <typename Scalar>
Var<Scalar> leaky_relu(const Var<Scalar>& x, Scalar slope) {
  return detail::unary(
      x, [slope](const detail::Arr<Scalar>& a) { return (a > Scalar(0)).select(a, a * slope).eval(); },
      [slope](const detail::Arr<Scalar>& a, const detail::Arr<Scalar>&) {
        return (a > Scalar(0)).select(detail::Arr<Scalar>::Ones(a.size()), detail::Arr<Scalar>::Constant(a.size(), slope)).eval();
      });
}

template <typename Scalar>
Var<Scalar> sigmoid(const Var<Scalar>& x) {
  return detail::unary(
      x, [](const detail::Arr<Scalar>& a) { return (Scalar(1) / (Scalar(1) + (-a).exp())).eval(); },
      [](const detail::Arr<Scalar>&, const detail::Arr<Scalar>& y) { return (y * (Scalar(1) - y)).eval(); });
}

template <typename Scalar>
Var<Scalar> tanh(const Var<Scalar>& x) {
  return detail::unary(
      x, [](const detail::Arr<Scalar>& a) { return a.tanh().eval(); },
      [](const detail::Arr<Scalar>&, const detail::Arr<Scalar>& y) { return (Scalar(1) - y * y).eval(); });
}

/// x * sigmoid(x): the smooth activation used inside generators.
template <typename Scalar>
Var<Scalar> silu(const Var<Scalar>& x) {
  return detail::unary(
      x, [](const detail::Arr<Scalar>& a) { return (a / (Scalar(1) + (-a).exp())).eval(); },
      [](const detail::Arr<Scalar>& a, const detail::Arr<Scalar>&) {
        auto s = (Scalar(1) / (Scalar(1) + (-a).exp())).eval();
        return (s * (Scalar(1) + a * (Scalar(1) - s))).eval();
      });
}

template <typename Scalar>
Var<Scalar> softplus(const Var<Scalar>& x) {
  // log(1 + e^x) = max(x, 0) + log1p(e^-|x|)
  return detail::unary(
      x, [](const detail::Arr<Scalar>& a) { return (a.max(Scalar(0)) + (-a.abs()).exp().log1p()).eval(); },
      [](const detail::Arr<Scalar>& a, const detail::Arr<Scalar>&) { return (Scalar(1) / (Scalar(1) + (-a).exp())).eval(); });
}

template <typename Scalar>
Var<Scalar> log(const Var<Scalar>& x) {
  return detail::unary(
      x, [](const detail::Arr<Scalar>& a) { return a.log().eval(); },
      [](const detail::Arr<Scalar>& a, const detail::Arr<Scalar>&) { return a.inverse().eval(); });
}

template <typename Scalar>
Var<Scalar> abs(const Var<Scalar>& x) {
  return detail::unary(
      x, [](const detail::Arr<Scalar>& a) { return a.abs().eval(); },
      [](const detail::Arr<Scalar>& a, const detail::Arr<Scalar>&) { return a.sign().eval(); });
}

template <typename Scalar>
Var<Scalar> square(const Var<Scalar>& x) {
  return detail::unary(
      x, [](const detail::Arr<Scalar>& a) { return a.square().eval(); },
      [](const detail::Arr<Scalar>& a, const detail::Arr<Scalar>&) { return (Scalar(2) * a).eval(); });
}

/// Clamp with pass-through gradient on the closed interval [lo, hi].
template <typename Scalar>
Var<Scalar> clamp(const Var<Scalar>& x, Scalar lo, Scalar hi) {
  return detail::unary(
      x, [lo, hi](const detail::Arr<Scalar>& a) { return a.max(lo).min(hi).eval(); },
      [lo, hi](const detail::Arr<Scalar>& a, const detail::Arr<Scalar>&) {
        return ((a >= lo) && (a <= hi)).template cast<Scalar>().eval();
      });
}

// ---------------------------------------------------------------------------
// Reductions

template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& x) {
  return Var<Scalar>::from_op(Tensor<Scalar>::scalar(x.value().array().sum()), {x.node()},
                              [](Node<Scalar>& self) {
                                detail::parent_grad(self, 0).array() += self.grad.item();
                              });
}

template <typename Scalar>
Var<Scalar> mean(const Var<Scalar>& x) {
  const Scalar n = Scalar(x.shape().size());
  return Var<Scalar>::from_op(Tensor<Scalar>::scalar(x.value().array().sum() / n), {x.node()},
                              [n](Node<Scalar>& self) {
                                detail::parent_grad(self, 0).array() += self.grad.item() / n;
                              });
}

/// mean |a - b| over all elements.
template <typename Scalar>
Var<Scalar> l1_loss(const Var<Scalar>& a, const Var<Scalar>& b) {
  return mean(abs(sub(a, b)));
}

/// Per-sample mean over H*W: (N,C,H,W) -> (N,C,1,1).
template <typename Scalar>
Var<Scalar> global_avg_pool(const Var<Scalar>& x) {
  const Shape s = x.shape();
  Tensor<Scalar> out(Shape{s.n, s.c, 1, 1});
  for (int n = 0; n < s.n; ++n) out.rows().row(n) = x.value().sample(n).rowwise().mean().transpose();
  return Var<Scalar>::from_op(std::move(out), {x.node()}, [s](Node<Scalar>& self) {
    auto& g = detail::parent_grad(self, 0);
    const Scalar inv = Scalar(1) / Scalar(s.plane());
    for (int n = 0; n < s.n; ++n)
      g.sample(n).colwise() += self.grad.rows().row(n).transpose() * inv;
  });
}

// ---------------------------------------------------------------------------
// Shape manipulation

template <typename Scalar>
Var<Scalar> reshape(const Var<Scalar>& x, Shape to) {
  return Var<Scalar>::from_op(x.value().reshaped(to), {x.node()}, [](Node<Scalar>& self) {
    detail::parent_grad(self, 0).array() += self.grad.array();
  });
}

template <typename Scalar>
Var<Scalar> concat_channels(const Var<Scalar>& a, const Var<Scalar>& b) {
  const Shape sa = a.shape(), sb = b.shape();
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w)
    throw ShapeMismatch("concat_channels " + sa.str() + " vs " + sb.str());
  Tensor<Scalar> out(Shape{sa.n, sa.c + sb.c, sa.h, sa.w});
  for (int n = 0; n < sa.n; ++n) {
    out.sample(n).topRows(sa.c) = a.value().sample(n);
    out.sample(n).bottomRows(sb.c) = b.value().sample(n);
  }
  return Var<Scalar>::from_op(std::move(out), {a.node(), b.node()}, [sa, sb](Node<Scalar>& self) {
    for (int n = 0; n < sa.n; ++n) {
      if (detail::wants_grad(self, 0)) detail::parent_grad(self, 0).sample(n) += self.grad.sample(n).topRows(sa.c);
      if (detail::wants_grad(self, 1)) detail::parent_grad(self, 1).sample(n) += self.grad.sample(n).bottomRows(sb.c);
    }
  });
}

/// Broadcasts a (N,F,1,1) vector over an h x w grid.
template <typename Scalar>
Var<Scalar> tile_spatial(const Var<Scalar>& v, int h, int w) {
  const Shape s = v.shape();
  if (s.h != 1 || s.w != 1) throw ShapeMismatch("tile_spatial expects (N,F,1,1), got " + s.str());
  Tensor<Scalar> out(Shape{s.n, s.c, h, w});
  for (int n = 0; n < s.n; ++n) out.sample(n).colwise() = v.value().rows().row(n).transpose();
  return Var<Scalar>::from_op(std::move(out), {v.node()}, [s](Node<Scalar>& self) {
    auto& g = detail::parent_grad(self, 0);
    for (int n = 0; n < s.n; ++n) g.rows().row(n) += self.grad.sample(n).rowwise().sum().transpose();
  });
}

/// Nearest-neighbour 2x upsampling.
template <typename Scalar>
Var<Scalar> upsample2x(const Var<Scalar>& x) {
  const Shape s = x.shape();
  Tensor<Scalar> out(Shape{s.n, s.c, s.h * 2, s.w * 2});
  const Tensor<Scalar>& in = x.value();
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < 2 * s.h; ++y)
        for (int xx = 0; xx < 2 * s.w; ++xx) out(n, c, y, xx) = in(n, c, y / 2, xx / 2);
  return Var<Scalar>::from_op(std::move(out), {x.node()}, [s](Node<Scalar>& self) {
    auto& g = detail::parent_grad(self, 0);
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < s.c; ++c)
        for (int y = 0; y < 2 * s.h; ++y)
          for (int xx = 0; xx < 2 * s.w; ++xx) g(n, c, y / 2, xx / 2) += self.grad(n, c, y, xx);
  });
}

// ---------------------------------------------------------------------------
// Linear maps

/// 2-D cross-correlation. weight (Cout, Cin, k, k), bias (1, Cout, 1, 1).
template <typename Scalar>
Var<Scalar> conv2d(const Var<Scalar>& x, const Var<Scalar>& weight, const Var<Scalar>& bias,
                   int stride, int pad) {
  const Shape xs = x.shape(), ws = weight.shape();
  if (ws.c != xs.c || ws.h != ws.w) throw ShapeMismatch("conv2d input " + xs.str() + " weight " + ws.str());
  if (bias.shape().size() != ws.n) throw ShapeMismatch("conv2d bias " + bias.shape().str());
  const int k = ws.h;
  const int ho = (xs.h + 2 * pad - k) / stride + 1;
  const int wo = (xs.w + 2 * pad - k) / stride + 1;
  if (ho < 1 || wo < 1) throw ShapeMismatch("conv2d output would be empty for input " + xs.str());

  // Per-sample GEMMs keep every output independent of the batch size.
  using RowMatrix = typename Tensor<Scalar>::RowMatrix;
  const Eigen::Index kdim = Eigen::Index(xs.c) * k * k;
  const Eigen::Index plane = Eigen::Index(ho) * wo;
  typename Tensor<Scalar>::ConstMatrixMap wmat(weight.value().data(), ws.n, kdim);
  const auto bvec = bias.value().array().matrix();

  Tensor<Scalar> out(Shape{xs.n, ws.n, ho, wo});
  {
    RowMatrix cols(kdim, plane);
    for (int n = 0; n < xs.n; ++n) {
      detail::im2col(x.value().sample(n).data(), xs.c, xs.h, xs.w, k, stride, pad, ho, wo, cols.data(), plane);
      out.sample(n).noalias() = wmat * cols;
      out.sample(n).colwise() += bvec;
    }
  }

  return Var<Scalar>::from_op(
      std::move(out), {x.node(), weight.node(), bias.node()},
      [xs, ws, k, stride, pad, ho, wo, kdim, plane](Node<Scalar>& self) {
        const bool gx = detail::wants_grad(self, 0), gw = detail::wants_grad(self, 1),
                   gb = detail::wants_grad(self, 2);
        RowMatrix cols(kdim, plane), dcols(kdim, plane);
        typename Tensor<Scalar>::ConstMatrixMap wm(detail::parent_value(self, 1).data(), ws.n, kdim);
        for (int n = 0; n < xs.n; ++n) {
          const auto go = self.grad.sample(n);
          if (gb) detail::parent_grad(self, 2).array().matrix() += go.rowwise().sum();
          if (gw) {
            detail::im2col(detail::parent_value(self, 0).sample(n).data(), xs.c, xs.h, xs.w, k, stride, pad, ho, wo,
                           cols.data(), plane);
            typename Tensor<Scalar>::MatrixMap dw(detail::parent_grad(self, 1).data(), ws.n, kdim);
            dw.noalias() += go * cols.transpose();
          }
          if (gx) {
            dcols.noalias() = wm.transpose() * go;
            detail::col2im(dcols.data(), xs.c, xs.h, xs.w, k, stride, pad, ho, wo,
                           detail::parent_grad(self, 0).sample(n).data(), plane);
          }
        }
      });
}

/// Fully connected layer on (N,F,1,1) input. weight (Out, F, 1, 1), bias (1, Out, 1, 1).
template <typename Scalar>
Var<Scalar> linear(const Var<Scalar>& x, const Var<Scalar>& weight, const Var<Scalar>& bias) {
  const Shape xs = x.shape(), ws = weight.shape();
  if (xs.sample_size() != ws.c || ws.h != 1 || ws.w != 1)
    throw ShapeMismatch("linear input " + xs.str() + " weight " + ws.str());
  typename Tensor<Scalar>::ConstMatrixMap wmat(weight.value().data(), ws.n, ws.c);
  Tensor<Scalar> out(Shape{xs.n, ws.n, 1, 1});
  // Row by row, like conv2d, so results do not depend on the batch size.
  for (int n = 0; n < xs.n; ++n) out.rows().row(n).noalias() = x.value().rows().row(n) * wmat.transpose();
  out.rows().rowwise() += bias.value().array().matrix().transpose();
  return Var<Scalar>::from_op(std::move(out), {x.node(), weight.node(), bias.node()}, [ws](Node<Scalar>& self) {
    typename Tensor<Scalar>::ConstMatrixMap wm(detail::parent_value(self, 1).data(), ws.n, ws.c);
    const auto go = self.grad.rows();
    if (detail::wants_grad(self, 0)) detail::parent_grad(self, 0).rows().noalias() += go * wm;
    if (detail::wants_grad(self, 1)) {
      typename Tensor<Scalar>::MatrixMap dw(detail::parent_grad(self, 1).data(), ws.n, ws.c);
      dw.noalias() += go.transpose() * detail::parent_value(self, 0).rows();
    }
    if (detail::wants_grad(self, 2))
      detail::parent_grad(self, 2).array().matrix() += go.colwise().sum().transpose();
  });
}

// ---------------------------------------------------------------------------
// Normalization

/// Per-sample, per-channel standardization over spatial dims:
/// (x - mean) / sqrt(var + eps), var biased.
template <typename Scalar>
Var<Scalar> instance_standardize(const Var<Scalar>& x, Scalar eps) {
  const Shape s = x.shape();
  Tensor<Scalar> out(s);
  Eigen::Array<Scalar, Eigen::Dynamic, 1> inv_std(Eigen::Index(s.n) * s.c);
  for (int n = 0; n < s.n; ++n) {
    auto in = x.value().sample(n).array();
    auto o = out.sample(n).array();
    for (int c = 0; c < s.c; ++c) {
      const Scalar mu = in.row(c).mean();
      const Scalar var = (in.row(c) - mu).square().mean();
      const Scalar is = Scalar(1) / std::sqrt(var + eps);
      inv_std[n * s.c + c] = is;
      o.row(c) = (in.row(c) - mu) * is;
    }
  }
  return Var<Scalar>::from_op(std::move(out), {x.node()}, [s, inv_std](Node<Scalar>& self) {
    auto& g = detail::parent_grad(self, 0);
    const Scalar m = Scalar(s.plane());
    for (int n = 0; n < s.n; ++n) {
      auto y = self.value.sample(n).array();
      auto gy = self.grad.sample(n).array();
      auto gx = g.sample(n).array();
      for (int c = 0; c < s.c; ++c) {
        const Scalar mean_g = gy.row(c).sum() / m;
        const Scalar mean_gy = (gy.row(c) * y.row(c)).sum() / m;
        gx.row(c) += inv_std[n * s.c + c] * (gy.row(c) - mean_g - y.row(c) * mean_gy);
      }
    }
  });
}

/// x * scale + shift with per-channel (N or 1, C, 1, 1) coefficients.
template <typename Scalar>
Var<Scalar> channel_affine(const Var<Scalar>& x, const Var<Scalar>& scale, const Var<Scalar>& shift) {
  const Shape s = x.shape(), ss = scale.shape(), hs = shift.shape();
  auto ok = [&](const Shape& p) { return (p.n == s.n || p.n == 1) && p.c == s.c && p.h == 1 && p.w == 1; };
  if (!ok(ss) || !ok(hs)) throw ShapeMismatch("channel_affine x " + s.str() + " scale " + ss.str() + " shift " + hs.str());
  Tensor<Scalar> out(s);
  const auto& sv = scale.value();
  const auto& hv = shift.value();
  for (int n = 0; n < s.n; ++n) {
    const int ns = ss.n == 1 ? 0 : n, nh = hs.n == 1 ? 0 : n;
    auto o = out.sample(n);
    o = x.value().sample(n);
    o.array().colwise() *= sv.rows().row(ns).transpose().array();
    o.array().colwise() += hv.rows().row(nh).transpose().array();
  }
  return Var<Scalar>::from_op(std::move(out), {x.node(), scale.node(), shift.node()}, [s, ss, hs](Node<Scalar>& self) {
    const auto& xv = detail::parent_value(self, 0);
    const auto& sv = detail::parent_value(self, 1);
    for (int n = 0; n < s.n; ++n) {
      const int ns = ss.n == 1 ? 0 : n, nh = hs.n == 1 ? 0 : n;
      const auto gy = self.grad.sample(n).array();
      if (detail::wants_grad(self, 0)) {
        auto gx = detail::parent_grad(self, 0).sample(n).array();
        gx += gy.colwise() * sv.rows().row(ns).transpose().array();
      }
      if (detail::wants_grad(self, 1))
        detail::parent_grad(self, 1).rows().row(ns) +=
            (gy * xv.sample(n).array()).rowwise().sum().matrix().transpose();
      if (detail::wants_grad(self, 2))
        detail::parent_grad(self, 2).rows().row(nh) += gy.rowwise().sum().matrix().transpose();
    }
  });
}

// ---------------------------------------------------------------------------
// Classification

/// Mean softmax cross-entropy of (N,K,1,1) logits against class labels.
template <typename Scalar>
Var<Scalar> cross_entropy(const Var<Scalar>& logits, const std::vector<int>& labels) {
  const Shape s = logits.shape();
  if (int(labels.size()) != s.n) throw ShapeMismatch("cross_entropy label count");
  const auto z = logits.value().rows();
  using RowMatrix = typename Tensor<Scalar>::RowMatrix;
  RowMatrix prob(s.n, s.c);
  Scalar total = 0;
  for (int n = 0; n < s.n; ++n) {
    if (labels[n] < 0 || labels[n] >= s.c) throw ShapeMismatch("cross_entropy label out of range");
    const Scalar zmax = z.row(n).maxCoeff();
    const auto e = (z.row(n).array() - zmax).exp();
    const Scalar denom = e.sum();
    prob.row(n) = (e / denom).matrix();
    total += -(z(n, labels[n]) - zmax - std::log(denom));
  }
  return Var<Scalar>::from_op(Tensor<Scalar>::scalar(total / Scalar(s.n)), {logits.node()},
                              [prob, labels, s](Node<Scalar>& self) {
                                auto g = detail::parent_grad(self, 0).rows();
                                const Scalar k = self.grad.item() / Scalar(s.n);
                                for (int n = 0; n < s.n; ++n) {
                                  g.row(n) += k * prob.row(n);
                                  g(n, labels[n]) -= k;
                                }
                              });
}

}  // namespace linet
