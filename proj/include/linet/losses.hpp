#pragma once

#include <utility>
#include <vector>

#include "linet/ops.hpp"

namespace linet {

inline constexpr double kProbEps = 1e-7;

/// Discriminator and generator objectives of one adversarial pair.
template <typename Scalar>
struct AdversarialLoss {
  Var<Scalar> d_loss;
  Var<Scalar> g_loss;
};

/// Mean absolute difference; the pixel, difference and L1 terms of all stages.
template <typename Scalar>
Var<Scalar> pixel_l1(const Var<Scalar>& pred, const Var<Scalar>& gt) {
  return l1_loss(pred, gt);
}

/// Log-loss GAN on probabilities clamped to [1e-7, 1 - 1e-7]:
/// d = -mean log D(real) - mean log(1 - D(fake)), g = -mean log D(fake).
/// Pass detached fake scores for d and live ones for g as needed; both are
/// computed from the same inputs here.
template <typename Scalar>
AdversarialLoss<Scalar> log_gan_loss(const Var<Scalar>& real_prob, const Var<Scalar>& fake_prob) {
  const Scalar lo = Scalar(kProbEps), hi = Scalar(1.0 - kProbEps);
  const Var<Scalar> r = clamp(real_prob, lo, hi);
  const Var<Scalar> f = clamp(fake_prob, lo, hi);
  Var<Scalar> d = scale(add(mean(log(r)), mean(log(add_scalar(scale(f, Scalar(-1)), Scalar(1))))), Scalar(-1));
  Var<Scalar> g = scale(mean(log(f)), Scalar(-1));
  return {d, g};
}

/// Least-squares GAN with targets real -> 1, fake -> 0 for D and fake -> 1
/// for the generator.
template <typename Scalar>
AdversarialLoss<Scalar> lsgan_loss(const Var<Scalar>& real_score, const Var<Scalar>& fake_score) {
  Var<Scalar> d = add(mean(square(add_scalar(real_score, Scalar(-1)))), mean(square(fake_score)));
  Var<Scalar> g = mean(square(add_scalar(fake_score, Scalar(-1))));
  return {d, g};
}

/// (N, 1, 1, 1) tensor of per-sample yaw targets; throws PoseOutOfRange
/// outside [-1, 1].
template <typename Scalar>
Var<Scalar> pose_targets(const std::vector<double>& poses) {
  Tensor<Scalar> t(Shape{int(poses.size()), 1, 1, 1});
  for (std::size_t i = 0; i < poses.size(); ++i) {
    if (!(poses[i] >= -1.0 && poses[i] <= 1.0)) throw PoseOutOfRange("pose " + std::to_string(poses[i]));
    t.array()[Eigen::Index(i)] = Scalar(poses[i]);
  }
  return Var<Scalar>(std::move(t));
}

/// mean (prediction - p)^2 over the batch.
template <typename Scalar>
Var<Scalar> pose_regression_loss(const Var<Scalar>& predicted, const std::vector<double>& poses) {
  const Var<Scalar> target = pose_targets<Scalar>(poses);
  check_same_shape(predicted.shape(), target.shape(), "pose_regression_loss");
  return mean(square(sub(predicted, target)));
}

/// Pose losses of one step: dp trains the regressor on real faces, pose
/// trains the generator through the regressor's view of fake faces.
template <typename Scalar>
struct PoseLoss {
  Var<Scalar> dp_loss;
  Var<Scalar> pose_loss;
};

template <typename Scalar>
PoseLoss<Scalar> pose_pair_loss(const Var<Scalar>& real_pred, const Var<Scalar>& fake_pred,
                                const std::vector<double>& poses) {
  return {pose_regression_loss(real_pred, poses), pose_regression_loss(fake_pred, poses)};
}

}  // namespace linet
