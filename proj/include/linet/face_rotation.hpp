#pragma once

#include <string>
#include <utility>
#include <vector>

#include "linet/dataset.hpp"
#include "linet/losses.hpp"
#include "linet/network_blocks.hpp"
#include "linet/optim.hpp"

namespace linet {

struct RotationConfig {
  /// Face encoder and decoder; in_channels is forced to 3.
  BlockConfig image;
  /// Landmark pose encoder; in_channels and input_size follow the face.
  BlockConfig pose = [] {
    BlockConfig c;
    c.stages = 3;
    c.base_width = 16;
    c.max_width = 64;
    return c;
  }();
  int pose_dim = 64;
  /// LSGAN patch discriminator.
  BlockConfig discriminator = [] {
    BlockConfig c;
    c.stages = 3;
    return c;
  }();
  /// Pose regressor backbone.
  BlockConfig pose_discriminator = [] {
    BlockConfig c;
    c.stages = 4;
    c.base_width = 16;
    c.max_width = 128;
    return c;
  }();
};

struct RotationWeights {
  double diff = 10.0;
  double gan = 0.1;
  double pose = 1.0;
};

/// R: U-Net over the source face whose bottleneck also receives a pose
/// feature from a landmark image, tiled over the spatial grid.
template <typename Scalar>
class RotationNet {
 public:
  RotationNet() = default;
  RotationNet(const RotationConfig& cfg, Rng& rng) {
    BlockConfig ic = cfg.image;
    ic.in_channels = 3;
    ic.validate();
    BlockConfig pc = cfg.pose;
    pc.in_channels = 1;
    pc.input_size = ic.input_size;
    image_encoder_ = Encoder<Scalar>(ic, rng);
    pose_encoder_ = Encoder<Scalar>(pc, rng);
    pose_fc_ = Linear<Scalar>(pose_encoder_.out_channels(), cfg.pose_dim, rng);
    std::vector<int> skips(ic.stages, 0);
    for (int j = 1; j < ic.stages; ++j) skips[j] = ic.width(j - 1);
    decoder_ = Decoder<Scalar>(ic, image_encoder_.out_channels() + cfg.pose_dim, 3, OutputHead::sigmoid, rng, false,
                               skips);
  }

  /// (N, pose_dim, 1, 1) embedding of a landmark image.
  Var<Scalar> pose_feature(const Var<Scalar>& pose_ref) const {
    return silu(pose_fc_(global_avg_pool(pose_encoder_(pose_ref))));
  }

  Var<Scalar> operator()(const Var<Scalar>& i_sp, const Var<Scalar>& pose_ref) const {
    const Shape fs = i_sp.shape(), ls = pose_ref.shape();
    if (ls.n != fs.n || ls.h != fs.h || ls.w != fs.w)
      throw ShapeMismatch("rotate face " + fs.str() + " with pose reference " + ls.str());
    const auto feats = image_encoder_.forward_all(i_sp);
    const Var<Scalar>& code = feats.back();
    std::vector<Var<Scalar>> skips(feats.size());
    for (std::size_t j = 1; j < feats.size(); ++j) skips[j] = feats[j - 1];
    const Var<Scalar> pose = tile_spatial(pose_feature(pose_ref), code.shape().h, code.shape().w);
    return decoder_(concat_channels(code, pose), skips);
  }

  void collect(ParameterList<Scalar>& out, const std::string& prefix) const {
    image_encoder_.collect(out, prefix + ".image_encoder");
    pose_encoder_.collect(out, prefix + ".pose_encoder");
    pose_fc_.collect(out, prefix + ".pose_fc");
    decoder_.collect(out, prefix + ".decoder");
  }

 private:
  Encoder<Scalar> image_encoder_, pose_encoder_;
  Linear<Scalar> pose_fc_;
  Decoder<Scalar> decoder_;
};

/// D_p: face image -> pose scalar in [-1, 1], shaped (N, 1, 1, 1).
template <typename Scalar>
class PoseDiscriminator {
 public:
  PoseDiscriminator() = default;
  PoseDiscriminator(BlockConfig cfg, Rng& rng) {
    cfg.in_channels = 3;
    encoder_ = Encoder<Scalar>(cfg, rng, Activation::leaky_relu);
    fc_ = Linear<Scalar>(encoder_.out_channels(), 1, rng);
  }

  Var<Scalar> operator()(const Var<Scalar>& x) const { return tanh(fc_(global_avg_pool(encoder_(x)))); }

  void collect(ParameterList<Scalar>& out, const std::string& prefix) const {
    encoder_.collect(out, prefix + ".encoder");
    fc_.collect(out, prefix + ".fc");
  }

 private:
  Encoder<Scalar> encoder_;
  Linear<Scalar> fc_;
};

/// Dataset index of a landmark with identity s and pose q, drawn uniformly over
/// the expressions present. Throws NoPoseReference when there is none.
inline std::size_t sample_pose_reference_index(const Dataset& ds, int s, int q, Rng& rng) {
  std::vector<std::size_t> candidates;
  for (int e = 0; e < int(ds.expressions.size()); ++e)
    if (const auto k = ds.find(s, e, q)) candidates.push_back(*k);
  if (candidates.empty())
    throw NoPoseReference("no landmark for identity " + std::to_string(s) + " at pose " + std::to_string(q));
  return candidates[rng.index(candidates.size())];
}

inline const Image& sample_pose_reference(const Dataset& ds, int s, int q, Rng& rng) {
  return ds.landmark_image(sample_pose_reference_index(ds, s, q, rng));
}

/// Identity s with expression e, rotated from pose p to pose q.
struct RotationSample {
  int s = 0, e = 0;
  int p = 0, q = 0;
};

template <typename Scalar>
struct RotationBatch {
  Tensor<Scalar> i_sp, pose_ref, i_r;
  std::vector<double> pose;  ///< yaw of q per sample
};

inline std::vector<RotationSample> sample_rotation_examples(const Dataset& ds, const std::vector<int>& identity_ids,
                                                            int n, Rng& rng) {
  if (identity_ids.empty()) throw ConfigError("no identities to sample from");
  const auto ne = std::uint64_t(ds.expressions.size()), np = std::uint64_t(ds.poses.size());
  std::vector<RotationSample> out;
  for (int i = 0; i < n; ++i) {
    RotationSample r;
    r.s = identity_ids[rng.index(identity_ids.size())];
    r.e = int(rng.index(ne));
    r.p = int(rng.index(np));
    r.q = int(rng.index(np));
    out.push_back(r);
  }
  return out;
}

/// Gathers faces and draws one augmented pose reference per sample.
template <typename Scalar>
RotationBatch<Scalar> make_rotation_batch(const Dataset& ds, const std::vector<RotationSample>& samples, Rng& rng) {
  std::vector<const Image*> sp, ref, r;
  RotationBatch<Scalar> b;
  for (const auto& x : samples) {
    sp.push_back(&ds.face(ds.at(x.s, x.e, x.p)));
    r.push_back(&ds.face(ds.at(x.s, x.e, x.q)));
    ref.push_back(&sample_pose_reference(ds, x.s, x.q, rng));
    b.pose.push_back(ds.poses.at(std::size_t(x.q)).yaw);
  }
  b.i_sp = stack_images<Scalar>(sp);
  b.pose_ref = stack_images<Scalar>(ref);
  b.i_r = stack_images<Scalar>(r);
  return b;
}

struct RotationReport {
  double diff = 0, gan = 0, pose = 0;
  double total = 0;
  double d_loss = 0;
  double dp_loss = 0;
};

template <typename Scalar>
struct RotationLosses {
  Var<Scalar> i_r_hat;
  Var<Scalar> diff, gan, pose, total;
};

/// R, the LSGAN discriminator D and the pose regressor D_p.
template <typename Scalar>
class RotationStage {
 public:
  RotationStage(const RotationConfig& cfg, std::uint64_t seed, AdamOptions adam = {}) : cfg_(cfg) {
    Rng rng(derive_seed(seed, {'R', 0x1417}));
    r = RotationNet<Scalar>(cfg, rng);
    BlockConfig dc = cfg.discriminator;
    dc.in_channels = 3;
    dc.input_size = cfg.image.input_size;
    d = PatchDiscriminator<Scalar>(dc, OutputHead::linear, rng);
    BlockConfig pc = cfg.pose_discriminator;
    pc.input_size = cfg.image.input_size;
    d_p = PoseDiscriminator<Scalar>(pc, rng);
    r.collect(r_params, "R");
    d.collect(d_params, "D");
    d_p.collect(dp_params, "D_p");
    opt_r = Adam<Scalar>(r_params, adam);
    opt_d = Adam<Scalar>(d_params, adam);
    opt_dp = Adam<Scalar>(dp_params, adam);
  }

  const RotationConfig& config() const { return cfg_; }

  RotationLosses<Scalar> losses(const RotationBatch<Scalar>& b, const RotationWeights& w) const {
    const Var<Scalar> sp(b.i_sp), ref(b.pose_ref), gt(b.i_r);
    RotationLosses<Scalar> out;
    out.i_r_hat = r(sp, ref);
    out.diff = pixel_l1(out.i_r_hat, gt);
    out.gan = lsgan_loss(d(gt), d(out.i_r_hat)).g_loss;
    out.pose = pose_regression_loss(d_p(out.i_r_hat), b.pose);
    out.total = weighted_sum<Scalar>({out.diff, out.gan, out.pose}, {Scalar(w.diff), Scalar(w.gan), Scalar(w.pose)});
    return out;
  }

  /// One step each for R, D (on detached R output) and D_p (on ground truth).
  RotationReport train_step(const RotationBatch<Scalar>& b, const RotationWeights& w) {
    RotationReport rep;
    zero_all();
    const auto l = losses(b, w);
    backward(l.total);
    opt_r.step();
    rep.diff = l.diff.item();
    rep.gan = l.gan.item();
    rep.pose = l.pose.item();
    rep.total = l.total.item();

    zero_all();
    const Var<Scalar> gt(b.i_r);
    const auto adv = lsgan_loss(d(gt), d(l.i_r_hat.detach()));
    backward(adv.d_loss);
    opt_d.step();
    rep.d_loss = adv.d_loss.item();

    zero_all();
    const Var<Scalar> dp_loss = pose_regression_loss(d_p(gt), b.pose);
    backward(dp_loss);
    opt_dp.step();
    rep.dp_loss = dp_loss.item();
    zero_all();
    return rep;
  }

  void set_lr(double lr) {
    opt_r.set_lr(lr);
    opt_d.set_lr(lr);
    opt_dp.set_lr(lr);
  }

  std::vector<std::pair<std::string, Adam<Scalar>*>> optimizers() {
    return {{"R", &opt_r}, {"D", &opt_d}, {"D_p", &opt_dp}};
  }

  void zero_all() {
    zero_grad(r_params);
    zero_grad(d_params);
    zero_grad(dp_params);
  }

  RotationNet<Scalar> r;
  PatchDiscriminator<Scalar> d;
  PoseDiscriminator<Scalar> d_p;
  ParameterList<Scalar> r_params, d_params, dp_params;
  Adam<Scalar> opt_r, opt_d, opt_dp;

 private:
  RotationConfig cfg_;
};

}  // namespace linet
