#pragma once

#include <string>
#include <utility>
#include <vector>

#include "linet/dataset.hpp"
#include "linet/losses.hpp"
#include "linet/network_blocks.hpp"
#include "linet/optim.hpp"

namespace linet {

struct TransformerConfig {
  /// Shared by E1, E2 and D1; in_channels is forced to 1.
  BlockConfig blocks;
  /// Identity classifier backbone; in_channels is forced to 1.
  BlockConfig classifier;
  /// D_r backbone; in_channels is forced to 1.
  BlockConfig discriminator = [] {
    BlockConfig c;
    c.stages = 3;
    return c;
  }();
  int identity_classes = 8;
  int id_feature_dim = 64;
};

/// Loss weights of the transformer objective. rec and cycle are both solved
/// by a zero shift, so they sit below l1; id and adv grow as C_id and D_r
/// train and are kept small.
struct TransformerWeights {
  double l1 = 10.0;
  double rec = 1.0;
  double cycle = 1.0;
  double id = 0.1;
  double adv = 0.01;
};

/// T: E1 encodes the source landmark image, E2 the driving one; D1 decodes
/// both codes (with E2 skips) into an additive shift.
template <typename Scalar>
class TransformerNet {
 public:
  TransformerNet() = default;
  TransformerNet(BlockConfig cfg, Rng& rng) {
    cfg.in_channels = 1;
    cfg.validate();
    e1_ = Encoder<Scalar>(cfg, rng);
    e2_ = Encoder<Scalar>(cfg, rng);
    std::vector<int> skips(cfg.stages, 0);
    for (int j = 1; j < cfg.stages; ++j) skips[j] = cfg.width(j - 1);
    d1_ = Decoder<Scalar>(cfg, 2 * e1_.out_channels(), 1, OutputHead::linear, rng, true, skips);
  }

  /// Pre-clamp landmark shift D1(E1(L_sp), E2(L_dq)).
  Var<Scalar> shift(const Var<Scalar>& l_sp, const Var<Scalar>& l_dq) const {
    check_same_shape(l_sp.shape(), l_dq.shape(), "transform");
    const auto driving = e2_.forward_all(l_dq);
    std::vector<Var<Scalar>> skips(driving.size());
    for (std::size_t j = 1; j < driving.size(); ++j) skips[j] = driving[j - 1];
    return d1_(concat_channels(e1_(l_sp), driving.back()), skips);
  }

  /// clamp(L_dq + shift, 0, 1).
  Var<Scalar> operator()(const Var<Scalar>& l_sp, const Var<Scalar>& l_dq) const {
    return clamp(add(l_dq, shift(l_sp, l_dq)), Scalar(0), Scalar(1));
  }

  void collect(ParameterList<Scalar>& out, const std::string& prefix) const {
    e1_.collect(out, prefix + ".e1");
    e2_.collect(out, prefix + ".e2");
    d1_.collect(out, prefix + ".d1");
  }

 private:
  Encoder<Scalar> e1_, e2_;
  Decoder<Scalar> d1_;
};

/// C_id: encoder, global pooling, a feature layer and a linear classifier.
template <typename Scalar>
class IdentityClassifier {
 public:
  struct Output {
    Var<Scalar> logits;    ///< (N, K, 1, 1)
    Var<Scalar> features;  ///< (N, F, 1, 1), penultimate layer
  };

  IdentityClassifier() = default;
  IdentityClassifier(BlockConfig cfg, int classes, int feature_dim, Rng& rng) {
    cfg.in_channels = 1;
    encoder_ = Encoder<Scalar>(cfg, rng);
    fc_ = Linear<Scalar>(encoder_.out_channels(), feature_dim, rng);
    cls_ = Linear<Scalar>(feature_dim, classes, rng);
  }

  Output operator()(const Var<Scalar>& x) const {
    Var<Scalar> f = silu(fc_(global_avg_pool(encoder_(x))));
    return {cls_(f), f};
  }

  void collect(ParameterList<Scalar>& out, const std::string& prefix) const {
    encoder_.collect(out, prefix + ".encoder");
    fc_.collect(out, prefix + ".fc");
    cls_.collect(out, prefix + ".cls");
  }

 private:
  Encoder<Scalar> encoder_;
  Linear<Scalar> fc_, cls_;
};

/// mean |f(a) - f(b)| over the classifier's feature vectors.
template <typename Scalar>
Var<Scalar> loss_id(const IdentityClassifier<Scalar>& c, const Var<Scalar>& l_sp, const Var<Scalar>& l_hat_sq) {
  check_same_shape(l_sp.shape(), l_hat_sq.shape(), "loss_id");
  return l1_loss(c(l_sp).features, c(l_hat_sq).features);
}

/// image_l1(transform(L_sp, L_sq), L_sq). `t` is any callable (L_sp, L_dq) -> L.
template <typename Scalar, typename Transform>
Var<Scalar> loss_rec(const Transform& t, const Var<Scalar>& l_sp, const Var<Scalar>& l_sq) {
  return pixel_l1(t(l_sp, l_sq), l_sq);
}

/// image_l1(transform(L_dp, transform(L_sp, L_dq)), L_dq).
template <typename Scalar, typename Transform>
Var<Scalar> loss_cycle(const Transform& t, const Var<Scalar>& l_sp, const Var<Scalar>& l_dq, const Var<Scalar>& l_dp) {
  return pixel_l1(t(l_dp, t(l_sp, l_dq)), l_dq);
}

/// Indices of one transformer training example: source identity s with
/// motion (e_p, p), driver identity d with motion (e_q, q).
struct TransformerSample {
  int s = 0, d = 0;
  int e_p = 0, p = 0;
  int e_q = 0, q = 0;
};

template <typename Scalar>
struct TransformerBatch {
  Tensor<Scalar> l_sp, l_dq, l_sq, l_dp;
  std::vector<int> class_s, class_d;  ///< classifier labels of s and d
};

/// Draws n examples over `identity_ids`; d differs from s when possible.
inline std::vector<TransformerSample> sample_transformer_examples(const Dataset& ds, const std::vector<int>& identity_ids,
                                                                  int n, Rng& rng) {
  if (identity_ids.empty()) throw ConfigError("no identities to sample from");
  std::vector<TransformerSample> out;
  const int ne = int(ds.expressions.size()), np = int(ds.poses.size());
  for (int i = 0; i < n; ++i) {
    TransformerSample t;
    t.s = identity_ids[rng.index(identity_ids.size())];
    t.d = identity_ids[rng.index(identity_ids.size())];
    if (identity_ids.size() > 1)
      while (t.d == t.s) t.d = identity_ids[rng.index(identity_ids.size())];
    t.e_p = int(rng.index(std::uint64_t(ne)));
    t.p = int(rng.index(std::uint64_t(np)));
    t.e_q = int(rng.index(std::uint64_t(ne)));
    t.q = int(rng.index(std::uint64_t(np)));
    out.push_back(t);
  }
  return out;
}

/// Gathers landmark images; missing ground truth raises PairingError.
/// `class_of` maps identity index to classifier label.
template <typename Scalar>
TransformerBatch<Scalar> make_transformer_batch(const Dataset& ds, const std::vector<TransformerSample>& samples,
                                                const std::vector<int>& class_of) {
  std::vector<const Image*> sp, dq, sq, dp;
  TransformerBatch<Scalar> b;
  for (const auto& t : samples) {
    sp.push_back(&ds.landmark_image(ds.at(t.s, t.e_p, t.p)));
    dq.push_back(&ds.landmark_image(ds.at(t.d, t.e_q, t.q)));
    sq.push_back(&ds.landmark_image(ds.at(t.s, t.e_q, t.q)));
    dp.push_back(&ds.landmark_image(ds.at(t.d, t.e_p, t.p)));
    b.class_s.push_back(class_of.at(std::size_t(t.s)));
    b.class_d.push_back(class_of.at(std::size_t(t.d)));
  }
  b.l_sp = stack_images<Scalar>(sp);
  b.l_dq = stack_images<Scalar>(dq);
  b.l_sq = stack_images<Scalar>(sq);
  b.l_dp = stack_images<Scalar>(dp);
  return b;
}

/// Identity index -> classifier label for the training identities; -1 elsewhere.
inline std::vector<int> classifier_labels(const Dataset& ds) {
  std::vector<int> labels(ds.identities.size(), -1);
  for (std::size_t i = 0; i < ds.train_ids.size(); ++i) labels[std::size_t(ds.train_ids[i])] = int(i);
  return labels;
}

struct TransformerReport {
  double l1 = 0, rec = 0, cycle = 0, id = 0, adv = 0;
  double total = 0;
  double d_loss = 0;
  double ce = 0;
  double accuracy = 0;  ///< classifier accuracy on the batch, before its step
};

/// The five weighted terms of one batch as graph nodes.
template <typename Scalar>
struct TransformerLosses {
  Var<Scalar> l_hat_sq;
  Var<Scalar> l1, rec, cycle, id, adv, total;
};

template <typename Scalar>
double batch_accuracy(const Var<Scalar>& logits, const std::vector<int>& labels) {
  const Shape s = logits.shape();
  int correct = 0;
  for (int n = 0; n < s.n; ++n) {
    int best = 0;
    for (int k = 1; k < s.c; ++k)
      if (logits.value()(n, k, 0, 0) > logits.value()(n, best, 0, 0)) best = k;
    correct += best == labels[std::size_t(n)];
  }
  return double(correct) / s.n;
}

/// T, C_id and D_r with one Adam optimizer each.
template <typename Scalar>
class TransformerStage {
 public:
  TransformerStage(const TransformerConfig& cfg, std::uint64_t seed, AdamOptions adam = {})
      : cfg_(cfg) {
    Rng rng(derive_seed(seed, {'T', 0x1417}));
    t = TransformerNet<Scalar>(cfg.blocks, rng);
    BlockConfig cc = cfg.classifier;
    cc.input_size = cfg.blocks.input_size;
    c_id = IdentityClassifier<Scalar>(cc, cfg.identity_classes, cfg.id_feature_dim, rng);
    BlockConfig dc = cfg.discriminator;
    dc.in_channels = 1;
    dc.input_size = cfg.blocks.input_size;
    d_r = PatchDiscriminator<Scalar>(dc, OutputHead::sigmoid, rng);
    t.collect(t_params, "T");
    c_id.collect(c_params, "C_id");
    d_r.collect(d_params, "D_r");
    opt_t = Adam<Scalar>(t_params, adam);
    opt_c = Adam<Scalar>(c_params, adam);
    opt_d = Adam<Scalar>(d_params, adam);
  }

  const TransformerConfig& config() const { return cfg_; }

  TransformerLosses<Scalar> losses(const TransformerBatch<Scalar>& b, const TransformerWeights& w) const {
    const Var<Scalar> sp(b.l_sp), dq(b.l_dq), sq(b.l_sq), dp(b.l_dp);
    TransformerLosses<Scalar> out;
    out.l_hat_sq = t(sp, dq);
    out.l1 = pixel_l1(out.l_hat_sq, sq);
    out.rec = loss_rec(t, sp, sq);
    out.cycle = pixel_l1(t(dp, out.l_hat_sq), dq);
    out.id = loss_id(c_id, sp, out.l_hat_sq);
    out.adv = log_gan_loss(d_r(sq), d_r(out.l_hat_sq)).g_loss;
    out.total = weighted_sum<Scalar>({out.l1, out.rec, out.cycle, out.id, out.adv},
                                     {Scalar(w.l1), Scalar(w.rec), Scalar(w.cycle), Scalar(w.id), Scalar(w.adv)});
    return out;
  }

  /// One step each for T (weighted objective), D_r (log loss on real L_sq
  /// against detached L̂_sq) and C_id (cross-entropy on L_sp and L_dq).
  TransformerReport train_step(const TransformerBatch<Scalar>& b, const TransformerWeights& w) {
    TransformerReport r;
    zero_all();
    const auto l = losses(b, w);
    backward(l.total);
    opt_t.step();
    r.l1 = l.l1.item();
    r.rec = l.rec.item();
    r.cycle = l.cycle.item();
    r.id = l.id.item();
    r.adv = l.adv.item();
    r.total = l.total.item();

    zero_all();
    const Var<Scalar> fake = l.l_hat_sq.detach();
    const auto adv = log_gan_loss(d_r(Var<Scalar>(b.l_sq)), d_r(fake));
    backward(adv.d_loss);
    opt_d.step();
    r.d_loss = adv.d_loss.item();

    const auto cls = classifier_step(b.l_sp, b.class_s, b.l_dq, b.class_d);
    r.ce = cls.first;
    r.accuracy = cls.second;
    zero_all();
    return r;
  }

  /// Cross-entropy step of C_id on two labelled image batches; returns
  /// (loss, accuracy before the step).
  std::pair<double, double> classifier_step(const Tensor<Scalar>& a, const std::vector<int>& la, const Tensor<Scalar>& b,
                                            const std::vector<int>& lb) {
    zero_all();
    const auto oa = c_id(Var<Scalar>(a));
    const auto ob = c_id(Var<Scalar>(b));
    const Var<Scalar> ce =
        weighted_sum<Scalar>({cross_entropy(oa.logits, la), cross_entropy(ob.logits, lb)}, {Scalar(0.5), Scalar(0.5)});
    const double acc = 0.5 * (batch_accuracy(oa.logits, la) + batch_accuracy(ob.logits, lb));
    backward(ce);
    opt_c.step();
    zero_all();
    return {ce.item(), acc};
  }

  void set_lr(double lr) {
    opt_t.set_lr(lr);
    opt_c.set_lr(lr);
    opt_d.set_lr(lr);
  }

  std::vector<std::pair<std::string, Adam<Scalar>*>> optimizers() {
    return {{"T", &opt_t}, {"C_id", &opt_c}, {"D_r", &opt_d}};
  }

  void zero_all() {
    zero_grad(t_params);
    zero_grad(c_params);
    zero_grad(d_params);
  }

  TransformerNet<Scalar> t;
  IdentityClassifier<Scalar> c_id;
  PatchDiscriminator<Scalar> d_r;
  ParameterList<Scalar> t_params, c_params, d_params;
  Adam<Scalar> opt_t, opt_c, opt_d;

 private:
  TransformerConfig cfg_;
};

}  // namespace linet
