#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "linet/dataset.hpp"
#include "linet/face_rotation.hpp"
#include "linet/landmark_transformer.hpp"
#include "linet/losses.hpp"
#include "linet/network_blocks.hpp"
#include "linet/optim.hpp"
#include "linet/perceptual.hpp"

namespace linet {

struct GeneratorConfig {
  /// G's encoder/decoder; in_channels is forced to 6 (I_R_hat and I_sp).
  /// res_blocks counts AdaIN residual blocks at the bottleneck.
  BlockConfig blocks = [] {
    BlockConfig c;
    c.res_blocks = 4;
    return c;
  }();
  /// Expression encoder backbone over a landmark image.
  BlockConfig expression = [] {
    BlockConfig c;
    c.stages = 4;
    c.base_width = 16;
    c.max_width = 128;
    return c;
  }();
  int style_dim = 64;
  BlockConfig discriminator = [] {
    BlockConfig c;
    c.stages = 3;
    return c;
  }();
};

/// The perceptual term sums over tap activations, so it runs about 2e4
/// times larger than the pixel term; its weight compensates.
struct GeneratorWeights {
  double pix = 10.0;
  double per = 1e-4;
  double adv = 0.1;
};

/// E_e: landmark image -> style vector -> one AdaINParams per AdaIN layer
/// (two per residual block).
template <typename Scalar>
class ExpressionEncoder {
 public:
  ExpressionEncoder() = default;
  ExpressionEncoder(BlockConfig cfg, int style_dim, int channels, int adain_layers, Rng& rng) {
    cfg.in_channels = 1;
    encoder_ = Encoder<Scalar>(cfg, rng);
    fc_ = Linear<Scalar>(encoder_.out_channels(), style_dim, rng);
    for (int i = 0; i < adain_layers; ++i) heads_.emplace_back(style_dim, channels, rng);
  }

  int layers() const { return int(heads_.size()); }

  Var<Scalar> style(const Var<Scalar>& landmarks) const {
    return silu(fc_(global_avg_pool(encoder_(landmarks))));
  }

  std::vector<AdaINParams<Scalar>> operator()(const Var<Scalar>& landmarks) const {
    const Var<Scalar> s = style(landmarks);
    std::vector<AdaINParams<Scalar>> out;
    for (const auto& h : heads_) out.push_back(h(s));
    return out;
  }

  void collect(ParameterList<Scalar>& out, const std::string& prefix) const {
    encoder_.collect(out, prefix + ".encoder");
    fc_.collect(out, prefix + ".fc");
    for (std::size_t i = 0; i < heads_.size(); ++i) heads_[i].collect(out, prefix + ".head" + std::to_string(i));
  }

 private:
  Encoder<Scalar> encoder_;
  Linear<Scalar> fc_;
  std::vector<StyleHead<Scalar>> heads_;
};

/// G: U-Net over concat(I_R_hat, I_sp) with AdaIN residual blocks at the
/// bottleneck and a sigmoid head.
template <typename Scalar>
class EnhancingGenerator {
 public:
  EnhancingGenerator() = default;
  EnhancingGenerator(BlockConfig cfg, Rng& rng) {
    cfg.in_channels = 6;
    cfg.validate();
    encoder_ = Encoder<Scalar>(cfg, rng);
    for (int i = 0; i < cfg.res_blocks; ++i) blocks_.emplace_back(encoder_.out_channels(), rng);
    std::vector<int> skips(cfg.stages, 0);
    for (int j = 1; j < cfg.stages; ++j) skips[j] = cfg.width(j - 1);
    decoder_ = Decoder<Scalar>(cfg, encoder_.out_channels(), 3, OutputHead::sigmoid, rng, false, skips);
  }

  int adain_layers() const { return 2 * int(blocks_.size()); }
  int bottleneck_channels() const { return encoder_.out_channels(); }

  Var<Scalar> operator()(const Var<Scalar>& i_r_hat, const Var<Scalar>& i_sp,
                         const std::vector<AdaINParams<Scalar>>& expr) const {
    check_same_shape(i_r_hat.shape(), i_sp.shape(), "enhance");
    if (int(expr.size()) != adain_layers())
      throw ShapeMismatch("enhance expects " + std::to_string(adain_layers()) + " AdaIN parameter sets, got " +
                          std::to_string(expr.size()));
    const auto feats = encoder_.forward_all(concat_channels(i_r_hat, i_sp));
    Var<Scalar> h = feats.back();
    for (std::size_t b = 0; b < blocks_.size(); ++b) h = blocks_[b](h, expr[2 * b], expr[2 * b + 1]);
    std::vector<Var<Scalar>> skips(feats.size());
    for (std::size_t j = 1; j < feats.size(); ++j) skips[j] = feats[j - 1];
    return decoder_(h, skips);
  }

  void collect(ParameterList<Scalar>& out, const std::string& prefix) const {
    encoder_.collect(out, prefix + ".encoder");
    for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].collect(out, prefix + ".res" + std::to_string(i));
    decoder_.collect(out, prefix + ".decoder");
  }

 private:
  Encoder<Scalar> encoder_;
  std::vector<AdaINResBlock<Scalar>> blocks_;
  Decoder<Scalar> decoder_;
};

/// How G's rotated-face and expression inputs are produced.
enum class Composition {
  teacher,  ///< ground-truth I_R and L_sq
  vanilla,  ///< I_R_hat = I_sp, expression from L_dq
  with_t,   ///< I_R_hat = I_sp, expression from T(L_sp, L_dq)
  full,     ///< I_R_hat = R(I_sp, L_hat_sq), expression from L_hat_sq
};

std::string composition_name(Composition c);
Composition parse_composition(const std::string& name);

template <typename Scalar>
struct GeneratorBatch {
  Tensor<Scalar> i_r_hat, i_sp, l_expr, i_sq;
};

/// Frozen upstream modules; both may be null for compositions that skip them.
template <typename Scalar>
struct FrozenModules {
  const TransformerNet<Scalar>* t = nullptr;
  const RotationNet<Scalar>* r = nullptr;
};

/// Builds G's inputs for samples (s, d, e_p, p, e_q, q); the target is
/// I_sq. Missing ground truth raises PairingError; a composition whose
/// frozen module is absent raises DependencyError.
template <typename Scalar>
GeneratorBatch<Scalar> make_generator_batch(const Dataset& ds, const std::vector<TransformerSample>& samples,
                                            Composition c, FrozenModules<Scalar> frozen = {}) {
  std::vector<const Image*> sp, dq, sq_faces, r_faces, sq_lms, sp_lms;
  for (const auto& x : samples) {
    const std::size_t i_sp = ds.at(x.s, x.e_p, x.p), i_sq = ds.at(x.s, x.e_q, x.q), i_dq = ds.at(x.d, x.e_q, x.q);
    sp.push_back(&ds.face(i_sp));
    sp_lms.push_back(&ds.landmark_image(i_sp));
    dq.push_back(&ds.landmark_image(i_dq));
    sq_faces.push_back(&ds.face(i_sq));
    if (c == Composition::teacher) {
      r_faces.push_back(&ds.face(ds.at(x.s, x.e_p, x.q)));
      sq_lms.push_back(&ds.landmark_image(i_sq));
    }
  }
  GeneratorBatch<Scalar> b;
  b.i_sp = stack_images<Scalar>(sp);
  b.i_sq = stack_images<Scalar>(sq_faces);
  if (c == Composition::teacher) {
    b.i_r_hat = stack_images<Scalar>(r_faces);
    b.l_expr = stack_images<Scalar>(sq_lms);
    return b;
  }
  if (c == Composition::vanilla) {
    b.i_r_hat = b.i_sp;
    b.l_expr = stack_images<Scalar>(dq);
    return b;
  }
  if (!frozen.t) throw DependencyError("composition " + composition_name(c) + " needs a trained T");
  if (c == Composition::full && !frozen.r) throw DependencyError("composition full needs a trained R");
  NoGradGuard guard;
  const Var<Scalar> l_hat = (*frozen.t)(Var<Scalar>(stack_images<Scalar>(sp_lms)), Var<Scalar>(stack_images<Scalar>(dq)));
  b.l_expr = l_hat.value();
  b.i_r_hat = c == Composition::full ? (*frozen.r)(Var<Scalar>(b.i_sp), l_hat).value() : b.i_sp;
  return b;
}

struct GeneratorReport {
  double pix = 0, per = 0, adv = 0;
  double total = 0;
  double d_loss = 0;
};

template <typename Scalar>
struct GeneratorLosses {
  Var<Scalar> output;
  Var<Scalar> pix, per, adv, total;
};

/// G with E_e (one optimizer), the realness discriminator D_g and fixed
/// perceptual networks.
template <typename Scalar>
class GeneratorStage {
 public:
  GeneratorStage(const GeneratorConfig& cfg, std::uint64_t seed, AdamOptions adam = {}) : cfg_(cfg) {
    Rng rng(derive_seed(seed, {'G', 0x1417}));
    g = EnhancingGenerator<Scalar>(cfg.blocks, rng);
    BlockConfig ec = cfg.expression;
    ec.input_size = cfg.blocks.input_size;
    e_e = ExpressionEncoder<Scalar>(ec, cfg.style_dim, g.bottleneck_channels(), g.adain_layers(), rng);
    BlockConfig dc = cfg.discriminator;
    dc.in_channels = 3;
    dc.input_size = cfg.blocks.input_size;
    d_g = PatchDiscriminator<Scalar>(dc, OutputHead::sigmoid, rng);
    g.collect(g_params, "G");
    e_e.collect(g_params, "E_e");
    d_g.collect(d_params, "D_g");
    opt_g = Adam<Scalar>(g_params, adam);
    opt_d = Adam<Scalar>(d_params, adam);
    owned_nets_ = default_perceptual_networks<Scalar>();
    for (const auto& n : owned_nets_) perceptual.push_back(n.get());
  }

  const GeneratorConfig& config() const { return cfg_; }

  Var<Scalar> generate(const Var<Scalar>& i_r_hat, const Var<Scalar>& i_sp, const Var<Scalar>& l_expr) const {
    return g(i_r_hat, i_sp, e_e(l_expr));
  }

  GeneratorLosses<Scalar> losses(const GeneratorBatch<Scalar>& b, const GeneratorWeights& w) const {
    const Var<Scalar> gt(b.i_sq);
    GeneratorLosses<Scalar> out;
    out.output = generate(Var<Scalar>(b.i_r_hat), Var<Scalar>(b.i_sp), Var<Scalar>(b.l_expr));
    out.pix = pixel_l1(out.output, gt);
    out.per = perceptual_loss(perceptual, out.output, gt);
    out.adv = log_gan_loss(d_g(gt), d_g(out.output)).g_loss;
    out.total = weighted_sum<Scalar>({out.pix, out.per, out.adv}, {Scalar(w.pix), Scalar(w.per), Scalar(w.adv)});
    return out;
  }

  /// One step for G and E_e, then one for D_g on the detached output.
  GeneratorReport train_step(const GeneratorBatch<Scalar>& b, const GeneratorWeights& w) {
    GeneratorReport rep;
    zero_all();
    const auto l = losses(b, w);
    backward(l.total);
    opt_g.step();
    rep.pix = l.pix.item();
    rep.per = l.per.item();
    rep.adv = l.adv.item();
    rep.total = l.total.item();

    zero_all();
    const auto adv = log_gan_loss(d_g(Var<Scalar>(b.i_sq)), d_g(l.output.detach()));
    backward(adv.d_loss);
    opt_d.step();
    rep.d_loss = adv.d_loss.item();
    zero_all();
    return rep;
  }

  void set_lr(double lr) {
    opt_g.set_lr(lr);
    opt_d.set_lr(lr);
  }

  std::vector<std::pair<std::string, Adam<Scalar>*>> optimizers() { return {{"G", &opt_g}, {"D_g", &opt_d}}; }

  void zero_all() {
    zero_grad(g_params);
    zero_grad(d_params);
  }

  EnhancingGenerator<Scalar> g;
  ExpressionEncoder<Scalar> e_e;
  PatchDiscriminator<Scalar> d_g;
  ParameterList<Scalar> g_params, d_params;
  Adam<Scalar> opt_g, opt_d;
  std::vector<const PerceptualNetwork<Scalar>*> perceptual;

 private:
  GeneratorConfig cfg_;
  std::vector<std::unique_ptr<PerceptualNetwork<Scalar>>> owned_nets_;
};

}  // namespace linet
