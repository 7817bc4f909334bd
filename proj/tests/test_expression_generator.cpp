#include <gtest/gtest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "linet/expression_generator.hpp"
#include "test_support.hpp"

using namespace linet;
using namespace linet::testing;

namespace {

std::vector<TransformerSample> fixed_samples(const Dataset& ds, int n, std::uint64_t seed) {
  Rng rng(seed);
  return sample_transformer_examples(ds, ds.train_ids, n, rng);
}

double max_abs_diff(const Tensor<double>& a, const Tensor<double>& b) {
  return (a.array() - b.array()).abs().maxCoeff();
}

}  // namespace

TEST(ExpressionEncoderTest, PositiveStdAndDeterminism) {
  Rng rng(1);
  ExpressionEncoder<double> e(tiny_blocks(32, 2, 4), 6, 16, 4, rng);
  EXPECT_EQ(e.layers(), 4);
  for (double amp : {1.0, 30.0}) {
    const Var<double> x(random_tensor({3, 1, 32, 32}, rng, -amp, amp));
    const auto a = e(x), b = e(x);
    ASSERT_EQ(a.size(), 4u);
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(a[i].mean.shape(), (Shape{3, 16, 1, 1}));
      EXPECT_GT(a[i].std.value().array().minCoeff(), 0.0);
      EXPECT_TRUE((a[i].mean.value().array() == b[i].mean.value().array()).all());
      EXPECT_TRUE((a[i].std.value().array() == b[i].std.value().array()).all());
    }
  }
}

TEST(EnhancingGeneratorTest, ShapeRangeDeterminismAndErrors) {
  Rng rng(2);
  EnhancingGenerator<double> g(tiny_blocks(32, 2, 4, 2), rng);
  ExpressionEncoder<double> e(tiny_blocks(32, 2, 4), 6, g.bottleneck_channels(), g.adain_layers(), rng);
  const Var<double> r(random_tensor({2, 3, 32, 32}, rng, 0, 1)), sp(random_tensor({2, 3, 32, 32}, rng, 0, 1));
  const auto expr = e(Var<double>(random_tensor({2, 1, 32, 32}, rng, 0, 1)));
  const auto a = g(r, sp, expr), b = g(r, sp, expr);
  EXPECT_EQ(a.shape(), sp.shape());
  EXPECT_TRUE((a.value().array() == b.value().array()).all());
  EXPECT_GE(a.value().array().minCoeff(), 0.0);
  EXPECT_LE(a.value().array().maxCoeff(), 1.0);

  auto short_expr = expr;
  short_expr.pop_back();
  EXPECT_THROW(g(r, sp, short_expr), ShapeMismatch);
  EXPECT_THROW(g(r, Var<double>(random_tensor({2, 3, 16, 16}, rng)), expr), ShapeMismatch);
}

TEST(EnhancingGeneratorTest, ExpressionInputReachesOutput) {
  Rng rng(3);
  GeneratorStage<double> stage(tiny_generator(), 3);
  const Var<double> r(random_tensor({1, 3, 32, 32}, rng, 0, 1)), sp(random_tensor({1, 3, 32, 32}, rng, 0, 1));
  const auto a = stage.generate(r, sp, Var<double>(random_tensor({1, 1, 32, 32}, rng, 0, 1)));
  const auto b = stage.generate(r, sp, Var<double>(random_tensor({1, 1, 32, 32}, rng, 0, 1)));
  EXPECT_GT(max_abs_diff(a.value(), b.value()), 0.0);
}

TEST(GeneratorLossesTest, PerceptualIsPseudometric) {
  Rng rng(4);
  const auto nets = default_perceptual_networks<double>();
  std::vector<const PerceptualNetwork<double>*> ptrs{nets[0].get(), nets[1].get()};
  for (int trial = 0; trial < 5; ++trial) {
    const Var<double> a(random_tensor({2, 3, 32, 32}, rng, 0, 1)), b(random_tensor({2, 3, 32, 32}, rng, 0, 1)),
        c(random_tensor({2, 3, 32, 32}, rng, 0, 1));
    EXPECT_EQ(perceptual_loss(ptrs, a, a).item(), 0.0);
    const double ab = perceptual_loss(ptrs, a, b).item(), ba = perceptual_loss(ptrs, b, a).item();
    EXPECT_GT(ab, 0.0);
    EXPECT_NEAR(ab, ba, 1e-12 * ab);
    // Triangle inequality holds per tap activation for an L1 sum.
    EXPECT_LE(ab, perceptual_loss(ptrs, a, c).item() + perceptual_loss(ptrs, c, b).item() + 1e-9);
  }
}

TEST(GeneratorLossesTest, AdversarialMirrorsTransformer) {
  const Shape s{3, 1, 4, 4};
  auto v = [&](double x) { return Var<double>(Tensor<double>(s, x)); };
  EXPECT_LE(log_gan_loss(v(1 - 1e-7), v(1e-7)).d_loss.item(), 1e-6);
  EXPECT_NEAR(log_gan_loss(v(0.5), v(0.5)).d_loss.item(), 2 * std::log(2.0), 1e-12);
  EXPECT_NEAR(log_gan_loss(v(0.5), v(0.5)).g_loss.item(), std::log(2.0), 1e-12);
}

TEST(GeneratorBatchTest, TeacherCompositionUsesGroundTruth) {
  const Dataset& ds = small_dataset();
  const auto samples = fixed_samples(ds, 6, 5);
  const auto b = make_generator_batch<double>(ds, samples, Composition::teacher);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& x = samples[i];
    const int n = int(i);
    EXPECT_TRUE(tensor_to_image(b.i_r_hat, n) == ds.face(ds.at(x.s, x.e_p, x.q)));
    EXPECT_TRUE(tensor_to_image(b.i_sp, n) == ds.face(ds.at(x.s, x.e_p, x.p)));
    EXPECT_TRUE(tensor_to_image(b.l_expr, n) == ds.landmark_image(ds.at(x.s, x.e_q, x.q)));
    EXPECT_TRUE(tensor_to_image(b.i_sq, n) == ds.face(ds.at(x.s, x.e_q, x.q)));
  }
}

TEST(GeneratorBatchTest, AblationCompositions) {
  const Dataset& ds = small_dataset();
  const auto samples = fixed_samples(ds, 4, 6);
  Rng rng(6);
  TransformerNet<double> t(tiny_blocks(32, 2, 4), rng);
  RotationConfig rc;
  rc.image = tiny_blocks(32, 2, 4);
  rc.pose = tiny_blocks(32, 2, 4);
  rc.pose_dim = 4;
  RotationNet<double> r(rc, rng);

  const auto vanilla = make_generator_batch<double>(ds, samples, Composition::vanilla);
  const auto with_t = make_generator_batch<double>(ds, samples, Composition::with_t, {&t, nullptr});
  const auto full = make_generator_batch<double>(ds, samples, Composition::full, {&t, &r});
  EXPECT_TRUE((vanilla.i_r_hat.array() == vanilla.i_sp.array()).all());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& x = samples[i];
    EXPECT_TRUE(tensor_to_image(vanilla.l_expr, int(i)) == ds.landmark_image(ds.at(x.d, x.e_q, x.q)));
  }
  // Zero-initialised T passes the driving landmarks through.
  EXPECT_TRUE((with_t.l_expr.array() == vanilla.l_expr.array()).all());
  EXPECT_TRUE((with_t.i_r_hat.array() == with_t.i_sp.array()).all());
  const auto expect_r = r(Var<double>(full.i_sp), Var<double>(full.l_expr)).value();
  EXPECT_TRUE((full.i_r_hat.array() == expect_r.array()).all());

  EXPECT_THROW(make_generator_batch<double>(ds, samples, Composition::with_t), DependencyError);
  EXPECT_THROW(make_generator_batch<double>(ds, samples, Composition::full, {&t, nullptr}), DependencyError);
  EXPECT_EQ(parse_composition("vanilla+T+R"), Composition::full);
  EXPECT_THROW(parse_composition("vanilla+R"), ConfigError);
}

TEST(GeneratorBatchTest, MissingGroundTruthRaisesPairingError) {
  const Dataset& full = small_dataset();
  Dataset ds;
  ds.resolution = full.resolution;
  ds.identities = full.identities;
  ds.expressions = full.expressions;
  ds.poses = full.poses;
  for (std::size_t i = 0; i < full.size(); ++i)
    if (i != full.at(1, 2, 0)) ds.add(full.record(i), full.face(i), full.landmarks(i));
  std::vector<TransformerSample> ex{{1, 0, 0, 1, 2, 0}};
  EXPECT_THROW(make_generator_batch<double>(ds, ex, Composition::teacher), PairingError);
}

TEST(GeneratorStep, ZeroWeightsLeaveGUnchanged) {
  const Dataset& ds = small_dataset();
  GeneratorStage<double> stage(tiny_generator(), 7, {1e-3});
  std::vector<Tensor<double>> before;
  for (const auto& p : stage.g_params) before.push_back(p.var.value());
  const auto b = make_generator_batch<double>(ds, fixed_samples(ds, 3, 8), Composition::teacher);
  stage.train_step(b, {0, 0, 0});
  for (std::size_t i = 0; i < before.size(); ++i)
    EXPECT_TRUE((stage.g_params[i].var.value().array() == before[i].array()).all()) << stage.g_params[i].name;
}

TEST(GeneratorStep, ReportedTotalIsWeightedSum) {
  const Dataset& ds = small_dataset();
  GeneratorStage<double> stage(tiny_generator(), 8, {1e-3});
  const auto b = make_generator_batch<double>(ds, fixed_samples(ds, 3, 9), Composition::teacher);
  const GeneratorWeights w{2.0, 0.003, 0.4};
  for (int i = 0; i < 3; ++i) {
    const auto r = stage.train_step(b, w);
    EXPECT_NEAR(r.total, w.pix * r.pix + w.per * r.per + w.adv * r.adv, 1e-6);
  }
  const GeneratorWeights w2{4 * w.pix, 4 * w.per, 4 * w.adv};
  EXPECT_EQ(stage.losses(b, w2).total.item(), 4 * stage.losses(b, w).total.item());
}

TEST(GeneratorStep, GradientsMatchFiniteDifferences) {
  const Dataset& ds = small_dataset();
  GeneratorStage<double> stage(tiny_generator(), 10, {1e-2});
  const auto b = make_generator_batch<double>(ds, fixed_samples(ds, 2, 10), Composition::teacher);
  const GeneratorWeights w{1.0, 0.01, 1.0};
  for (int i = 0; i < 3; ++i) stage.train_step(b, w);
  const Var<double> gt(b.i_sq), sp(b.i_sp);
  auto total = check_gradients([&] { return stage.losses(b, w).total; }, stage.g_params, 4, 7, 1e-6);
  EXPECT_LT(total.max_rel_error, 1e-3) << total.worst;
  auto per = check_gradients([&] { return stage.losses(b, w).per; }, stage.g_params, 4, 8, 1e-6);
  EXPECT_LT(per.max_rel_error, 1e-3) << per.worst;
  auto d = check_gradients([&] { return log_gan_loss(stage.d_g(gt), stage.d_g(sp)).d_loss; }, stage.d_params, 5, 7,
                           1e-6);
  EXPECT_LT(d.max_rel_error, 1e-3) << d.worst;
}
