#pragma once

// Fixed-budget training pilots on the synthetic 8x8x5 set at 64x64. Budgets,
// widths and learning rates were set once from calibration runs and are
// frozen; the thresholds checked against them live with the callers.

#include <chrono>
#include <memory>
#include <vector>

#include "linet/pipeline.hpp"

namespace linet::pilots {

inline constexpr std::uint64_t kSeed = 7;
inline constexpr double kLr = 1e-3;

/// 8 identities x 8 expressions x 5 poses; 6 train, 2 test identities.
inline const Dataset& dataset() {
  static const Dataset ds = make_synthetic_dataset({8, 8, 5, 64, kSeed});
  return ds;
}

/// Same grid with every identity in the training split, for C_id.
inline const Dataset& all_train_dataset() {
  static const Dataset ds = make_synthetic_dataset({8, 8, 5, 64, kSeed, 0});
  return ds;
}

inline RunConfig config(int width) {
  RunConfig rc;
  rc.seed = kSeed;
  rc.model = {width, 4, 2};
  return rc;
}

inline AdamOptions adam() {
  AdamOptions a;
  a.lr = kLr;
  return a;
}

/// Fixed training examples drawn from the training identities.
inline std::vector<TransformerSample> fixed_samples(int n) {
  Rng rng(derive_seed(kSeed, {'P', std::uint64_t(n)}));
  return sample_transformer_examples(dataset(), dataset().train_ids, n, rng);
}

class Stopwatch {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

struct Trace {
  double first = 0.0;  ///< monitored value before any step
  double last = 0.0;   ///< monitored value after the last step
  double seconds = 0.0;
};

// ---------------------------------------------------------------------------
// T

inline Trace transformer_pilot(int width, int n, int steps) {
  const Stopwatch clock;
  const RunConfig rc = config(width);
  const Dataset& ds = dataset();
  TransformerStage<float> st(transformer_config(rc, int(ds.train_ids.size())), kSeed, adam());
  const auto b = make_transformer_batch<float>(ds, fixed_samples(n), classifier_labels(ds));
  Trace tr;
  for (int k = 0; k < steps; ++k) {
    const auto r = st.train_step(b, rc.t_weights);
    if (k == 0) tr.first = n == 1 ? r.l1 : r.total;
  }
  NoGradGuard guard;
  const auto l = st.losses(b, rc.t_weights);
  tr.last = n == 1 ? l.l1.item() : l.total.item();
  tr.seconds = clock.seconds();
  return tr;
}

/// Mean landmark-image L1 of T on one held-in pair after 1500 steps.
inline Trace transformer_overfit() { return transformer_pilot(16, 1, 1500); }
/// Total T objective on a fixed 8-sample batch over 200 steps.
inline Trace transformer_decrease() { return transformer_pilot(8, 8, 200); }

/// C_id training accuracy over all 320 landmark images of 8 identities.
inline Trace classifier_overfit(int steps = 400) {
  const Stopwatch clock;
  const Dataset& ds = all_train_dataset();
  TransformerStage<float> st(transformer_config(config(8), 8), kSeed, adam());
  Rng rng(derive_seed(kSeed, {'C'}));
  auto draw = [&](std::vector<int>& labels) {
    std::vector<const Image*> ims;
    labels.clear();
    for (int k = 0; k < 16; ++k) {
      const std::size_t i = rng.index(ds.size());
      ims.push_back(&ds.landmark_image(i));
      labels.push_back(ds.record(i).identity);
    }
    return stack_images<float>(ims);
  };
  Trace tr;
  std::vector<int> la, lb;
  for (int k = 0; k < steps; ++k) {
    const auto a = draw(la);
    const auto b = draw(lb);
    const auto r = st.classifier_step(a, la, b, lb);
    if (k == 0) tr.first = r.second;
  }
  NoGradGuard guard;
  int correct = 0;
  for (std::size_t lo = 0; lo < ds.size(); lo += 40) {
    std::vector<const Image*> ims;
    std::vector<int> labels;
    for (std::size_t i = lo; i < std::min(ds.size(), lo + 40); ++i) {
      ims.push_back(&ds.landmark_image(i));
      labels.push_back(ds.record(i).identity);
    }
    const auto out = st.c_id(Var<float>(stack_images<float>(ims)));
    correct += int(std::lround(batch_accuracy(out.logits, labels) * double(labels.size())));
  }
  tr.last = double(correct) / double(ds.size());
  tr.seconds = clock.seconds();
  return tr;
}

// ---------------------------------------------------------------------------
// R

inline Trace rotation_pilot(int width, int n, int steps) {
  const Stopwatch clock;
  const RunConfig rc = config(width);
  const Dataset& ds = dataset();
  RotationStage<float> st(rotation_config(rc), kSeed, adam());
  Rng rng(derive_seed(kSeed, {'P', 'R', std::uint64_t(n)}));
  const auto samples = sample_rotation_examples(ds, ds.train_ids, n, rng);
  const auto b = make_rotation_batch<float>(ds, samples, rng);
  Trace tr;
  for (int k = 0; k < steps; ++k) {
    const auto r = st.train_step(b, rc.r_weights);
    if (k == 0) tr.first = r.diff;
  }
  NoGradGuard guard;
  tr.last = st.losses(b, rc.r_weights).diff.item();
  tr.seconds = clock.seconds();
  return tr;
}

/// L_diff of R on one held-in pair after 1500 steps.
inline Trace rotation_overfit() { return rotation_pilot(8, 1, 1500); }
/// L_diff on a fixed 8-sample batch over 300 steps.
inline Trace rotation_decrease() { return rotation_pilot(8, 8, 300); }

// ---------------------------------------------------------------------------
// G

struct GeneratorPilot {
  std::unique_ptr<GeneratorStage<float>> stage;
  Trace trace;
};

/// G on teacher-forced triples: steps on a fixed batch of n, or on fresh
/// random batches of n when `fixed` is false. Monitors L_pix.
inline GeneratorPilot generator_pilot(int width, int n, int steps, bool fixed = true) {
  const Stopwatch clock;
  const RunConfig rc = config(width);
  const Dataset& ds = dataset();
  GeneratorPilot out{std::make_unique<GeneratorStage<float>>(generator_config(rc), kSeed, adam()), {}};
  const auto b = make_generator_batch<float>(ds, fixed_samples(n), Composition::teacher, {});
  Rng rng(derive_seed(kSeed, {'P', 'G'}));
  for (int k = 0; k < steps; ++k) {
    const auto r = fixed ? out.stage->train_step(b, rc.g_weights)
                         : out.stage->train_step(make_generator_batch<float>(
                                                     ds, sample_transformer_examples(ds, ds.train_ids, n, rng),
                                                     Composition::teacher, {}),
                                                 rc.g_weights);
    if (k == 0) out.trace.first = r.pix;
  }
  NoGradGuard guard;
  out.trace.last = out.stage->losses(b, rc.g_weights).pix.item();
  out.trace.seconds = clock.seconds();
  return out;
}

/// L_pix of G on one held-in triple after 1000 steps.
inline Trace generator_overfit() { return generator_pilot(8, 1, 1000).trace; }
/// L_pix on a fixed 8-sample batch over 300 steps.
inline Trace generator_decrease() { return generator_pilot(8, 8, 300).trace; }

}  // namespace linet::pilots
