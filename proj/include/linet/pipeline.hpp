#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "linet/dataset.hpp"
#include "linet/expression_generator.hpp"
#include "linet/face_rotation.hpp"
#include "linet/landmark_transformer.hpp"

namespace linet {

enum class Stage { T, R, G };

std::string stage_name(Stage s);
/// "T", "R" or "G"; anything else is a ConfigError.
Stage parse_stage(const std::string& name);

struct StageSchedule {
  int epochs = 0;
  int batch_size = 0;
  double lr = 0.0;
  int decay_every = 0;  ///< epochs per decay step; 0 keeps lr constant
  double decay_factor = 10.0;
  int checkpoint_every = 0;  ///< snapshot period in epochs; 0 saves only the latest

  /// Training schedule published for each stage: T 2000 epochs at batch 128
  /// and constant 1e-5; R and G 500 epochs at batch 32, 2e-4 decayed tenfold
  /// every 100 epochs.
  static StageSchedule published(Stage s);
};

/// lr * decay_factor^-floor(epoch / decay_every).
double stage_lr(const StageSchedule& s, int epoch);
/// Learning rate of the published schedule.
double lr_schedule(Stage s, int epoch);
double lr_schedule(const std::string& stage, int epoch);

/// Network widths shared by all stages.
struct ModelConfig {
  int base_width = 32;
  int stages = 4;
  int res_blocks = 4;
};

/// G's input source over its epochs.
enum class GeneratorInputs { teacher, frozen, curriculum };

struct RunConfig {
  std::string dataset;  ///< ingestion root; empty with mode "synthetic" builds in memory
  std::string mode = "synthetic";
  SyntheticSpec synthetic;
  int resolution = 64;
  std::uint64_t seed = 0;
  std::string out_dir = "run";
  ModelConfig model;
  std::array<StageSchedule, 3> schedule{StageSchedule::published(Stage::T), StageSchedule::published(Stage::R),
                                        StageSchedule::published(Stage::G)};
  TransformerWeights t_weights;
  RotationWeights r_weights;
  GeneratorWeights g_weights;
  GeneratorInputs g_inputs = GeneratorInputs::curriculum;

  const StageSchedule& stage(Stage s) const { return schedule[std::size_t(s)]; }
  StageSchedule& stage(Stage s) { return schedule[std::size_t(s)]; }

  /// Throws ConfigError on negative weights, unsupported resolution and
  /// non-positive schedule entries.
  void validate() const;

  nlohmann::json to_json() const;
  /// Missing keys keep their defaults; unknown keys are a ConfigError.
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& file);

  /// to_json() without the dataset and output paths.
  nlohmann::json canonical_json() const;
  /// FNV-1a over canonical_json(), as 16 hex digits.
  std::string hash() const;

  std::filesystem::path checkpoint_dir() const { return std::filesystem::path(out_dir) / "checkpoints"; }
};

/// Reduced widths and schedules that train all three stages on the synthetic
/// 8x8x5 set at 64x64 on one CPU core in minutes. Used by ablate and the
/// smoke run.
RunConfig desk_scale_config();

std::uint64_t fnv1a64(const std::string& bytes, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

TransformerConfig transformer_config(const RunConfig& rc, int identity_classes);
RotationConfig rotation_config(const RunConfig& rc);
GeneratorConfig generator_config(const RunConfig& rc);

/// Ingests rc.dataset, or builds the synthetic set when it is empty.
Dataset load_dataset(const RunConfig& rc);

inline constexpr int kCheckpointFormat = 1;

/// Parameter values, Adam moments and step counters of one stage, keyed by
/// optimizer name.
struct CheckpointManifest {
  int format_version = kCheckpointFormat;
  Stage stage = Stage::T;
  int epoch = 0;  ///< epochs completed
  std::int64_t step = 0;
  std::string config_hash;
  nlohmann::json config;
  int identity_classes = 0;
  std::vector<std::pair<std::string, std::int64_t>> optimizer_steps;
};

/// Writes `dir`/manifest.json and `dir`/params.bin.
void save_checkpoint(const std::filesystem::path& dir, const CheckpointManifest& m,
                     const std::vector<std::pair<std::string, Adam<float>*>>& optimizers);
/// Reads the manifest only; VersionError on a format mismatch, DependencyError
/// when absent.
CheckpointManifest read_manifest(const std::filesystem::path& dir);
/// Restores parameters and optimizer state in place; VersionError when names
/// or shapes disagree.
CheckpointManifest load_checkpoint(const std::filesystem::path& dir,
                                   const std::vector<std::pair<std::string, Adam<float>*>>& optimizers);

struct TrainOptions {
  std::optional<std::filesystem::path> resume;
  /// Stop once this many epochs are complete (simulates an interruption).
  std::optional<int> stop_after_epoch;
  /// Called after every step with (epoch, step, total loss).
  std::function<void(int, std::int64_t, double)> on_step;
  /// G only: train every epoch on this composition instead of rc.g_inputs.
  std::optional<Composition> g_composition;
  /// Checkpoint subdirectory; the stage name when empty.
  std::string checkpoint_name;
};

struct TrainResult {
  std::filesystem::path checkpoint;
  std::vector<double> step_totals;
  int epochs_done = 0;
};

int steps_per_epoch(const Dataset& ds, const StageSchedule& s);

/// Runs one stage on ds.train_ids and writes rc.checkpoint_dir()/<stage>.
/// G with frozen or curriculum inputs needs the T and R checkpoints
/// (DependencyError otherwise, VersionError on a config hash mismatch).
TrainResult train_stage(Stage stage, const RunConfig& rc, const Dataset& ds, const TrainOptions& opts = {});

/// Stage objects restored from `dir`, which must hold a checkpoint of that
/// stage written under rc (VersionError otherwise).
std::unique_ptr<TransformerStage<float>> load_transformer_stage(const RunConfig& rc, const std::filesystem::path& dir);
std::unique_ptr<RotationStage<float>> load_rotation_stage(const RunConfig& rc, const std::filesystem::path& dir);
std::unique_ptr<GeneratorStage<float>> load_generator_stage(const RunConfig& rc, const std::filesystem::path& dir);

/// Inference networks restored from the three stage checkpoints.
struct ReenactmentModel {
  RunConfig config;
  std::string config_hash;
  TransformerNet<float> t;
  RotationNet<float> r;
  EnhancingGenerator<float> g;
  ExpressionEncoder<float> e_e;
};

/// Loads <dir>/T, <dir>/R and <dir>/G; their config hashes must agree
/// (VersionError otherwise).
ReenactmentModel load_reenactment_model(const std::filesystem::path& ckpt_dir);

template <typename Scalar>
struct Reenactment {
  Tensor<Scalar> output;         ///< I_hat_sq
  Tensor<Scalar> landmarks_hat;  ///< L_hat_sq
  Tensor<Scalar> rotated;        ///< I_hat_R
};

/// L_hat = t(L_sp, L_dq); I_R = r(I_sp, L_hat); out = g(I_R, I_sp, L_hat).
/// Stages are any callables, which lets tests substitute oracles.
template <typename Scalar, typename T, typename R, typename G>
Reenactment<Scalar> compose_reenactment(const T& t, const R& r, const G& g, const Tensor<Scalar>& i_sp,
                                        const Tensor<Scalar>& l_sp, const Tensor<Scalar>& l_dq) {
  const Shape fs = i_sp.shape(), ls = l_sp.shape();
  if (ls.n != fs.n || ls.c != 1 || ls.h != fs.h || ls.w != fs.w || fs.c != 3)
    throw ShapeMismatch("reenact face " + fs.str() + " with landmarks " + ls.str());
  check_same_shape(l_sp.shape(), l_dq.shape(), "reenact");
  NoGradGuard guard;
  const Var<Scalar> sp(i_sp);
  const Var<Scalar> l_hat = t(Var<Scalar>(l_sp), Var<Scalar>(l_dq));
  const Var<Scalar> rotated = r(sp, l_hat);
  const Var<Scalar> out = g(rotated, sp, l_hat);
  return {out.value(), l_hat.value(), rotated.value()};
}

Reenactment<float> reenact(const ReenactmentModel& m, const Tensor<float>& i_sp, const Tensor<float>& l_sp,
                           const Tensor<float>& l_dq);

}  // namespace linet
