#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "linet/dataset.hpp"
#include "linet/expression_generator.hpp"
#include "linet/pipeline.hpp"

namespace linet {

/// One reenactment of the protocol, as dataset indices: source face, driving
/// landmark and the ground truth (source identity, driver's motion).
struct EvalQuery {
  std::size_t source = 0;
  std::size_t driver = 0;
  std::size_t truth = 0;
};

/// Drivers for every test identity, drawn without replacement from the
/// landmarks of the other test identities; each driver gets a random source
/// face of that identity. SplitError on overlapping splits; ConfigError when
/// a test identity has fewer than `drivers_per_identity` candidates.
std::vector<EvalQuery> make_eval_plan(const Dataset& ds, int drivers_per_identity, std::uint64_t seed);

/// Produces one image per query, in order.
using ReenactFn = std::function<std::vector<Image>(const Dataset&, const std::vector<EvalQuery>&)>;

/// Returns the ground truth; the protocol's upper bound.
ReenactFn oracle_reenactor();

/// Trained networks wired per composition; t and r may be null when the
/// composition does not use them.
struct ComposedModel {
  Composition composition = Composition::full;
  const TransformerNet<float>* t = nullptr;
  const RotationNet<float>* r = nullptr;
  const EnhancingGenerator<float>* g = nullptr;
  const ExpressionEncoder<float>* e_e = nullptr;
};

ReenactFn composed_reenactor(ComposedModel m, int batch = 32);
/// The full T -> R -> G chain of a loaded model.
ReenactFn model_reenactor(const ReenactmentModel& m, int batch = 32);

struct EvalReport {
  std::vector<double> ssim_per_pair;
  double ssim_mean = 0.0;
  double fid = 0.0;
  std::size_t n_samples = 0;
  int drivers_per_identity = 0;
  std::vector<std::string> identities;
  std::uint64_t seed = 0;
  std::string config_hash;

  nlohmann::json to_json() const;
  /// Stable serialization; equal reports give equal bytes.
  std::string dump() const;
};

/// Reenacts every query, then scores SSIM per pair against the ground truth
/// and FID between the pooled generated and ground-truth sets.
EvalReport run_eval_protocol(const ReenactFn& model, const Dataset& ds, int drivers_per_identity, std::uint64_t seed,
                             const std::string& config_hash, int batch = 32);

struct AblationRow {
  std::string config;
  double ssim = 0.0;
  double fid = 0.0;
};

/// Published values of the three settings, for side-by-side output.
inline const std::array<AblationRow, 3>& published_ablation_reference() {
  static const std::array<AblationRow, 3> rows{
      {{"vanilla", 0.67, 83.30}, {"vanilla+T", 0.68, 89.98}, {"vanilla+T+R", 0.73, 80.45}}};
  return rows;
}

/// Trains T and R once and one G per setting under rc (identical schedule and
/// seed), writing checkpoints below rc.out_dir, then scores each setting with
/// the evaluation protocol.
std::vector<AblationRow> run_ablation(const RunConfig& rc, const Dataset& ds, int drivers_per_identity,
                                      std::uint64_t eval_seed);

/// Header "config,ssim,fid", one row per setting.
std::string ablation_csv(const std::vector<AblationRow>& rows);

}  // namespace linet
