#include "linet/evaluation.hpp"

#include <cstdio>
#include <set>
#include <sstream>

#include "linet/metrics.hpp"

namespace linet {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<EvalQuery> make_eval_plan(const Dataset& ds, int drivers_per_identity, std::uint64_t seed) {
  ds.check_split();
  if (ds.test_ids.empty()) throw ConfigError("evaluation needs at least one test identity");
  if (drivers_per_identity < 1) throw ConfigError("drivers per identity must be >= 1");
  const std::set<int> test(ds.test_ids.begin(), ds.test_ids.end());
  const auto ne = std::uint64_t(ds.expressions.size()), np = std::uint64_t(ds.poses.size());

  std::vector<EvalQuery> plan;
  for (int s : ds.test_ids) {
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const int id = ds.record(i).identity;
      if (id != s && test.count(id)) candidates.push_back(i);
    }
    if (int(candidates.size()) < drivers_per_identity)
      throw ConfigError("identity " + ds.identities[std::size_t(s)] + " has " + std::to_string(candidates.size()) +
                        " candidate drivers, " + std::to_string(drivers_per_identity) + " requested");
    Rng rng(derive_seed(seed, {'E', std::uint64_t(s)}));
    // Partial Fisher-Yates: the first n entries are a uniform draw without replacement.
    for (int k = 0; k < drivers_per_identity; ++k) {
      const std::size_t j = std::size_t(k) + rng.index(candidates.size() - std::size_t(k));
      std::swap(candidates[std::size_t(k)], candidates[j]);
      const SampleRecord& drv = ds.record(candidates[std::size_t(k)]);
      const int e_p = int(rng.index(ne)), p = int(rng.index(np));
      plan.push_back({ds.at(s, e_p, p), candidates[std::size_t(k)], ds.at(s, drv.expression, drv.pose)});
    }
  }
  return plan;
}

ReenactFn oracle_reenactor() {
  return [](const Dataset& ds, const std::vector<EvalQuery>& qs) {
    std::vector<Image> out;
    out.reserve(qs.size());
    for (const auto& q : qs) out.push_back(ds.face(q.truth));
    return out;
  };
}

ReenactFn composed_reenactor(ComposedModel m, int batch) {
  if (!m.g || !m.e_e) throw DependencyError("composed model needs G and E_e");
  if ((m.composition == Composition::with_t || m.composition == Composition::full) && !m.t)
    throw DependencyError(composition_name(m.composition) + " needs T");
  if (m.composition == Composition::full && !m.r) throw DependencyError("vanilla+T+R needs R");
  if (m.composition == Composition::teacher) throw ConfigError("the teacher composition needs ground truth");
  return [m, batch](const Dataset& ds, const std::vector<EvalQuery>& qs) {
    std::vector<Image> out;
    out.reserve(qs.size());
    for (std::size_t lo = 0; lo < qs.size(); lo += std::size_t(batch)) {
      const std::size_t hi = std::min(qs.size(), lo + std::size_t(batch));
      std::vector<const Image*> faces, l_sp, l_dq;
      for (std::size_t i = lo; i < hi; ++i) {
        faces.push_back(&ds.face(qs[i].source));
        l_sp.push_back(&ds.landmark_image(qs[i].source));
        l_dq.push_back(&ds.landmark_image(qs[i].driver));
      }
      auto identity_t = [](const Var<float>&, const Var<float>& dq) { return dq; };
      auto identity_r = [](const Var<float>& sp, const Var<float>&) { return sp; };
      auto g = [&](const Var<float>& rot, const Var<float>& sp, const Var<float>& l) { return (*m.g)(rot, sp, (*m.e_e)(l)); };
      const Tensor<float> f = stack_images<float>(faces), a = stack_images<float>(l_sp), b = stack_images<float>(l_dq);
      Reenactment<float> r;
      switch (m.composition) {
        case Composition::vanilla: r = compose_reenactment<float>(identity_t, identity_r, g, f, a, b); break;
        case Composition::with_t: r = compose_reenactment<float>(*m.t, identity_r, g, f, a, b); break;
        default: r = compose_reenactment<float>(*m.t, *m.r, g, f, a, b); break;
      }
      for (int n = 0; n < r.output.shape().n; ++n) out.push_back(tensor_to_image(r.output, n));
    }
    return out;
  };
}

ReenactFn model_reenactor(const ReenactmentModel& m, int batch) {
  return composed_reenactor({Composition::full, &m.t, &m.r, &m.g, &m.e_e}, batch);
}

json EvalReport::to_json() const {
  json j;
  j["ssim_mean"] = ssim_mean;
  j["fid"] = fid;
  j["n_samples"] = n_samples;
  j["drivers_per_identity"] = drivers_per_identity;
  j["identities"] = identities;
  j["seed"] = seed;
  j["config_hash"] = config_hash;
  j["ssim_per_pair"] = ssim_per_pair;
  return j;
}

std::string EvalReport::dump() const { return to_json().dump(2) + "\n"; }

EvalReport run_eval_protocol(const ReenactFn& model, const Dataset& ds, int drivers_per_identity, std::uint64_t seed,
                             const std::string& config_hash, int batch) {
  const std::vector<EvalQuery> plan = make_eval_plan(ds, drivers_per_identity, seed);
  const FixedConvExtractor<double> extractor(kExtractorSeed);

  EvalReport rep;
  rep.seed = seed;
  rep.config_hash = config_hash;
  rep.drivers_per_identity = drivers_per_identity;
  for (int s : ds.test_ids) rep.identities.push_back(ds.identities[std::size_t(s)]);
  rep.ssim_per_pair.reserve(plan.size());

  Eigen::MatrixXd fake(Eigen::Index(plan.size()), kFeatureDim), real(Eigen::Index(plan.size()), kFeatureDim);
  // Batches bound memory; only features and scores are kept.
  for (std::size_t lo = 0; lo < plan.size(); lo += std::size_t(batch)) {
    const std::size_t hi = std::min(plan.size(), lo + std::size_t(batch));
    const std::vector<EvalQuery> chunk(plan.begin() + std::ptrdiff_t(lo), plan.begin() + std::ptrdiff_t(hi));
    const std::vector<Image> images = model(ds, chunk);
    if (images.size() != chunk.size()) throw ShapeMismatch("model returned a wrong image count");
    std::vector<const Image*> gen, truth;
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      const Image& gt = ds.face(chunk[i].truth);
      if (!images[i].same_shape(gt)) throw ShapeMismatch("model output shape differs from the ground truth");
      rep.ssim_per_pair.push_back(ssim(images[i], gt));
      gen.push_back(&images[i]);
      truth.push_back(&gt);
    }
    fake.middleRows(Eigen::Index(lo), Eigen::Index(hi - lo)) = extract_features(gen, extractor, batch);
    real.middleRows(Eigen::Index(lo), Eigen::Index(hi - lo)) = extract_features(truth, extractor, batch);
  }
  rep.n_samples = rep.ssim_per_pair.size();
  double sum = 0.0;
  for (double v : rep.ssim_per_pair) sum += v;
  rep.ssim_mean = rep.n_samples ? sum / double(rep.n_samples) : 0.0;
  rep.fid = frechet_distance(feature_stats(fake), feature_stats(real));
  return rep;
}

std::vector<AblationRow> run_ablation(const RunConfig& rc, const Dataset& ds, int drivers_per_identity,
                                      std::uint64_t eval_seed) {
  train_stage(Stage::T, rc, ds);
  train_stage(Stage::R, rc, ds);
  const auto t = load_transformer_stage(rc, rc.checkpoint_dir() / "T");
  const auto r = load_rotation_stage(rc, rc.checkpoint_dir() / "R");

  std::vector<AblationRow> rows;
  for (Composition c : {Composition::vanilla, Composition::with_t, Composition::full}) {
    TrainOptions opts;
    opts.g_composition = c;
    opts.checkpoint_name = "G_" + composition_name(c);
    train_stage(Stage::G, rc, ds, opts);
    const auto g = load_generator_stage(rc, rc.checkpoint_dir() / opts.checkpoint_name);
    const ReenactFn fn = composed_reenactor({c, &t->t, &r->r, &g->g, &g->e_e});
    const EvalReport rep = run_eval_protocol(fn, ds, drivers_per_identity, eval_seed, rc.hash());
    rows.push_back({composition_name(c), rep.ssim_mean, rep.fid});
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out << "config,ssim,fid\n";
  char buf[96];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f\n", r.config.c_str(), r.ssim, r.fid);
    out << buf;
  }
  return out.str();
}

}  // namespace linet
