// Command-line front end. Exit codes: 0 success, 2 config, 3 data,
// 4 dependency or version, 1 anything else.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "linet/dataset.hpp"
#include "linet/evaluation.hpp"
#include "linet/landmark_geometry.hpp"
#include "linet/pipeline.hpp"

namespace fs = std::filesystem;
using namespace linet;

namespace {

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::config: return 2;
    case ErrorKind::data: return 3;
    case ErrorKind::dependency: return 4;
    case ErrorKind::numeric: return 1;
  }
  return 1;
}

void write_text(const fs::path& file, const std::string& text) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  out << text;
  if (!out) throw IngestError("cannot write " + file.string());
}

/// Landmark file in pixel coordinates of a resolution x resolution image.
LandmarkImage landmark_input(const fs::path& file, int resolution) {
  const LandmarkPoints raw = read_landmark_file(file);
  return render_landmark_image(normalize_landmarks(raw / double(resolution)), resolution);
}

int largest_driver_count(const Dataset& ds) {
  // Every test identity sees the landmarks of all other test identities.
  std::size_t fewest = 400;
  for (int s : ds.test_ids) {
    std::size_t n = 0;
    for (int o : ds.test_ids)
      if (o != s) n += ds.samples_of({o}).size();
    fewest = std::min(fewest, n);
  }
  return int(fewest);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Landmark-guided face reenactment: data, training, inference and evaluation"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth-data", "Render a synthetic dataset in the ingestion layout");
  SyntheticSpec spec;
  std::string synth_out;
  synth->add_option("--ids", spec.identities, "Identities")->required();
  synth->add_option("--exprs", spec.expressions, "Expressions (at most 8)")->required();
  synth->add_option("--poses", spec.poses, "Poses")->required();
  synth->add_option("--res", spec.resolution, "Resolution (64, 128 or 256)")->required();
  synth->add_option("--seed", spec.seed, "Seed")->required();
  synth->add_option("--test-ids", spec.test_identities, "Held-out identities (default ids/4)");
  synth->add_option("--out", synth_out, "Output root")->required();

  auto* train = app.add_subcommand("train", "Train one stage");
  std::string stage_arg, config_file, resume;
  train->add_option("--stage", stage_arg, "T, R or G")->required();
  train->add_option("--config", config_file, "Run config JSON")->required();
  train->add_option("--resume", resume, "Checkpoint directory to resume from");

  auto* reen = app.add_subcommand("reenact", "Reenact one source face with a driving landmark set");
  std::string source, source_lms, driving_lms, ckpt_dir, reen_out;
  bool dump = false;
  reen->add_option("--source", source, "Source face PNG")->required();
  reen->add_option("--source-landmarks", source_lms, "Source landmarks JSON (pixel coordinates)")->required();
  reen->add_option("--driving-landmarks", driving_lms, "Driving landmarks JSON (pixel coordinates)")->required();
  reen->add_option("--ckpt-dir", ckpt_dir, "Directory holding T, R and G checkpoints")->required();
  reen->add_option("--out", reen_out, "Output directory")->required();
  reen->add_flag("--dump-intermediates", dump, "Also write the transformed landmarks and the rotated face");

  auto* eval = app.add_subcommand("evaluate", "Run the evaluation protocol on the test split");
  std::string eval_ckpt, eval_data, eval_out;
  int drivers = 400;
  std::uint64_t eval_seed = 0;
  eval->add_option("--ckpt-dir", eval_ckpt, "Directory holding T, R and G checkpoints")->required();
  eval->add_option("--dataset", eval_data, "Dataset root")->required();
  eval->add_option("--drivers-per-id", drivers, "Driving landmarks per test identity");
  eval->add_option("--seed", eval_seed, "Sampling seed")->required();
  eval->add_option("--out", eval_out, "Report JSON")->required();

  auto* abl = app.add_subcommand("ablate", "Train and score vanilla, vanilla+T and vanilla+T+R");
  std::string abl_data, abl_out, abl_config, abl_work;
  std::uint64_t abl_seed = 0;
  int abl_drivers = 0;
  abl->add_option("--dataset", abl_data, "Dataset root")->required();
  abl->add_option("--seed", abl_seed, "Training and sampling seed")->required();
  abl->add_option("--out", abl_out, "Table CSV")->required();
  abl->add_option("--config", abl_config, "Run config JSON (default: desk-scale preset)");
  abl->add_option("--work", abl_work, "Checkpoint directory (default: <out>.work)");
  abl->add_option("--drivers-per-id", abl_drivers, "Drivers per test identity (default: all available, up to 400)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*synth) {
      const Dataset ds = make_synthetic_dataset(spec);
      write_dataset(ds, synth_out);
      std::printf("wrote %zu samples (%zu train / %zu test identities) to %s\n", ds.size(), ds.train_ids.size(),
                  ds.test_ids.size(), synth_out.c_str());
    } else if (*train) {
      const Stage stage = parse_stage(stage_arg);
      const RunConfig rc = RunConfig::load(config_file);
      const Dataset ds = load_dataset(rc);
      TrainOptions opts;
      if (!resume.empty()) opts.resume = fs::path(resume);
      const int spe = steps_per_epoch(ds, rc.stage(stage));
      double acc = 0.0;
      opts.on_step = [&](int epoch, std::int64_t step, double total) {
        acc += total;
        if ((step + 1) % spe == 0) {
          std::printf("stage %s epoch %d loss %.6f\n", stage_name(stage).c_str(), epoch + 1, acc / spe);
          std::fflush(stdout);
          acc = 0.0;
        }
      };
      const TrainResult r = train_stage(stage, rc, ds, opts);
      std::printf("checkpoint %s (epoch %d, config %s)\n", r.checkpoint.string().c_str(), r.epochs_done,
                  rc.hash().c_str());
    } else if (*reen) {
      const ReenactmentModel model = load_reenactment_model(ckpt_dir);
      const int res = model.config.resolution;
      const FaceImage face = read_png(source);
      if (face.height() != res || face.width() != res || face.channels() != 3)
        throw ConfigError("source must be a " + std::to_string(res) + "x" + std::to_string(res) + " RGB image");
      const LandmarkImage l_sp = landmark_input(source_lms, res), l_dq = landmark_input(driving_lms, res);
      const auto r = reenact(model, stack_images<float>({&face}), stack_images<float>({&l_sp}),
                             stack_images<float>({&l_dq}));
      fs::create_directories(reen_out);
      write_png(tensor_to_image(r.output, 0), fs::path(reen_out) / "reenacted.png");
      if (dump) {
        write_png(tensor_to_image(r.landmarks_hat, 0), fs::path(reen_out) / "landmarks_transformed.png");
        write_png(tensor_to_image(r.rotated, 0), fs::path(reen_out) / "rotated.png");
      }
      std::printf("wrote %s\n", (fs::path(reen_out) / "reenacted.png").string().c_str());
    } else if (*eval) {
      const ReenactmentModel model = load_reenactment_model(eval_ckpt);
      const Dataset ds = ingest_dataset(eval_data);
      if (ds.resolution != model.config.resolution) throw ConfigError("dataset and model resolutions differ");
      const EvalReport rep = run_eval_protocol(model_reenactor(model), ds, drivers, eval_seed, model.config_hash);
      write_text(eval_out, rep.dump());
      std::printf("n_samples %zu ssim %.6f fid %.6f\n", rep.n_samples, rep.ssim_mean, rep.fid);
    } else if (*abl) {
      RunConfig rc = abl_config.empty() ? desk_scale_config() : RunConfig::load(abl_config);
      rc.dataset = abl_data;
      rc.seed = abl_seed;
      rc.out_dir = abl_work.empty() ? abl_out + ".work" : abl_work;
      const Dataset ds = load_dataset(rc);
      const int n = abl_drivers > 0 ? abl_drivers : largest_driver_count(ds);
      const auto rows = run_ablation(rc, ds, n, abl_seed);
      write_text(abl_out, ablation_csv(rows));
      std::printf("%-12s %8s %10s   %s\n", "config", "ssim", "fid", "published ssim/fid");
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& ref = published_ablation_reference()[i];
        std::printf("%-12s %8.4f %10.4f   %.2f/%.2f\n", rows[i].config.c_str(), rows[i].ssim, rows[i].fid, ref.ssim,
                    ref.fid);
      }
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
