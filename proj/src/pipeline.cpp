#include "linet/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace linet {

namespace fs = std::filesystem;
using nlohmann::json;

std::string stage_name(Stage s) {
  switch (s) {
    case Stage::T: return "T";
    case Stage::R: return "R";
    case Stage::G: return "G";
  }
  return "?";
}

Stage parse_stage(const std::string& name) {
  if (name == "T") return Stage::T;
  if (name == "R") return Stage::R;
  if (name == "G") return Stage::G;
  throw ConfigError("unknown stage '" + name + "' (expected T, R or G)");
}

StageSchedule StageSchedule::published(Stage s) {
  StageSchedule out;
  if (s == Stage::T) {
    out.epochs = 2000;
    out.batch_size = 128;
    out.lr = 1e-5;
    out.decay_every = 0;
  } else {
    out.epochs = 500;
    out.batch_size = 32;
    out.lr = 2e-4;
    out.decay_every = 100;
  }
  out.decay_factor = 10.0;
  out.checkpoint_every = 100;
  return out;
}

double stage_lr(const StageSchedule& s, int epoch) {
  if (epoch < 0) throw ConfigError("negative epoch");
  if (s.decay_every <= 0) return s.lr;
  return s.lr * std::pow(s.decay_factor, -double(epoch / s.decay_every));
}

double lr_schedule(Stage s, int epoch) { return stage_lr(StageSchedule::published(s), epoch); }
double lr_schedule(const std::string& stage, int epoch) { return lr_schedule(parse_stage(stage), epoch); }

namespace {

std::string inputs_name(GeneratorInputs g) {
  switch (g) {
    case GeneratorInputs::teacher: return "teacher";
    case GeneratorInputs::frozen: return "frozen";
    case GeneratorInputs::curriculum: return "curriculum";
  }
  return "?";
}

GeneratorInputs parse_inputs(const std::string& s) {
  for (auto g : {GeneratorInputs::teacher, GeneratorInputs::frozen, GeneratorInputs::curriculum})
    if (inputs_name(g) == s) return g;
  throw ConfigError("unknown g_inputs '" + s + "'");
}

/// Reads known keys of an object and rejects the rest.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) throw ConfigError(where_ + " must be an object");
  }
  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError("unknown key '" + where_ + "." + k + "'");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

json schedule_json(const StageSchedule& s) {
  return {{"epochs", s.epochs},           {"batch_size", s.batch_size},     {"lr", s.lr},
          {"decay_every", s.decay_every}, {"decay_factor", s.decay_factor}, {"checkpoint_every", s.checkpoint_every}};
}

void read_schedule(const json& j, const std::string& where, StageSchedule& s) {
  Reader r(j, where);
  r.get("epochs", s.epochs);
  r.get("batch_size", s.batch_size);
  r.get("lr", s.lr);
  r.get("decay_every", s.decay_every);
  r.get("decay_factor", s.decay_factor);
  r.get("checkpoint_every", s.checkpoint_every);
}

}  // namespace

void RunConfig::validate() const {
  if (resolution != 64 && resolution != 128 && resolution != 256)
    throw ConfigError("resolution must be 64, 128 or 256, got " + std::to_string(resolution));
  if (mode != "synthetic" && mode != "rafd-layout") throw ConfigError("mode must be synthetic or rafd-layout");
  const std::vector<std::pair<std::string, double>> weights{
      {"T.l1", t_weights.l1},   {"T.rec", t_weights.rec},   {"T.cycle", t_weights.cycle}, {"T.id", t_weights.id},
      {"T.adv", t_weights.adv}, {"R.diff", r_weights.diff}, {"R.gan", r_weights.gan},     {"R.pose", r_weights.pose},
      {"G.pix", g_weights.pix}, {"G.per", g_weights.per},   {"G.adv", g_weights.adv}};
  for (const auto& [name, v] : weights)
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("weight " + name + " must be >= 0");
  for (Stage s : {Stage::T, Stage::R, Stage::G}) {
    const StageSchedule& sc = stage(s);
    const std::string n = stage_name(s);
    if (sc.epochs < 0) throw ConfigError(n + " epochs must be >= 0");
    if (sc.batch_size < 1) throw ConfigError(n + " batch_size must be >= 1");
    if (!(sc.lr > 0.0)) throw ConfigError(n + " lr must be > 0");
    if (sc.decay_every < 0 || !(sc.decay_factor >= 1.0)) throw ConfigError(n + " decay must be non-increasing");
    if (sc.checkpoint_every < 0) throw ConfigError(n + " checkpoint_every must be >= 0");
  }
  if (model.base_width < 2 || (model.base_width & (model.base_width - 1)) != 0)
    throw ConfigError("model.base_width must be a power of two >= 2");
  if (model.stages < 1 || model.res_blocks < 0) throw ConfigError("model stages/res_blocks out of range");
  if ((resolution >> model.stages) < 1) throw ConfigError("too many model stages for the resolution");
}

json RunConfig::to_json() const {
  json j;
  j["dataset"] = dataset;
  j["mode"] = mode;
  j["synthetic"] = {{"identities", synthetic.identities},
                    {"expressions", synthetic.expressions},
                    {"poses", synthetic.poses},
                    {"seed", synthetic.seed},
                    {"test_identities", synthetic.test_identities}};
  j["resolution"] = resolution;
  j["seed"] = seed;
  j["out_dir"] = out_dir;
  j["model"] = {{"base_width", model.base_width}, {"stages", model.stages}, {"res_blocks", model.res_blocks}};
  j["stages"] = {{"T", schedule_json(stage(Stage::T))},
                 {"R", schedule_json(stage(Stage::R))},
                 {"G", schedule_json(stage(Stage::G))}};
  j["weights"] = {
      {"T",
       {{"l1", t_weights.l1}, {"rec", t_weights.rec}, {"cycle", t_weights.cycle}, {"id", t_weights.id},
        {"adv", t_weights.adv}}},
      {"R", {{"diff", r_weights.diff}, {"gan", r_weights.gan}, {"pose", r_weights.pose}}},
      {"G", {{"pix", g_weights.pix}, {"per", g_weights.per}, {"adv", g_weights.adv}}}};
  j["g_inputs"] = inputs_name(g_inputs);
  return j;
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  {
    Reader r(j, "config");
    r.get("dataset", c.dataset);
    r.get("mode", c.mode);
    r.get("resolution", c.resolution);
    r.get("seed", c.seed);
    r.get("out_dir", c.out_dir);
    if (const json* s = r.child("synthetic")) {
      Reader rs(*s, "synthetic");
      rs.get("identities", c.synthetic.identities);
      rs.get("expressions", c.synthetic.expressions);
      rs.get("poses", c.synthetic.poses);
      rs.get("seed", c.synthetic.seed);
      rs.get("test_identities", c.synthetic.test_identities);
    }
    if (const json* m = r.child("model")) {
      Reader rm(*m, "model");
      rm.get("base_width", c.model.base_width);
      rm.get("stages", c.model.stages);
      rm.get("res_blocks", c.model.res_blocks);
    }
    if (const json* s = r.child("stages")) {
      Reader rs(*s, "stages");
      for (Stage st : {Stage::T, Stage::R, Stage::G}) {
        const std::string n = stage_name(st);
        if (const json* x = rs.child(n.c_str())) read_schedule(*x, "stages." + n, c.stage(st));
      }
    }
    if (const json* w = r.child("weights")) {
      Reader rw(*w, "weights");
      if (const json* t = rw.child("T")) {
        Reader x(*t, "weights.T");
        x.get("l1", c.t_weights.l1);
        x.get("rec", c.t_weights.rec);
        x.get("cycle", c.t_weights.cycle);
        x.get("id", c.t_weights.id);
        x.get("adv", c.t_weights.adv);
      }
      if (const json* t = rw.child("R")) {
        Reader x(*t, "weights.R");
        x.get("diff", c.r_weights.diff);
        x.get("gan", c.r_weights.gan);
        x.get("pose", c.r_weights.pose);
      }
      if (const json* t = rw.child("G")) {
        Reader x(*t, "weights.G");
        x.get("pix", c.g_weights.pix);
        x.get("per", c.g_weights.per);
        x.get("adv", c.g_weights.adv);
      }
    }
    std::string inputs = inputs_name(c.g_inputs);
    r.get("g_inputs", inputs);
    c.g_inputs = parse_inputs(inputs);
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config " + file.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + file.string() + ": " + e.what());
  }
  return from_json(j);
}

RunConfig desk_scale_config() {
  RunConfig c;
  c.model = {8, 4, 2};
  for (Stage s : {Stage::T, Stage::R, Stage::G}) {
    StageSchedule& sc = c.stage(s);
    sc.epochs = 40;
    sc.batch_size = 16;
    sc.lr = 1e-3;
    sc.decay_every = 0;
    sc.checkpoint_every = 0;
  }
  return c;
}

std::uint64_t fnv1a64(const std::string& bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json RunConfig::canonical_json() const {
  json j = to_json();
  j.erase("dataset");
  j.erase("out_dir");
  return j;
}

std::string RunConfig::hash() const { return hex64(fnv1a64(canonical_json().dump())); }

TransformerConfig transformer_config(const RunConfig& rc, int identity_classes) {
  const int w = rc.model.base_width;
  BlockConfig b;
  b.in_channels = 1;
  b.input_size = rc.resolution;
  b.stages = rc.model.stages;
  b.base_width = w;
  b.max_width = 8 * w;
  b.res_blocks = 0;
  TransformerConfig c;
  c.blocks = b;
  c.classifier = b;
  c.discriminator = b;
  c.discriminator.stages = std::min(3, b.stages);
  c.identity_classes = identity_classes;
  c.id_feature_dim = 64;
  return c;
}

RotationConfig rotation_config(const RunConfig& rc) {
  const int w = rc.model.base_width;
  BlockConfig b;
  b.in_channels = 3;
  b.input_size = rc.resolution;
  b.stages = rc.model.stages;
  b.base_width = w;
  b.max_width = 8 * w;
  RotationConfig c;
  c.image = b;
  c.pose = b;
  c.pose.in_channels = 1;
  c.pose.stages = std::min(3, b.stages);
  c.pose.base_width = w / 2;
  c.pose.max_width = 2 * w;
  c.pose_dim = 64;
  c.discriminator = b;
  c.discriminator.stages = std::min(3, b.stages);
  c.pose_discriminator = b;
  c.pose_discriminator.base_width = w / 2;
  c.pose_discriminator.max_width = 4 * w;
  return c;
}

GeneratorConfig generator_config(const RunConfig& rc) {
  const int w = rc.model.base_width;
  BlockConfig b;
  b.in_channels = 6;
  b.input_size = rc.resolution;
  b.stages = rc.model.stages;
  b.base_width = w;
  b.max_width = 8 * w;
  b.res_blocks = rc.model.res_blocks;
  GeneratorConfig c;
  c.blocks = b;
  c.expression = b;
  c.expression.in_channels = 1;
  c.expression.base_width = w / 2;
  c.expression.max_width = 4 * w;
  c.style_dim = 64;
  c.discriminator = b;
  c.discriminator.stages = std::min(3, b.stages);
  return c;
}

Dataset load_dataset(const RunConfig& rc) {
  if (rc.dataset.empty()) {
    if (rc.mode != "synthetic") throw ConfigError("rafd-layout mode needs a dataset root");
    SyntheticSpec s = rc.synthetic;
    s.resolution = rc.resolution;
    return make_synthetic_dataset(s);
  }
  Dataset ds = ingest_dataset(rc.dataset);
  if (ds.resolution != rc.resolution)
    throw ConfigError("dataset resolution " + std::to_string(ds.resolution) + " differs from config " +
                      std::to_string(rc.resolution));
  return ds;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kBlobMagic[8] = {'L', 'I', 'N', 'E', 'T', 'C', 'K', '1'};

struct BlobEntry {
  std::string name;
  Tensor<float>* tensor;
};

std::vector<BlobEntry> blob_entries(const std::vector<std::pair<std::string, Adam<float>*>>& optimizers) {
  std::vector<BlobEntry> out;
  for (const auto& [name, opt] : optimizers) {
    const auto& params = opt->parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
      // The parameter list shares nodes with the live network.
      Var<float> v = params[i].var;
      out.push_back({name + "/" + params[i].name, &v.mutable_value()});
      out.push_back({name + "/" + params[i].name + "#m", &opt->first_moments()[i]});
      out.push_back({name + "/" + params[i].name + "#v", &opt->second_moments()[i]});
    }
  }
  return out;
}

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T take(std::istream& in, const fs::path& file) {
  T v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw VersionError("truncated checkpoint " + file.string());
  return v;
}

}  // namespace

void save_checkpoint(const fs::path& dir, const CheckpointManifest& m,
                     const std::vector<std::pair<std::string, Adam<float>*>>& optimizers) {
  fs::create_directories(dir);
  std::ostringstream blob;
  blob.write(kBlobMagic, sizeof kBlobMagic);
  const auto entries = blob_entries(optimizers);
  put(blob, std::uint64_t(entries.size()));
  for (const auto& e : entries) {
    put(blob, std::uint32_t(e.name.size()));
    blob.write(e.name.data(), std::streamsize(e.name.size()));
    const Shape s = e.tensor->shape();
    for (int d : {s.n, s.c, s.h, s.w}) put(blob, std::int32_t(d));
    blob.write(reinterpret_cast<const char*>(e.tensor->data()), std::streamsize(e.tensor->size() * sizeof(float)));
  }
  const std::string bytes = blob.str();

  json j;
  j["format_version"] = m.format_version;
  j["stage"] = stage_name(m.stage);
  j["epoch"] = m.epoch;
  j["step"] = m.step;
  j["config_hash"] = m.config_hash;
  j["config"] = m.config;
  j["identity_classes"] = m.identity_classes;
  j["scalar"] = "float32";
  j["blob"] = "params.bin";
  j["blob_fnv1a"] = hex64(fnv1a64(bytes));
  json steps = json::object();
  for (const auto& [name, opt] : optimizers) steps[name] = opt->steps();
  j["optimizer_steps"] = steps;

  {
    std::ofstream out(dir / "params.bin", std::ios::binary);
    out.write(bytes.data(), std::streamsize(bytes.size()));
    if (!out) throw IngestError("cannot write " + (dir / "params.bin").string());
  }
  std::ofstream out(dir / "manifest.json");
  out << j.dump(2) << "\n";
  if (!out) throw IngestError("cannot write " + (dir / "manifest.json").string());
}

CheckpointManifest read_manifest(const fs::path& dir) {
  const fs::path file = dir / "manifest.json";
  if (!fs::exists(file)) throw DependencyError("missing checkpoint " + file.string());
  std::ifstream in(file);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw VersionError("unreadable manifest " + file.string() + ": " + e.what());
  }
  CheckpointManifest m;
  try {
    m.format_version = j.at("format_version").get<int>();
    if (m.format_version != kCheckpointFormat)
      throw VersionError("checkpoint format " + std::to_string(m.format_version) + " in " + file.string() +
                         ", expected " + std::to_string(kCheckpointFormat));
    if (j.at("scalar").get<std::string>() != "float32") throw VersionError("unsupported scalar in " + file.string());
    m.stage = parse_stage(j.at("stage").get<std::string>());
    m.epoch = j.at("epoch").get<int>();
    m.step = j.at("step").get<std::int64_t>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.config = j.at("config");
    m.identity_classes = j.at("identity_classes").get<int>();
    for (const auto& [k, v] : j.at("optimizer_steps").items()) m.optimizer_steps.emplace_back(k, v.get<std::int64_t>());
  } catch (const json::exception& e) {
    throw VersionError("malformed manifest " + file.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw VersionError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

CheckpointManifest load_checkpoint(const fs::path& dir,
                                   const std::vector<std::pair<std::string, Adam<float>*>>& optimizers) {
  CheckpointManifest m = read_manifest(dir);
  const fs::path file = dir / "params.bin";
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DependencyError("missing checkpoint blob " + file.string());
  char magic[sizeof kBlobMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kBlobMagic, sizeof magic) != 0) throw VersionError("bad blob header " + file.string());
  const auto entries = blob_entries(optimizers);
  if (take<std::uint64_t>(in, file) != entries.size())
    throw VersionError("checkpoint " + file.string() + " holds a different tensor count");
  for (const auto& e : entries) {
    const auto len = take<std::uint32_t>(in, file);
    std::string name(len, '\0');
    in.read(name.data(), len);
    if (name != e.name) throw VersionError("checkpoint tensor '" + name + "' where '" + e.name + "' was expected");
    Shape s;
    s.n = take<std::int32_t>(in, file);
    s.c = take<std::int32_t>(in, file);
    s.h = take<std::int32_t>(in, file);
    s.w = take<std::int32_t>(in, file);
    if (s != e.tensor->shape())
      throw VersionError("checkpoint tensor " + name + " has shape " + s.str() + ", model wants " +
                         e.tensor->shape().str());
    if (!in.read(reinterpret_cast<char*>(e.tensor->data()), std::streamsize(e.tensor->size() * sizeof(float))))
      throw VersionError("truncated checkpoint " + file.string());
  }
  for (const auto& [name, opt] : optimizers) {
    bool found = false;
    for (const auto& [k, v] : m.optimizer_steps)
      if (k == name) {
        opt->set_steps(v);
        found = true;
      }
    if (!found) throw VersionError("checkpoint lacks optimizer " + name);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Training

int steps_per_epoch(const Dataset& ds, const StageSchedule& s) {
  const std::size_t n = ds.samples_of(ds.train_ids).size();
  return int((n + std::size_t(s.batch_size) - 1) / std::size_t(s.batch_size));
}

namespace {

void check_hash(const CheckpointManifest& m, const RunConfig& rc, const fs::path& dir) {
  if (m.config_hash != rc.hash())
    throw VersionError("checkpoint " + dir.string() + " was written under config " + m.config_hash +
                       ", this run is " + rc.hash());
}

template <typename StageObj, typename StepFn>
TrainResult run_loop(Stage stage, const RunConfig& rc, const Dataset& ds, const TrainOptions& opts, StageObj& obj,
                     int identity_classes, StepFn&& step_fn) {
  const StageSchedule& sch = rc.stage(stage);
  const fs::path dir = rc.checkpoint_dir() / (opts.checkpoint_name.empty() ? stage_name(stage) : opts.checkpoint_name);
  CheckpointManifest m;
  m.stage = stage;
  m.config_hash = rc.hash();
  m.config = rc.canonical_json();
  m.identity_classes = identity_classes;

  int start = 0;
  if (opts.resume) {
    const CheckpointManifest r = load_checkpoint(*opts.resume, obj.optimizers());
    if (r.stage != stage)
      throw VersionError("resume checkpoint is stage " + stage_name(r.stage) + ", not " + stage_name(stage));
    check_hash(r, rc, *opts.resume);
    start = r.epoch;
    m.step = r.step;
  }

  TrainResult result;
  result.checkpoint = dir;
  result.epochs_done = start;
  const int spe = steps_per_epoch(ds, sch);
  auto save = [&](const fs::path& where) {
    m.epoch = result.epochs_done;
    save_checkpoint(where, m, obj.optimizers());
  };
  for (int epoch = start; epoch < sch.epochs; ++epoch) {
    obj.set_lr(stage_lr(sch, epoch));
    Rng rng(derive_seed(rc.seed, {std::uint64_t(stage_name(stage)[0]), std::uint64_t(epoch)}));
    for (int k = 0; k < spe; ++k) {
      const double total = step_fn(epoch, rng);
      result.step_totals.push_back(total);
      if (opts.on_step) opts.on_step(epoch, m.step, total);
      ++m.step;
    }
    result.epochs_done = epoch + 1;
    save(dir);
    if (sch.checkpoint_every > 0 && result.epochs_done % sch.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%04d", result.epochs_done);
      save(dir / name);
    }
    if (opts.stop_after_epoch && result.epochs_done >= *opts.stop_after_epoch) return result;
  }
  if (start >= sch.epochs) save(dir);
  return result;
}

}  // namespace

TrainResult train_stage(Stage stage, const RunConfig& rc, const Dataset& ds, const TrainOptions& opts) {
  rc.validate();
  if (ds.resolution != rc.resolution)
    throw ConfigError("dataset resolution " + std::to_string(ds.resolution) + " differs from config " +
                      std::to_string(rc.resolution));
  ds.check_split();
  if (ds.train_ids.empty()) throw ConfigError("no training identities");
  const StageSchedule& sch = rc.stage(stage);
  AdamOptions adam;
  adam.lr = sch.lr;

  switch (stage) {
    case Stage::T: {
      const int classes = int(ds.train_ids.size());
      TransformerStage<float> obj(transformer_config(rc, classes), rc.seed, adam);
      const auto labels = classifier_labels(ds);
      return run_loop(stage, rc, ds, opts, obj, classes, [&](int, Rng& rng) {
        const auto b = make_transformer_batch<float>(
            ds, sample_transformer_examples(ds, ds.train_ids, sch.batch_size, rng), labels);
        return obj.train_step(b, rc.t_weights).total;
      });
    }
    case Stage::R: {
      RotationStage<float> obj(rotation_config(rc), rc.seed, adam);
      return run_loop(stage, rc, ds, opts, obj, 0, [&](int, Rng& rng) {
        const auto samples = sample_rotation_examples(ds, ds.train_ids, sch.batch_size, rng);
        return obj.train_step(make_rotation_batch<float>(ds, samples, rng), rc.r_weights).total;
      });
    }
    case Stage::G: {
      // Which epochs see which composition.
      Composition late = Composition::full;
      int teacher_epochs = 0;
      if (opts.g_composition) {
        late = *opts.g_composition;
        teacher_epochs = late == Composition::teacher ? sch.epochs : 0;
      } else if (rc.g_inputs == GeneratorInputs::teacher) {
        teacher_epochs = sch.epochs;
      } else if (rc.g_inputs == GeneratorInputs::curriculum) {
        teacher_epochs = (sch.epochs + 1) / 2;
      }
      const bool needs_t = late == Composition::with_t || late == Composition::full;
      const bool needs_r = late == Composition::full;
      std::unique_ptr<TransformerStage<float>> t;
      std::unique_ptr<RotationStage<float>> r;
      if (teacher_epochs < sch.epochs) {
        if (needs_t) t = load_transformer_stage(rc, rc.checkpoint_dir() / "T");
        if (needs_r) r = load_rotation_stage(rc, rc.checkpoint_dir() / "R");
      }
      const FrozenModules<float> frozen{t ? &t->t : nullptr, r ? &r->r : nullptr};
      GeneratorStage<float> obj(generator_config(rc), rc.seed, adam);
      return run_loop(stage, rc, ds, opts, obj, 0, [&](int epoch, Rng& rng) {
        const auto samples = sample_transformer_examples(ds, ds.train_ids, sch.batch_size, rng);
        const Composition c = epoch < teacher_epochs ? Composition::teacher : late;
        return obj.train_step(make_generator_batch<float>(ds, samples, c, frozen), rc.g_weights).total;
      });
    }
  }
  throw ConfigError("unknown stage");
}

// ---------------------------------------------------------------------------
// Inference

namespace {

CheckpointManifest expect_stage(const RunConfig& rc, const fs::path& dir, Stage stage) {
  const CheckpointManifest m = read_manifest(dir);
  if (m.stage != stage)
    throw VersionError("checkpoint " + dir.string() + " holds stage " + stage_name(m.stage) + ", expected " +
                       stage_name(stage));
  check_hash(m, rc, dir);
  return m;
}

}  // namespace

std::unique_ptr<TransformerStage<float>> load_transformer_stage(const RunConfig& rc, const fs::path& dir) {
  const CheckpointManifest m = expect_stage(rc, dir, Stage::T);
  auto s = std::make_unique<TransformerStage<float>>(transformer_config(rc, m.identity_classes), rc.seed);
  load_checkpoint(dir, s->optimizers());
  return s;
}

std::unique_ptr<RotationStage<float>> load_rotation_stage(const RunConfig& rc, const fs::path& dir) {
  expect_stage(rc, dir, Stage::R);
  auto s = std::make_unique<RotationStage<float>>(rotation_config(rc), rc.seed);
  load_checkpoint(dir, s->optimizers());
  return s;
}

std::unique_ptr<GeneratorStage<float>> load_generator_stage(const RunConfig& rc, const fs::path& dir) {
  expect_stage(rc, dir, Stage::G);
  auto s = std::make_unique<GeneratorStage<float>>(generator_config(rc), rc.seed);
  load_checkpoint(dir, s->optimizers());
  return s;
}

ReenactmentModel load_reenactment_model(const fs::path& ckpt_dir) {
  const CheckpointManifest tm = read_manifest(ckpt_dir / "T");
  const CheckpointManifest rm = read_manifest(ckpt_dir / "R");
  const CheckpointManifest gm = read_manifest(ckpt_dir / "G");
  if (tm.stage != Stage::T || rm.stage != Stage::R || gm.stage != Stage::G)
    throw VersionError("checkpoint directories hold the wrong stages");
  if (tm.config_hash != rm.config_hash || tm.config_hash != gm.config_hash)
    throw VersionError("stage checkpoints come from different configs (" + tm.config_hash + ", " + rm.config_hash +
                       ", " + gm.config_hash + ")");
  ReenactmentModel m;
  try {
    m.config = RunConfig::from_json(tm.config);
  } catch (const ConfigError& e) {
    throw VersionError(std::string("checkpoint config unreadable: ") + e.what());
  }
  m.config_hash = tm.config_hash;
  if (m.config.hash() != m.config_hash) throw VersionError("checkpoint config does not match its recorded hash");

  const auto t = load_transformer_stage(m.config, ckpt_dir / "T");
  const auto r = load_rotation_stage(m.config, ckpt_dir / "R");
  const auto g = load_generator_stage(m.config, ckpt_dir / "G");
  m.t = t->t;
  m.r = r->r;
  m.g = g->g;
  m.e_e = g->e_e;
  return m;
}

Reenactment<float> reenact(const ReenactmentModel& m, const Tensor<float>& i_sp, const Tensor<float>& l_sp,
                           const Tensor<float>& l_dq) {
  return compose_reenactment<float>(
      m.t, m.r, [&](const Var<float>& rot, const Var<float>& sp, const Var<float>& l) { return m.g(rot, sp, m.e_e(l)); },
      i_sp, l_sp, l_dq);
}

}  // namespace linet
