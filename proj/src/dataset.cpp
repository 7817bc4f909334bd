#include "linet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <png.h>

#include <json.hpp>

#include "linet/errors.hpp"
#include "linet/rng.hpp"

namespace linet {

namespace fs = std::filesystem;
using nlohmann::json;

void Dataset::add(SampleRecord rec, FaceImage face, LandmarkSet lms) {
  if (rec.identity < 0 || rec.identity >= int(identities.size()) || rec.expression < 0 ||
      rec.expression >= int(expressions.size()) || rec.pose < 0 || rec.pose >= int(poses.size()))
    throw IngestError("sample labels out of range");
  if (face.height() != resolution || face.width() != resolution || face.channels() != 3)
    throw IngestError("face image must be 3x" + std::to_string(resolution) + "x" + std::to_string(resolution) +
                      (rec.image_path.empty() ? "" : ": " + rec.image_path));
  if (index_.size() != identities.size() * expressions.size() * poses.size())
    index_.assign(identities.size() * expressions.size() * poses.size(), -1);
  const std::size_t k = key(rec.identity, rec.expression, rec.pose);
  if (index_[k] >= 0) throw IngestError("duplicate sample " + identities[rec.identity]);
  index_[k] = std::int64_t(records_.size());
  landmark_images_.push_back(render_landmark_image(lms, resolution));
  records_.push_back(std::move(rec));
  faces_.push_back(std::move(face));
  landmarks_.push_back(std::move(lms));
}

std::size_t Dataset::key(int identity, int expression, int pose) const {
  return (std::size_t(identity) * expressions.size() + std::size_t(expression)) * poses.size() + std::size_t(pose);
}

std::optional<std::size_t> Dataset::find(int identity, int expression, int pose) const {
  if (identity < 0 || identity >= int(identities.size()) || expression < 0 || expression >= int(expressions.size()) ||
      pose < 0 || pose >= int(poses.size()) || index_.empty())
    return std::nullopt;
  const std::int64_t i = index_[key(identity, expression, pose)];
  if (i < 0) return std::nullopt;
  return std::size_t(i);
}

std::size_t Dataset::at(int identity, int expression, int pose) const {
  if (auto i = find(identity, expression, pose)) return *i;
  throw PairingError("no sample for identity " + std::to_string(identity) + ", expression " +
                     std::to_string(expression) + ", pose " + std::to_string(pose));
}

std::vector<std::size_t> Dataset::samples_of(const std::vector<int>& identity_ids) const {
  const std::set<int> wanted(identity_ids.begin(), identity_ids.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < records_.size(); ++i)
    if (wanted.count(records_[i].identity)) out.push_back(i);
  return out;
}

void Dataset::check_split() const {
  std::set<int> seen;
  for (int id : train_ids) {
    if (id < 0 || id >= int(identities.size())) throw SplitError("train split names an unknown identity");
    seen.insert(id);
  }
  for (int id : test_ids) {
    if (id < 0 || id >= int(identities.size())) throw SplitError("test split names an unknown identity");
    if (seen.count(id)) throw SplitError("identity " + identities[id] + " is in both train and test splits");
  }
}

// ---------------------------------------------------------------------------
// Synthetic data

IdentityParams synthetic_identity(std::uint64_t seed, int index) {
  Rng rng(derive_seed(seed, {0x1d, std::uint64_t(index)}));
  IdentityParams p;
  p.face_width = rng.uniform(0.72, 0.88);
  p.eye_spacing = rng.uniform(0.31, 0.41);
  p.nose_length = rng.uniform(0.27, 0.43);
  p.jaw_curvature = rng.uniform(0.7, 1.5);
  p.skin_tone = rng.uniform();
  p.eye_color = rng.uniform();
  return p;
}

std::vector<PoseInfo> synthetic_poses(int count) {
  std::vector<PoseInfo> poses;
  for (int i = 0; i < count; ++i) {
    const double yaw = count == 1 ? 0.0 : -1.0 + 2.0 * i / (count - 1);
    poses.push_back({"p" + std::to_string(i), yaw});
  }
  return poses;
}

Image quantize8(const Image& im) {
  Image out = im;
  out.array() = (im.array().max(0.0f).min(1.0f) * 255.0f).round() / 255.0f;
  return out;
}

Dataset make_synthetic_dataset(const SyntheticSpec& spec) {
  const auto& presets = expression_presets();
  if (spec.identities < 1 || spec.poses < 1 || spec.expressions < 1 || spec.expressions > int(presets.size()))
    throw ConfigError("synthetic dataset needs >= 1 identity, 1..8 expressions, >= 1 pose");
  if (spec.resolution < 16) throw ResolutionTooSmall("resolution " + std::to_string(spec.resolution) + " < 16");
  const int n_test = spec.test_identities >= 0 ? spec.test_identities : spec.identities / 4;
  if (n_test >= spec.identities && spec.identities > 1) throw ConfigError("test split leaves no training identity");

  Dataset ds;
  ds.resolution = spec.resolution;
  for (int i = 0; i < spec.identities; ++i) {
    std::ostringstream name;
    name << "id" << std::setw(2) << std::setfill('0') << i;
    ds.identities.push_back(name.str());
    (i < spec.identities - n_test ? ds.train_ids : ds.test_ids).push_back(i);
  }
  for (int e = 0; e < spec.expressions; ++e) ds.expressions.push_back(presets[e].first);
  ds.poses = synthetic_poses(spec.poses);

  for (int i = 0; i < spec.identities; ++i) {
    const IdentityParams id = synthetic_identity(spec.seed, i);
    for (int e = 0; e < spec.expressions; ++e)
      for (int p = 0; p < spec.poses; ++p) {
        SynthFaceParams params{id, presets[e].second, ds.poses[p].yaw};
        ds.add({i, e, p, "", ""}, quantize8(render_synthetic_face(params, spec.resolution)), synth_landmarks(params));
      }
  }
  return ds;
}

// ---------------------------------------------------------------------------
// PNG

FaceImage read_png(const fs::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str()))
    throw IngestError("cannot read PNG " + path.string() + ": " + img.message);
  img.format = PNG_FORMAT_RGB;
  std::vector<png_byte> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&img);
    throw IngestError("cannot decode PNG " + path.string() + ": " + img.message);
  }
  const int h = int(img.height), w = int(img.width);
  FaceImage out(3, h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) out(c, y, x) = float(buf[(std::size_t(y) * w + x) * 3 + c]) / 255.0f;
  return out;
}

void write_png(const Image& image, const fs::path& path) {
  if (image.channels() != 1 && image.channels() != 3) throw ShapeMismatch("write_png expects 1 or 3 channels");
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = png_uint_32(image.width());
  img.height = png_uint_32(image.height());
  img.format = image.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int c = image.channels();
  std::vector<png_byte> buf(std::size_t(image.size()));
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x)
      for (int k = 0; k < c; ++k) {
        const float v = std::clamp(image(k, y, x), 0.0f, 1.0f);
        buf[(std::size_t(y) * image.width() + x) * c + k] = png_byte(std::lround(v * 255.0f));
      }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  if (!png_image_write_to_file(&img, path.c_str(), 0, buf.data(), 0, nullptr))
    throw IngestError("cannot write PNG " + path.string() + ": " + img.message);
}

// ---------------------------------------------------------------------------
// Landmark and index files

namespace {

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("missing file " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestError("cannot write " + path.string());
  out << text;
}

std::string sample_stem(const Dataset& ds, const SampleRecord& r) {
  return ds.expressions[r.expression] + "_" + ds.poses[r.pose].name;
}

}  // namespace

LandmarkPoints read_landmark_file(const fs::path& path) {
  const json j = read_json(path);
  try {
    if (!j.is_array() || j.size() != std::size_t(kNumLandmarks))
      throw ParseError(path.string() + ": expected an array of 68 [x, y] pairs");
    LandmarkPoints p;
    for (int i = 0; i < kNumLandmarks; ++i) {
      const json& pt = j[std::size_t(i)];
      if (!pt.is_array() || pt.size() != 2 || !pt[0].is_number() || !pt[1].is_number())
        throw ParseError(path.string() + ": point " + std::to_string(i) + " is not an [x, y] pair");
      p(i, 0) = pt[0].get<double>();
      p(i, 1) = pt[1].get<double>();
    }
    return p;
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_landmark_file(const LandmarkPoints& pixels, const fs::path& path) {
  json j = json::array();
  for (int i = 0; i < kNumLandmarks; ++i) j.push_back({pixels(i, 0), pixels(i, 1)});
  write_text(path, j.dump() + "\n");
}

void write_dataset(const Dataset& ds, const fs::path& root) {
  json index;
  index["format_version"] = 1;
  index["resolution"] = ds.resolution;
  index["identities"] = ds.identities;
  index["expressions"] = ds.expressions;
  json poses = json::array();
  for (const auto& p : ds.poses) poses.push_back({{"name", p.name}, {"yaw", p.yaw}});
  index["poses"] = poses;
  json train = json::array(), test = json::array();
  for (int i : ds.train_ids) train.push_back(ds.identities[i]);
  for (int i : ds.test_ids) test.push_back(ds.identities[i]);
  index["split"] = {{"train", train}, {"test", test}};
  write_text(root / "identities.json", index.dump(2) + "\n");

  for (std::size_t i = 0; i < ds.size(); ++i) {
    const SampleRecord& r = ds.record(i);
    const std::string id = ds.identities[r.identity], stem = sample_stem(ds, r);
    write_png(ds.face(i), root / "images" / id / (stem + ".png"));
    write_landmark_file(ds.landmarks(i).points() * double(ds.resolution), root / "landmarks" / id / (stem + ".json"));
  }
}

Dataset ingest_dataset(const fs::path& root) {
  const json index = read_json(root / "identities.json");
  Dataset ds;
  std::vector<std::string> train, test;
  try {
    ds.resolution = index.at("resolution").get<int>();
    ds.identities = index.at("identities").get<std::vector<std::string>>();
    ds.expressions = index.at("expressions").get<std::vector<std::string>>();
    for (const json& p : index.at("poses")) {
      const double yaw = p.at("yaw").get<double>();
      if (!(yaw >= -1.0 && yaw <= 1.0)) throw PoseOutOfRange("pose " + p.at("name").get<std::string>());
      ds.poses.push_back({p.at("name").get<std::string>(), yaw});
    }
    train = index.at("split").at("train").get<std::vector<std::string>>();
    test = index.at("split").at("test").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ParseError((root / "identities.json").string() + ": " + e.what());
  }
  if (ds.resolution != 64 && ds.resolution != 128 && ds.resolution != 256)
    throw ConfigError("resolution must be 64, 128 or 256, got " + std::to_string(ds.resolution));

  auto lookup = [&](const std::string& name) {
    auto it = std::find(ds.identities.begin(), ds.identities.end(), name);
    if (it == ds.identities.end()) throw SplitError("split names unknown identity " + name);
    return int(it - ds.identities.begin());
  };
  for (const auto& n : train) ds.train_ids.push_back(lookup(n));
  for (const auto& n : test) ds.test_ids.push_back(lookup(n));
  ds.check_split();

  for (int i = 0; i < int(ds.identities.size()); ++i)
    for (int e = 0; e < int(ds.expressions.size()); ++e)
      for (int p = 0; p < int(ds.poses.size()); ++p) {
        SampleRecord r{i, e, p, "", ""};
        const std::string stem = sample_stem(ds, r);
        r.image_path = (fs::path("images") / ds.identities[i] / (stem + ".png")).string();
        r.landmark_path = (fs::path("landmarks") / ds.identities[i] / (stem + ".json")).string();
        if (!fs::exists(root / r.landmark_path)) throw IngestError("missing landmark file " + (root / r.landmark_path).string());
        if (!fs::exists(root / r.image_path)) throw IngestError("missing image file " + (root / r.image_path).string());
        const LandmarkPoints raw = read_landmark_file(root / r.landmark_path);
        if (!raw.allFinite()) throw ParseError((root / r.landmark_path).string() + ": non-finite coordinate");
        FaceImage face = read_png(root / r.image_path);
        // Dividing by R first is a similarity, so the result is unchanged in exact
        // arithmetic and landmarks written from normalized sets round-trip exactly.
        ds.add(std::move(r), std::move(face), normalize_landmarks(raw / double(ds.resolution)));
      }
  return ds;
}

}  // namespace linet
