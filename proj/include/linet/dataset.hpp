#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "linet/landmark_geometry.hpp"

namespace linet {

struct PoseInfo {
  std::string name;
  double yaw = 0.0;  ///< [-1, 1]
};

/// One (identity, expression, pose) sample; indices refer to the dataset's
/// label lists.
struct SampleRecord {
  int identity = 0;
  int expression = 0;
  int pose = 0;
  std::string image_path;     ///< relative to the dataset root; empty in memory
  std::string landmark_path;  ///< relative to the dataset root; empty in memory
};

/// Factorial face dataset held in memory with landmark images pre-rendered
/// at the face resolution.
class Dataset {
 public:
  int resolution = 64;
  std::vector<std::string> identities;
  std::vector<std::string> expressions;
  std::vector<PoseInfo> poses;
  std::vector<int> train_ids;  ///< identity indices
  std::vector<int> test_ids;

  std::size_t size() const { return records_.size(); }
  const SampleRecord& record(std::size_t i) const { return records_[i]; }
  const FaceImage& face(std::size_t i) const { return faces_[i]; }
  const LandmarkSet& landmarks(std::size_t i) const { return landmarks_[i]; }
  const LandmarkImage& landmark_image(std::size_t i) const { return landmark_images_[i]; }

  /// Renders the landmark image and indexes the sample. Throws DataError
  /// subclasses on duplicates or out-of-range labels.
  void add(SampleRecord rec, FaceImage face, LandmarkSet lms);

  std::optional<std::size_t> find(int identity, int expression, int pose) const;
  /// As find, but throws PairingError when the sample is missing.
  std::size_t at(int identity, int expression, int pose) const;

  /// Record indices of every sample of the given identities.
  std::vector<std::size_t> samples_of(const std::vector<int>& identity_ids) const;

  /// Throws SplitError when the split lists overlap or name unknown identities.
  void check_split() const;

 private:
  std::size_t key(int identity, int expression, int pose) const;

  std::vector<SampleRecord> records_;
  std::vector<FaceImage> faces_;
  std::vector<LandmarkSet> landmarks_;
  std::vector<LandmarkImage> landmark_images_;
  std::vector<std::int64_t> index_;
};

struct SyntheticSpec {
  int identities = 8;
  int expressions = 8;
  int poses = 5;
  int resolution = 64;
  std::uint64_t seed = 0;
  /// Identities held out for testing; -1 selects identities / 4.
  int test_identities = -1;
};

/// Identity parameters drawn for identity `index` of a synthetic run.
IdentityParams synthetic_identity(std::uint64_t seed, int index);

/// Evenly spaced yaws over [-1, 1] (a single pose is frontal).
std::vector<PoseInfo> synthetic_poses(int count);

/// Factorial grid of synthetic faces, colours quantized to 8 bits so the
/// in-memory set equals its on-disk round trip.
Dataset make_synthetic_dataset(const SyntheticSpec& spec);

/// Writes the ingestion layout: images/<id>/<expr>_<pose>.png,
/// landmarks/<id>/<expr>_<pose>.json (68 [x, y] pixel pairs), identities.json.
void write_dataset(const Dataset& ds, const std::filesystem::path& root);

/// Reads the ingestion layout. Missing files raise IngestError naming the
/// path, malformed JSON raises ParseError, split overlap raises SplitError.
Dataset ingest_dataset(const std::filesystem::path& root);

/// 8-bit RGB or gray PNG I/O.
FaceImage read_png(const std::filesystem::path& path);
void write_png(const Image& image, const std::filesystem::path& path);

/// Landmark file helpers (pixel coordinates).
LandmarkPoints read_landmark_file(const std::filesystem::path& path);
void write_landmark_file(const LandmarkPoints& pixels, const std::filesystem::path& path);

/// Rounds every value to the nearest multiple of 1/255.
Image quantize8(const Image& im);

}  // namespace linet
