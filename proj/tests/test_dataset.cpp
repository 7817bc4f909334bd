#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "linet/dataset.hpp"

using namespace linet;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("linet_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Dataset, SyntheticGridIsFactorial) {
  const Dataset ds = make_synthetic_dataset({8, 8, 5, 64, 3});
  EXPECT_EQ(ds.size(), 320u);
  for (int i = 0; i < 8; ++i)
    for (int e = 0; e < 8; ++e)
      for (int p = 0; p < 5; ++p) {
        const std::size_t k = ds.at(i, e, p);
        EXPECT_EQ(ds.record(k).identity, i);
        EXPECT_EQ(ds.record(k).expression, e);
        EXPECT_EQ(ds.record(k).pose, p);
      }
  EXPECT_THROW(ds.at(8, 0, 0), PairingError);
  EXPECT_EQ(ds.train_ids.size() + ds.test_ids.size(), 8u);
  EXPECT_NO_THROW(ds.check_split());
  EXPECT_DOUBLE_EQ(ds.poses.front().yaw, -1.0);
  EXPECT_DOUBLE_EQ(ds.poses[2].yaw, 0.0);
}

TEST(Dataset, WriteIngestRoundTripAndDeterminism) {
  const Dataset ds = make_synthetic_dataset({8, 8, 5, 64, 11});
  const fs::path a = scratch_dir("roundtrip_a"), b = scratch_dir("roundtrip_b");
  write_dataset(ds, a);
  write_dataset(make_synthetic_dataset({8, 8, 5, 64, 11}), b);

  int files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    ++files;
    EXPECT_EQ(slurp(entry.path()), slurp(b / fs::relative(entry.path(), a))) << entry.path();
  }
  EXPECT_EQ(files, 2 * 320 + 1);

  const Dataset back = ingest_dataset(a);
  ASSERT_EQ(back.size(), 320u);
  EXPECT_EQ(back.train_ids, ds.train_ids);
  EXPECT_EQ(back.test_ids, ds.test_ids);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const SampleRecord& r = ds.record(i);
    const std::size_t j = back.at(r.identity, r.expression, r.pose);
    EXPECT_TRUE(back.face(j) == ds.face(i));
    EXPECT_TRUE(back.landmarks(j) == ds.landmarks(i));
    EXPECT_TRUE(back.landmark_image(j) == ds.landmark_image(i));
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Dataset, IngestCountsSmallTree) {
  const fs::path root = scratch_dir("count");
  write_dataset(make_synthetic_dataset({2, 8, 5, 64, 1, 1}), root);
  EXPECT_EQ(ingest_dataset(root).size(), 80u);
  fs::remove_all(root);
}

TEST(Dataset, MissingLandmarkFileIsNamed) {
  const fs::path root = scratch_dir("missing");
  write_dataset(make_synthetic_dataset({2, 2, 2, 64, 1, 1}), root);
  const fs::path victim = root / "landmarks" / "id01" / "neutral_p1.json";
  ASSERT_TRUE(fs::remove(victim));
  try {
    ingest_dataset(root);
    FAIL() << "expected IngestError";
  } catch (const IngestError& e) {
    EXPECT_NE(std::string(e.what()).find(victim.string()), std::string::npos) << e.what();
  }
  fs::remove_all(root);
}

TEST(Dataset, MalformedJsonAndSplitOverlap) {
  const fs::path root = scratch_dir("malformed");
  write_dataset(make_synthetic_dataset({2, 2, 2, 64, 1, 1}), root);
  {
    std::ofstream(root / "landmarks" / "id00" / "neutral_p0.json") << "[[1, 2], [3";
    EXPECT_THROW(ingest_dataset(root), ParseError);
  }
  write_dataset(make_synthetic_dataset({2, 2, 2, 64, 1, 1}), root);
  {
    std::ofstream(root / "landmarks" / "id00" / "neutral_p0.json") << "[[1, 2]]";
    EXPECT_THROW(ingest_dataset(root), ParseError);
  }
  write_dataset(make_synthetic_dataset({2, 2, 2, 64, 1, 1}), root);
  auto index = nlohmann::json::parse(slurp(root / "identities.json"));
  index["split"]["test"].push_back(index["split"]["train"][0]);
  std::ofstream(root / "identities.json") << index.dump();
  EXPECT_THROW(ingest_dataset(root), SplitError);
  fs::remove_all(root);
}

TEST(Dataset, PngRoundTripIsExactOnQuantizedImages) {
  const fs::path root = scratch_dir("png");
  Image im(3, 5, 7);
  for (Eigen::Index i = 0; i < im.size(); ++i) im.array()[i] = float((i * 37) % 256) / 255.0f;
  write_png(im, root / "x.png");
  EXPECT_TRUE(read_png(root / "x.png") == quantize8(im));
  EXPECT_THROW(read_png(root / "absent.png"), IngestError);
  fs::remove_all(root);
}
