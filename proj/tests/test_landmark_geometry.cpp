#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <set>

#include "linet/landmark_geometry.hpp"
#include "linet/rng.hpp"

using namespace linet;

namespace {

// Index of the horizontally mirrored landmark in the 68-point layout.
int mirror_index(int i) {
  if (i <= 16) return 16 - i;
  if (i <= 26) return 43 - i;
  if (i <= 30) return i;
  if (i <= 35) return 66 - i;
  static const int eyes[] = {45, 44, 43, 42, 47, 46};
  if (i <= 41) return eyes[i - 36];
  if (i <= 47) {
    for (int k = 0; k < 6; ++k)
      if (eyes[k] == i) return 36 + k;
  }
  if (i <= 54) return 102 - i;
  if (i <= 59) return 114 - i;
  if (i <= 64) return 124 - i;
  return 132 - i;
}

SynthFaceParams symmetric_face(double yaw = 0.0) {
  SynthFaceParams p;
  p.identity = {0.78, 0.35, 0.33, 1.1, 0.4, 0.6};
  p.expression = {0.3, 0.2, 0.1, 0.8};
  p.yaw = yaw;
  return p;
}

LandmarkPoints integer_points(Rng& rng) {
  LandmarkPoints p;
  for (int i = 0; i < kNumLandmarks; ++i) p.row(i) << double(rng.index(200)), double(rng.index(150));
  return p;
}

// Brute-force oracle: mark floor() of densely sampled points of [p0, p1).
std::set<std::pair<int, int>> enumerate_segment_cells(Eigen::Vector2d p0, Eigen::Vector2d p1, int r) {
  std::set<std::pair<int, int>> cells;
  const int samples = 200000;
  for (int k = 0; k < samples; ++k) {
    const Eigen::Vector2d p = (p0 + (p1 - p0) * (double(k) / samples)) * r;
    const int x = int(std::floor(p.x())), y = int(std::floor(p.y()));
    if (x >= 0 && y >= 0 && x < r && y < r) cells.insert({x, y});
  }
  return cells;
}

std::set<std::pair<int, int>> lit_cells(const LandmarkImage& img) {
  std::set<std::pair<int, int>> cells;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      if (img(0, y, x) > 0.0f) cells.insert({x, y});
  return cells;
}

}  // namespace

TEST(NormalizeLandmarks, AlreadyNormalizedSetIsReturnedUnchanged) {
  Rng rng(1);
  LandmarkPoints p;
  for (int i = 0; i < kNumLandmarks; ++i) p.row(i) << rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9);
  p.row(0) << 0.1, 0.1;
  p.row(1) << 0.9, 0.9;
  EXPECT_TRUE(normalize_landmarks(p, 0.1).points() == p);
}

TEST(NormalizeLandmarks, SimilarityInvariance) {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const LandmarkPoints p = integer_points(rng);
    LandmarkPoints q = 2.0 * p;
    q.col(0).array() += 7.0;
    q.col(1).array() -= 3.0;
    EXPECT_TRUE(normalize_landmarks(p).points() == normalize_landmarks(q).points());
  }
}

TEST(NormalizeLandmarks, DegenerateBoxThrows) {
  LandmarkPoints p = LandmarkPoints::Constant(3.0);
  EXPECT_THROW(normalize_landmarks(p), DegenerateLandmarks);
  LandmarkPoints line = LandmarkPoints::Zero();
  for (int i = 0; i < kNumLandmarks; ++i) line(i, 0) = i;
  EXPECT_THROW(normalize_landmarks(line), DegenerateLandmarks);
}

TEST(NormalizeLandmarks, IdempotentAndInsideMargin) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    LandmarkPoints p;
    for (int i = 0; i < kNumLandmarks; ++i) p.row(i) << rng.uniform(-50, 300), rng.uniform(-20, 90);
    const LandmarkSet once = normalize_landmarks(p);
    const LandmarkSet twice = normalize_landmarks(once.points());
    ASSERT_TRUE(once == twice);
    EXPECT_GE(once.points().minCoeff(), 0.1 - 1e-12);
    EXPECT_LE(once.points().maxCoeff(), 0.9 + 1e-12);
  }
}

TEST(RenderLandmarkImage, HorizontalSegmentExample) {
  RenderOptions opt{1.0, false};
  const LandmarkImage img = render_strokes({{{0.25, 0.5}, {0.75, 0.5}}}, 8, opt);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) EXPECT_EQ(img(0, y, x), (y == 4 && x >= 2 && x <= 5) ? 1.0f : 0.0f);
  EXPECT_EQ(lit_cells(img), enumerate_segment_cells({0.25, 0.5}, {0.75, 0.5}, 8));
}

TEST(RenderLandmarkImage, SegmentCellsMatchBruteForceEnumeration) {
  Rng rng(4);
  RenderOptions opt{1.0, false};
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::Vector2d a(rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95));
    const Eigen::Vector2d b(rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95));
    const auto img = render_strokes({{a, b}}, 32, opt);
    EXPECT_EQ(lit_cells(img), enumerate_segment_cells(a, b, 32)) << "trial " << trial;
  }
}

TEST(RenderLandmarkImage, DeterministicAndBounded) {
  const LandmarkSet lms = synth_landmarks(symmetric_face(0.3));
  const LandmarkImage a = render_landmark_image(lms, 64);
  const LandmarkImage b = render_landmark_image(lms, 64);
  EXPECT_TRUE(a == b);
  EXPECT_GE(a.array().minCoeff(), 0.0f);
  EXPECT_LE(a.array().maxCoeff(), 1.0f);
  EXPECT_GT((a.array() > 0.0f).count(), 0);
}

TEST(RenderLandmarkImage, IntegerShiftMovesColumns) {
  const LandmarkSet lms = synth_landmarks(symmetric_face(-0.2));
  const int r = 64;
  for (int k : {1, 3, 5}) {
    LandmarkPoints shifted = lms.points();
    shifted.col(0).array() += double(k) / r;
    RenderOptions opt{1.0, false};
    const LandmarkImage base = render_landmark_image(lms, r, opt);
    const LandmarkImage moved = render_landmark_image(LandmarkSet(shifted), r, opt);
    for (int y = 0; y < r; ++y)
      for (int x = 0; x < r; ++x) EXPECT_EQ(moved(0, y, x), x >= k ? base(0, y, x - k) : 0.0f);
  }
}

TEST(RenderLandmarkImage, RejectsTinyResolution) {
  EXPECT_THROW(render_landmark_image(synth_landmarks(symmetric_face()), 15), ResolutionTooSmall);
}

TEST(RenderLandmarkImage, WidthScalesWithResolution) {
  const LandmarkSet lms = synth_landmarks(symmetric_face());
  const double lit64 = (render_landmark_image(lms, 64).array() > 0.5f).count() / 64.0;
  const double lit128 = (render_landmark_image(lms, 128).array() > 0.5f).count() / 128.0;
  // Stroke area grows with R^2 when width grows with R; per-R counts double.
  EXPECT_NEAR(lit128 / lit64, 2.0, 0.3);
}

TEST(ImageL1, ClosedFormsAndBruteForce) {
  Image z(1, 16, 16, 0.0f), o(1, 16, 16, 1.0f);
  EXPECT_EQ(image_l1(z, z), 0.0);
  EXPECT_EQ(image_l1(z, o), 1.0);
  Rng rng(5);
  Image a(3, 16, 16), b(3, 16, 16);
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    a.array()[i] = float(rng.uniform());
    b.array()[i] = float(rng.uniform());
  }
  double acc = 0.0;
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) acc += std::abs(double(a(c, y, x)) - double(b(c, y, x)));
  EXPECT_NEAR(image_l1(a, b), acc / (3 * 16 * 16), 1e-12);
  EXPECT_THROW(image_l1(a, z), ShapeMismatch);
}

TEST(SynthLandmarks, FrontalFaceIsMirrorSymmetric) {
  const LandmarkPoints p = synth_landmarks(symmetric_face()).points();
  for (int i = 0; i < kNumLandmarks; ++i) {
    const int j = mirror_index(i);
    EXPECT_NEAR(p(i, 0), 1.0 - p(j, 0), 1e-9) << i;
    EXPECT_NEAR(p(i, 1), p(j, 1), 1e-9) << i;
  }
}

TEST(SynthLandmarks, OppositeYawsAreMirrorImages) {
  for (double yaw : {0.25, 0.5, 1.0}) {
    const LandmarkPoints a = synth_landmarks(symmetric_face(yaw)).points();
    const LandmarkPoints b = synth_landmarks(symmetric_face(-yaw)).points();
    for (int i = 0; i < kNumLandmarks; ++i) {
      const int j = mirror_index(i);
      EXPECT_NEAR(a(i, 0), 1.0 - b(j, 0), 1e-12);
      EXPECT_NEAR(a(i, 1), b(j, 1), 1e-12);
    }
  }
}

TEST(SynthLandmarks, MouthGapGrowsWithOpenness) {
  auto gap = [](const LandmarkPoints& p) {
    return (p(65, 1) + p(66, 1) + p(67, 1)) / 3.0 - (p(61, 1) + p(62, 1) + p(63, 1)) / 3.0;
  };
  for (double yaw : {-1.0, 0.0, 0.5}) {
    SynthFaceParams p = symmetric_face(yaw);
    double previous = -1.0;
    for (int k = 0; k <= 20; ++k) {
      p.expression.mouth_open = k / 20.0;
      const double g = gap(synth_landmarks(p).points());
      EXPECT_GT(g, previous);
      previous = g;
    }
  }
}

TEST(SynthLandmarks, PureFunctionOverRepeatedCalls) {
  const SynthFaceParams p = symmetric_face(0.7);
  const LandmarkPoints first = synth_landmarks(p).points();
  std::size_t h0 = 0;
  for (int i = 0; i < first.size(); ++i) h0 = h0 * 1315423911u ^ std::hash<double>{}(first.data()[i]);
  for (int call = 0; call < 1000; ++call) {
    const LandmarkPoints again = synth_landmarks(p).points();
    std::size_t h = 0;
    for (int i = 0; i < again.size(); ++i) h = h * 1315423911u ^ std::hash<double>{}(again.data()[i]);
    ASSERT_EQ(h, h0);
  }
}

TEST(SynthLandmarks, RejectsOutOfRangeParameters) {
  SynthFaceParams p = symmetric_face();
  p.yaw = 1.5;
  EXPECT_THROW(synth_landmarks(p), ParamOutOfRange);
  p = symmetric_face();
  p.identity.face_width = 2.0;
  EXPECT_THROW(render_synthetic_face(p, 32), ParamOutOfRange);
}

TEST(SyntheticFace, DeterministicIdentityKeyedAndSymmetric) {
  const SynthFaceParams p = symmetric_face();
  const FaceImage a = render_synthetic_face(p, 64);
  EXPECT_TRUE(a == render_synthetic_face(p, 64));

  SynthFaceParams other = p;
  other.identity.skin_tone = 0.9;
  other.identity.eye_color = 0.1;
  EXPECT_GT(image_l1(a, render_synthetic_face(other, 64)), 0.0);

  EXPECT_LT(image_l1(a, mirror_horizontal(a)), 1e-3);
  EXPECT_GE(a.array().minCoeff(), 0.0f);
  EXPECT_LE(a.array().maxCoeff(), 1.0f);
}

TEST(SyntheticFace, OppositeYawsRenderMirrored) {
  const FaceImage a = render_synthetic_face(symmetric_face(0.5), 64);
  const FaceImage b = render_synthetic_face(symmetric_face(-0.5), 64);
  EXPECT_LT(image_l1(a, mirror_horizontal(b)), 1e-3);
}
