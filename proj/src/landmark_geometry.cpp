#include "linet/landmark_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Geometry>

#include "linet/errors.hpp"

namespace linet {

namespace {

std::vector<int> range(int first, int last) {
  std::vector<int> r;
  for (int i = first; i <= last; ++i) r.push_back(i);
  return r;
}

using Vec2 = Eigen::Vector2d;

double segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (p - (a + t * ab)).norm();
}

// Cells visited by the half-open segment [a, b) in pixel coordinates.
template <typename Mark>
void traverse_cells(const Vec2& a, const Vec2& b, Mark mark) {
  auto cell_of = [&](const Vec2& p) { mark(int(std::floor(p.x())), int(std::floor(p.y()))); };
  cell_of(a);
  const Vec2 d = b - a;
  // (t, point) for every grid-line crossing with t in (0, 1).
  std::vector<std::pair<double, Vec2>> cuts;
  for (int axis = 0; axis < 2; ++axis) {
    if (d[axis] == 0.0) continue;
    const double lo = std::min(a[axis], b[axis]), hi = std::max(a[axis], b[axis]);
    for (double k = std::ceil(lo); k <= hi; k += 1.0) {
      const double t = (k - a[axis]) / d[axis];
      if (t <= 0.0 || t >= 1.0) continue;
      Vec2 p = a + t * d;
      p[axis] = k;
      cuts.emplace_back(t, p);
    }
  }
  std::sort(cuts.begin(), cuts.end(), [](const auto& l, const auto& r) { return l.first < r.first; });
  double prev = 0.0;
  for (const auto& [t, p] : cuts) {
    if (t > prev) cell_of(a + 0.5 * (prev + t) * d);
    cell_of(p);
    prev = t;
  }
  if (1.0 > prev) cell_of(a + 0.5 * (prev + 1.0) * d);
}

void draw_segment(LandmarkImage& img, Vec2 a, Vec2 b, double width, bool antialias) {
  const int r = img.width();
  a *= r;
  b *= r;
  if (antialias) {
    const double reach = 0.5 * width + 0.5;
    const int x0 = std::max(0, int(std::floor(std::min(a.x(), b.x()) - reach)));
    const int x1 = std::min(r - 1, int(std::ceil(std::max(a.x(), b.x()) + reach)));
    const int y0 = std::max(0, int(std::floor(std::min(a.y(), b.y()) - reach)));
    const int y1 = std::min(r - 1, int(std::ceil(std::max(a.y(), b.y()) + reach)));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const double d = segment_distance(Vec2(x + 0.5, y + 0.5), a, b);
        const float v = float(std::clamp(reach - d, 0.0, 1.0));
        img(0, y, x) = std::max(img(0, y, x), v);
      }
    return;
  }
  const int dilate = width >= 3.0 ? int(std::floor((width - 1.0) / 2.0)) : 0;
  traverse_cells(a, b, [&](int cx, int cy) {
    for (int y = cy - dilate; y <= cy + dilate; ++y)
      for (int x = cx - dilate; x <= cx + dilate; ++x)
        if (x >= 0 && x < r && y >= 0 && y < r) img(0, y, x) = 1.0f;
  });
}

void draw_polyline(LandmarkImage& img, const std::vector<Vec2>& pts, bool closed, double width, bool aa) {
  if (pts.size() < 2) return;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) draw_segment(img, pts[i], pts[i + 1], width, aa);
  if (closed) draw_segment(img, pts.back(), pts.front(), width, aa);
}

}  // namespace

const std::array<FacePart, 8>& face_parts() {
  static const std::array<FacePart, 8> parts = {{
      {"jaw", {{range(0, 16), false}}},
      {"right_brow", {{range(17, 21), false}}},
      {"left_brow", {{range(22, 26), false}}},
      {"nose_bridge", {{range(27, 30), false}}},
      {"nose_base", {{range(31, 35), false}}},
      {"right_eye", {{range(36, 41), true}}},
      {"left_eye", {{range(42, 47), true}}},
      {"lips", {{range(48, 59), true}, {range(60, 67), true}}},
  }};
  return parts;
}

LandmarkSet::LandmarkSet(const LandmarkPoints& points) : points_(points) {
  if (!points_.allFinite()) throw DegenerateLandmarks("non-finite landmark coordinate");
}

SimilarityTransform normalization_transform(const LandmarkPoints& raw, double margin) {
  if (!raw.allFinite()) throw DegenerateLandmarks("non-finite landmark coordinate");
  if (!(margin >= 0.0 && margin < 0.5)) throw ConfigError("margin must be in [0, 0.5)");
  const Eigen::Vector2d lo = raw.colwise().minCoeff().transpose();
  const Eigen::Vector2d hi = raw.colwise().maxCoeff().transpose();
  const Eigen::Vector2d extent = hi - lo;
  if (extent.x() <= 0.0 || extent.y() <= 0.0)
    throw DegenerateLandmarks("bounding box has zero width or height");

  // Sets already normalized (to 1e-12) map to themselves, which makes the
  // operation exactly idempotent.
  const double target = 1.0 - 2.0 * margin;
  const double span = extent.maxCoeff();
  const Eigen::Vector2d centre = 0.5 * (lo + hi);
  const double tol = 1e-12;
  if (std::abs(span - target) <= tol && (centre.array() - 0.5).abs().maxCoeff() <= tol &&
      lo.minCoeff() >= margin - tol && hi.maxCoeff() <= 1.0 - margin + tol)
    return SimilarityTransform{};

  SimilarityTransform t;
  t.identity = false;
  t.scale = target / span;
  t.offset = Eigen::Vector2d::Constant(0.5) - centre * t.scale;
  return t;
}

LandmarkSet normalize_landmarks(const LandmarkPoints& raw, double margin) {
  const SimilarityTransform t = normalization_transform(raw, margin);
  if (t.identity) return LandmarkSet(raw);
  const Eigen::Vector2d lo = raw.colwise().minCoeff().transpose();
  const Eigen::Vector2d hi = raw.colwise().maxCoeff().transpose();
  const Eigen::Vector2d centre = 0.5 * (lo + hi);
  LandmarkPoints out;
  for (int i = 0; i < kNumLandmarks; ++i)
    out.row(i) = ((raw.row(i).transpose() - centre) * t.scale + Eigen::Vector2d::Constant(0.5)).transpose();
  return LandmarkSet(out);
}

LandmarkImage render_strokes(const std::vector<std::vector<Eigen::Vector2d>>& strokes, int resolution,
                             const RenderOptions& options) {
  if (resolution < 1) throw ResolutionTooSmall("resolution " + std::to_string(resolution) + " < 1");
  const double width = options.width > 0.0 ? options.width : resolution / 64.0;
  LandmarkImage img(1, resolution, resolution);
  for (const auto& s : strokes) draw_polyline(img, s, false, width, options.antialias);
  return img;
}

LandmarkImage render_landmark_image(const LandmarkSet& lms, int resolution, const RenderOptions& options) {
  if (resolution < 16) throw ResolutionTooSmall("resolution " + std::to_string(resolution) + " < 16");
  const double width = options.width > 0.0 ? options.width : resolution / 64.0;
  LandmarkImage img(1, resolution, resolution);
  for (const FacePart& part : face_parts())
    for (const Polyline& line : part.strokes) {
      std::vector<Vec2> pts;
      for (int i : line.indices) pts.push_back(lms.point(i));
      draw_polyline(img, pts, line.closed, width, options.antialias);
    }
  return img;
}

// ---------------------------------------------------------------------------
// Synthetic faces

namespace {

void check_range(double v, double lo, double hi, const char* name) {
  if (!(v >= lo && v <= hi))
    throw ParamOutOfRange(std::string(name) + "=" + std::to_string(v) + " outside [" + std::to_string(lo) + ", " +
                          std::to_string(hi) + "]");
}

using Vec3 = Eigen::Vector3d;

/// Frontal template (x right, y down, z towards the camera), face units.
struct FaceTemplate {
  std::array<Vec3, kNumLandmarks> landmarks;
  std::vector<Vec3> forehead;  // closes the head outline from jaw 16 back to jaw 0
};

FaceTemplate build_template(const SynthFaceParams& p) {
  const IdentityParams& id = p.identity;
  const ExpressionParams& ex = p.expression;
  FaceTemplate t;
  auto& L = t.landmarks;

  const double open = 0.18 * ex.mouth_open;
  // Jaw: arc from the right ear (0) through the chin (8) to the left ear (16).
  const double jaw_height = 1.25;
  for (int i = 0; i <= 16; ++i) {
    const double theta = std::numbers::pi * i / 16.0;
    const double s = std::sin(theta);
    const double drop = jaw_height * std::pow(s, id.jaw_curvature) + 0.6 * open * std::pow(s, 4.0);
    L[i] = Vec3(-id.face_width * std::cos(theta), drop, 0.7 * s);
  }

  // Brows: outer to inner on the right, inner to outer on the left.
  for (int j = 0; j < 5; ++j) {
    const double arch = 1.0 - std::pow((j - 2) / 2.0, 2);
    const double dx = -0.24 + 0.12 * j;
    const double y = -0.22 - 0.08 * ex.brow_raise - 0.05 * arch;
    L[17 + j] = Vec3(-id.eye_spacing + dx, y, 0.5);
    L[22 + j] = Vec3(id.eye_spacing + dx, y, 0.5);
  }

  // Nose bridge and base.
  const double nose_top = 0.05;
  for (int k = 0; k < 4; ++k) L[27 + k] = Vec3(0.0, nose_top + id.nose_length * k / 3.0, 0.6 + 0.25 * k / 3.0);
  const double base_y = nose_top + id.nose_length + 0.03;
  const std::array<double, 5> base_x = {-0.14, -0.07, 0.0, 0.07, 0.14};
  const std::array<double, 5> base_dy = {-0.02, 0.01, 0.02, 0.01, -0.02};
  for (int k = 0; k < 5; ++k) L[31 + k] = Vec3(base_x[k], base_y + base_dy[k], k == 2 ? 0.72 : 0.64);

  // Eyes.
  const double ew = 0.13, eh = 0.06 * ex.eye_open;
  // Right eye starts at its outer corner, left eye at its inner corner; both
  // run left-to-right along the upper lid in image space.
  auto eye = [&](int first, double cx) {
    const std::array<Eigen::Vector2d, 6> shape = {
        Eigen::Vector2d(-ew, 0.0), Eigen::Vector2d(-ew / 3, -eh), Eigen::Vector2d(ew / 3, -eh),
        Eigen::Vector2d(ew, 0.0),  Eigen::Vector2d(ew / 3, eh),   Eigen::Vector2d(-ew / 3, eh)};
    for (int k = 0; k < 6; ++k) L[first + k] = Vec3(cx + shape[k].x(), shape[k].y(), 0.45);
  };
  eye(36, -id.eye_spacing);
  eye(42, id.eye_spacing);

  // Mouth.
  const double lift = 0.06 * ex.corner_lift;
  const double mw = 0.30 + 0.04 * std::max(ex.corner_lift, 0.0);
  const double ym = base_y + 0.30;
  const double z = 0.55;
  L[48] = Vec3(-mw, ym - lift, z);
  L[49] = Vec3(-0.6 * mw, ym - 0.07 - 0.5 * lift, z);
  L[50] = Vec3(-0.25 * mw, ym - 0.09, z);
  L[51] = Vec3(0.0, ym - 0.075, z);
  L[52] = Vec3(0.25 * mw, ym - 0.09, z);
  L[53] = Vec3(0.6 * mw, ym - 0.07 - 0.5 * lift, z);
  L[54] = Vec3(mw, ym - lift, z);
  L[55] = Vec3(0.6 * mw, ym + 0.08 + open - 0.5 * lift, z);
  L[56] = Vec3(0.25 * mw, ym + 0.10 + open, z);
  L[57] = Vec3(0.0, ym + 0.11 + open, z);
  L[58] = Vec3(-0.25 * mw, ym + 0.10 + open, z);
  L[59] = Vec3(-0.6 * mw, ym + 0.08 + open - 0.5 * lift, z);
  L[60] = Vec3(-0.85 * mw, ym - 0.8 * lift, z);
  L[61] = Vec3(-0.45 * mw, ym - 0.02 - 0.4 * lift, z);
  L[62] = Vec3(0.0, ym - 0.02, z);
  L[63] = Vec3(0.45 * mw, ym - 0.02 - 0.4 * lift, z);
  L[64] = Vec3(0.85 * mw, ym - 0.8 * lift, z);
  L[65] = Vec3(0.45 * mw, ym + 0.02 + 0.8 * open - 0.4 * lift, z);
  L[66] = Vec3(0.0, ym + 0.02 + open, z);
  L[67] = Vec3(-0.45 * mw, ym + 0.02 + 0.8 * open - 0.4 * lift, z);

  // Forehead arc from +x back over the top to -x.
  for (int k = 1; k < 12; ++k) {
    const double phi = std::numbers::pi * k / 12.0;
    t.forehead.emplace_back(id.face_width * std::cos(phi), -0.75 * std::sin(phi), 0.5 * std::sin(phi));
  }
  return t;
}

Eigen::Vector2d project(const Vec3& p, double yaw) {
  const double a = yaw * kMaxYawRadians;
  return {p.x() * std::cos(a) + p.z() * std::sin(a), p.y()};
}

struct PosedFace {
  LandmarkSet landmarks;
  std::vector<Eigen::Vector2d> forehead;
};

PosedFace pose_face(const SynthFaceParams& params) {
  validate(params);
  const FaceTemplate t = build_template(params);
  LandmarkPoints raw;
  for (int i = 0; i < kNumLandmarks; ++i) raw.row(i) = project(t.landmarks[i], params.yaw).transpose();
  PosedFace out{normalize_landmarks(raw), {}};
  const SimilarityTransform tf = normalization_transform(raw);
  for (const Vec3& p : t.forehead) out.forehead.push_back(tf.apply(project(p, params.yaw)));
  return out;
}

bool inside_polygon(const std::vector<Vec2>& poly, const Vec2& p) {
  bool in = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[j];
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double x = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
      if (p.x() < x) in = !in;
    }
  }
  return in;
}

bool near_polyline(const std::vector<Vec2>& line, const Vec2& p, double half_width) {
  for (std::size_t i = 0; i + 1 < line.size(); ++i)
    if (segment_distance(p, line[i], line[i + 1]) <= half_width) return true;
  return false;
}

struct BoundedShape {
  std::vector<Vec2> pts;
  Eigen::AlignedBox2d box;
  explicit BoundedShape(std::vector<Vec2> p, double pad = 0.0) : pts(std::move(p)) {
    for (const auto& q : pts) box.extend(q);
    box.min().array() -= pad;
    box.max().array() += pad;
  }
  bool may_contain(const Vec2& p) const { return box.contains(p); }
};

Eigen::Vector3d lerp(const Eigen::Vector3d& a, const Eigen::Vector3d& b, double t) { return a + t * (b - a); }

}  // namespace

void validate(const SynthFaceParams& p) {
  check_range(p.identity.face_width, 0.70, 0.90, "face_width");
  check_range(p.identity.eye_spacing, 0.30, 0.42, "eye_spacing");
  check_range(p.identity.nose_length, 0.25, 0.45, "nose_length");
  check_range(p.identity.jaw_curvature, 0.6, 1.6, "jaw_curvature");
  check_range(p.identity.skin_tone, 0.0, 1.0, "skin_tone");
  check_range(p.identity.eye_color, 0.0, 1.0, "eye_color");
  check_range(p.expression.mouth_open, 0.0, 1.0, "mouth_open");
  check_range(p.expression.corner_lift, -1.0, 1.0, "corner_lift");
  check_range(p.expression.brow_raise, -1.0, 1.0, "brow_raise");
  check_range(p.expression.eye_open, 0.1, 1.0, "eye_open");
  check_range(p.yaw, -1.0, 1.0, "yaw");
}

LandmarkSet synth_landmarks(const SynthFaceParams& params) { return pose_face(params).landmarks; }

FaceImage render_synthetic_face(const SynthFaceParams& params, int resolution) {
  if (resolution < 16) throw ResolutionTooSmall("resolution " + std::to_string(resolution) + " < 16");
  const PosedFace face = pose_face(params);
  const LandmarkSet& lm = face.landmarks;
  auto pts = [&](int first, int last) {
    std::vector<Vec2> v;
    for (int i = first; i <= last; ++i) v.push_back(lm.point(i));
    return v;
  };

  std::vector<Vec2> head_outline = pts(0, 16);
  head_outline.insert(head_outline.end(), face.forehead.begin(), face.forehead.end());
  const BoundedShape head(head_outline);
  const BoundedShape eye_r(pts(36, 41)), eye_l(pts(42, 47));
  const BoundedShape lips(pts(48, 59)), mouth(pts(60, 67));
  const double brow_half = 0.011, nose_half = 0.006;
  const BoundedShape brow_r(pts(17, 21), brow_half), brow_l(pts(22, 26), brow_half);
  std::vector<Vec2> nose = pts(27, 30);
  const BoundedShape nose_bridge(nose, nose_half), nose_base(pts(31, 35), nose_half);

  auto centre = [](const std::vector<Vec2>& v) {
    Vec2 c = Vec2::Zero();
    for (const auto& q : v) c += q;
    return Vec2(c / double(v.size()));
  };
  const Vec2 iris_r = centre(eye_r.pts), iris_l = centre(eye_l.pts);
  const double iris_radius = 0.35 * (eye_r.pts[3] - eye_r.pts[0]).norm();

  const Eigen::Vector3d background(0.16, 0.18, 0.22);
  const Eigen::Vector3d skin =
      lerp(Eigen::Vector3d(0.96, 0.80, 0.69), Eigen::Vector3d(0.45, 0.30, 0.20), params.identity.skin_tone);
  const Eigen::Vector3d brow_color = 0.35 * skin;
  const Eigen::Vector3d nose_color = 0.78 * skin;
  const Eigen::Vector3d sclera(0.95, 0.95, 0.95);
  const Eigen::Vector3d iris =
      lerp(Eigen::Vector3d(0.20, 0.40, 0.80), Eigen::Vector3d(0.35, 0.20, 0.10), params.identity.eye_color);
  const Eigen::Vector3d lip_color = lerp(skin, Eigen::Vector3d(0.75, 0.25, 0.30), 0.6);
  const Eigen::Vector3d mouth_color(0.25, 0.05, 0.08);

  auto shade = [&](const Vec2& p) -> Eigen::Vector3d {
    if (!head.may_contain(p) || !inside_polygon(head.pts, p)) return background;
    Eigen::Vector3d c = skin;
    if ((brow_r.may_contain(p) && near_polyline(brow_r.pts, p, brow_half)) ||
        (brow_l.may_contain(p) && near_polyline(brow_l.pts, p, brow_half)))
      c = brow_color;
    for (const auto* e : {&eye_r, &eye_l}) {
      if (e->may_contain(p) && inside_polygon(e->pts, p)) {
        const Vec2& ic = e == &eye_r ? iris_r : iris_l;
        c = (p - ic).norm() <= iris_radius ? iris : sclera;
      }
    }
    if ((nose_bridge.may_contain(p) && near_polyline(nose_bridge.pts, p, nose_half)) ||
        (nose_base.may_contain(p) && near_polyline(nose_base.pts, p, nose_half)))
      c = nose_color;
    if (lips.may_contain(p) && inside_polygon(lips.pts, p)) c = lip_color;
    if (mouth.may_contain(p) && inside_polygon(mouth.pts, p)) c = mouth_color;
    return c;
  };

  constexpr int kSub = 4;
  FaceImage img(3, resolution, resolution);
  for (int y = 0; y < resolution; ++y)
    for (int x = 0; x < resolution; ++x) {
      Eigen::Vector3d acc = Eigen::Vector3d::Zero();
      for (int sy = 0; sy < kSub; ++sy)
        for (int sx = 0; sx < kSub; ++sx)
          acc += shade(Vec2((x + (sx + 0.5) / kSub) / resolution, (y + (sy + 0.5) / kSub) / resolution));
      acc /= double(kSub * kSub);
      for (int c = 0; c < 3; ++c) img(c, y, x) = float(acc[c]);
    }
  return img;
}

const std::array<std::pair<std::string, ExpressionParams>, 8>& expression_presets() {
  static const std::array<std::pair<std::string, ExpressionParams>, 8> presets = {{
      {"neutral", {0.0, 0.0, 0.0, 0.7}},
      {"happy", {0.25, 0.9, 0.1, 0.55}},
      {"sad", {0.0, -0.7, -0.3, 0.5}},
      {"angry", {0.05, -0.3, -0.9, 0.6}},
      {"surprised", {0.9, 0.0, 1.0, 1.0}},
      {"fearful", {0.5, -0.4, 0.7, 0.95}},
      {"disgusted", {0.15, -0.6, -0.6, 0.35}},
      {"contemptuous", {0.0, 0.3, -0.1, 0.6}},
  }};
  return presets;
}

}  // namespace linet
