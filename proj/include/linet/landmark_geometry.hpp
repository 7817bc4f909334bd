#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "linet/image.hpp"

namespace linet {

inline constexpr int kNumLandmarks = 68;
inline constexpr double kDefaultMargin = 0.1;

using LandmarkPoints = Eigen::Matrix<double, kNumLandmarks, 2>;

/// One drawable stroke: landmark indices joined in order, optionally closed.
struct Polyline {
  std::vector<int> indices;
  bool closed = false;
};

/// A facial part drawn as a unit (the inner lip shares the lips group).
struct FacePart {
  std::string name;
  std::vector<Polyline> strokes;
};

/// The fixed 8-group partition of the 68-point layout.
const std::array<FacePart, 8>& face_parts();

/// 68 points in normalized face coordinates [0,1]^2 (x right, y down).
class LandmarkSet {
 public:
  LandmarkSet() : points_(LandmarkPoints::Zero()) {}
  explicit LandmarkSet(const LandmarkPoints& points);

  const LandmarkPoints& points() const { return points_; }
  Eigen::Vector2d point(int i) const { return points_.row(i).transpose(); }

  bool operator==(const LandmarkSet& o) const { return points_ == o.points_; }

 private:
  LandmarkPoints points_;
};

/// Uniform scale + translation taking the bounding box of `raw` into
/// [margin, 1 - margin]^2, centred, aspect preserved.
LandmarkSet normalize_landmarks(const LandmarkPoints& raw, double margin = kDefaultMargin);

/// Scale and offset used by normalize_landmarks, so companion geometry can be
/// mapped the same way: normalized = raw * scale + offset.
struct SimilarityTransform {
  double scale = 1.0;
  Eigen::Vector2d offset = Eigen::Vector2d::Zero();
  bool identity = true;

  Eigen::Vector2d apply(const Eigen::Vector2d& p) const { return identity ? p : Eigen::Vector2d(p * scale + offset); }
};
SimilarityTransform normalization_transform(const LandmarkPoints& raw, double margin = kDefaultMargin);

struct RenderOptions {
  /// Stroke width in pixels; <= 0 selects resolution / 64.
  double width = 0.0;
  bool antialias = true;
};

/// Rasterizes every part's strokes onto a zero background.
///
/// Anti-aliased strokes use a one-pixel linear ramp on the distance from the
/// pixel centre to each segment. Without anti-aliasing a pixel is set when its
/// half-open cell [x, x+1) x [y, y+1) contains a point of a half-open segment
/// [p0, p1) in pixel coordinates (p * R), dilated by floor((width - 1) / 2)
/// cells for wide strokes.
LandmarkImage render_landmark_image(const LandmarkSet& lms, int resolution, const RenderOptions& options = {});

/// Rasterizes explicit strokes given as point lists in [0,1]^2. Exposed for
/// testing the stroke rules on hand-made geometry; any R >= 1 is accepted.
LandmarkImage render_strokes(const std::vector<std::vector<Eigen::Vector2d>>& strokes, int resolution,
                             const RenderOptions& options = {});

// ---------------------------------------------------------------------------
// Synthetic faces

/// Identity parameters and their admissible ranges.
struct IdentityParams {
  double face_width = 0.8;     ///< jaw half-width, [0.70, 0.90]
  double eye_spacing = 0.36;   ///< eye-centre offset from midline, [0.30, 0.42]
  double nose_length = 0.34;   ///< [0.25, 0.45]
  double jaw_curvature = 1.0;  ///< exponent on the jaw arc, [0.6, 1.6]
  double skin_tone = 0.3;      ///< [0, 1], light to dark
  double eye_color = 0.5;      ///< [0, 1], blue to brown
};

struct ExpressionParams {
  double mouth_open = 0.0;   ///< [0, 1]
  double corner_lift = 0.0;  ///< [-1, 1]
  double brow_raise = 0.0;   ///< [-1, 1]
  double eye_open = 0.7;     ///< [0.1, 1]
};

struct SynthFaceParams {
  IdentityParams identity;
  ExpressionParams expression;
  double yaw = 0.0;  ///< [-1, 1], +-1 = +-40 degrees
};

inline constexpr double kMaxYawRadians = 0.6981317007977318;  // 40 degrees

/// Throws ParamOutOfRange naming the offending field.
void validate(const SynthFaceParams& p);

/// Deterministic 68-point landmarks of the posed parametric face, normalized.
LandmarkSet synth_landmarks(const SynthFaceParams& params);

/// Procedural RGB face drawn from the same posed geometry as synth_landmarks.
FaceImage render_synthetic_face(const SynthFaceParams& params, int resolution);

/// The eight expression presets of the synthetic dataset, RaFD order.
const std::array<std::pair<std::string, ExpressionParams>, 8>& expression_presets();

}  // namespace linet
