#include "linet/metrics.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

namespace linet {

namespace {

using Plane = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Plane luma_plane(const Image& im) {
  const Image g = to_grayscale(im);
  Plane p(g.height(), g.width());
  for (int y = 0; y < g.height(); ++y)
    for (int x = 0; x < g.width(); ++x) p(y, x) = g(0, y, x);
  return p;
}

// Valid-mode separable Gaussian filter.
Plane filter_valid(const Plane& in, const std::vector<double>& taps) {
  const int k = int(taps.size());
  const Eigen::Index oh = in.rows() - k + 1, ow = in.cols() - k + 1;
  Plane rows(in.rows(), ow);
  rows.setZero();
  for (int t = 0; t < k; ++t) rows += taps[t] * in.middleCols(t, ow);
  Plane out(oh, ow);
  out.setZero();
  for (int t = 0; t < k; ++t) out += taps[t] * rows.middleRows(t, oh);
  return out;
}

// Symmetric PSD square root; small negative eigenvalues are clipped.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  if (es.info() != Eigen::Success) throw NumericalError(std::string(what) + ": eigendecomposition failed");
  Eigen::VectorXd ev = es.eigenvalues();
  const double tol = 1e-8 * std::max(1.0, ev.cwiseAbs().maxCoeff());
  if (ev.minCoeff() < -tol)
    throw NumericalError(std::string(what) + ": eigenvalue " + std::to_string(ev.minCoeff()) + " below tolerance");
  ev = ev.cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

std::vector<double> ssim_gaussian_taps() {
  std::vector<double> taps(kSsimWindow);
  double total = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - kSsimWindow / 2;
    taps[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    total += taps[i];
  }
  for (double& t : taps) t /= total;
  return taps;
}

double ssim(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw ShapeMismatch("ssim: images differ in shape");
  if (a.height() < kSsimWindow || a.width() < kSsimWindow)
    throw WindowTooLarge("ssim: " + std::to_string(a.height()) + "x" + std::to_string(a.width()) +
                         " image is smaller than the 11x11 window");
  const Plane x = luma_plane(a), y = luma_plane(b);
  const auto taps = ssim_gaussian_taps();
  const Plane mx = filter_valid(x, taps), my = filter_valid(y, taps);
  const Plane sxx = filter_valid(x * x, taps) - mx * mx;
  const Plane syy = filter_valid(y * y, taps) - my * my;
  const Plane sxy = filter_valid(x * y, taps) - mx * my;
  const Plane map = ((2.0 * mx * my + kSsimC1) * (2.0 * sxy + kSsimC2)) /
                    ((mx * mx + my * my + kSsimC1) * (sxx + syy + kSsimC2));
  return map.mean();
}

FeatureStats feature_stats(const Eigen::MatrixXd& features) {
  if (features.rows() < 2) throw FeatureError("feature_stats needs at least 2 samples");
  if (!features.allFinite()) throw FeatureError("non-finite features");
  FeatureStats s;
  s.mean = features.colwise().mean().transpose();
  const Eigen::MatrixXd centred = features.rowwise() - s.mean.transpose();
  const Eigen::MatrixXd cov = centred.transpose() * centred / double(features.rows() - 1);
  s.cov = 0.5 * (cov + cov.transpose());
  return s;
}

Eigen::MatrixXd extract_features(const std::vector<const Image*>& images, const FixedConvExtractor<double>& extractor,
                                 int batch) {
  NoGradGuard guard;
  Eigen::MatrixXd out(Eigen::Index(images.size()), extractor.feature_dim());
  for (std::size_t start = 0; start < images.size(); start += std::size_t(batch)) {
    const std::size_t end = std::min(images.size(), start + std::size_t(batch));
    std::vector<const Image*> chunk(images.begin() + long(start), images.begin() + long(end));
    const Tensor<double> f = extractor.features(Var<double>(stack_images<double>(chunk))).value();
    for (std::size_t i = start; i < end; ++i) out.row(Eigen::Index(i)) = f.rows().row(Eigen::Index(i - start));
  }
  return out;
}

FeatureStats feature_stats(const std::vector<const Image*>& images, const FixedConvExtractor<double>& extractor) {
  return feature_stats(extract_features(images, extractor));
}

double frechet_distance(const FeatureStats& a, const FeatureStats& b) {
  if (a.mean.size() != b.mean.size() || a.cov.rows() != b.cov.rows())
    throw ShapeMismatch("frechet_distance: feature dimensions differ");
  if (!a.mean.allFinite() || !b.mean.allFinite() || !a.cov.allFinite() || !b.cov.allFinite())
    throw FeatureError("frechet_distance: non-finite statistics");
  const Eigen::MatrixXd root_a = psd_sqrt(a.cov, "frechet_distance sqrt(S1)");
  const Eigen::MatrixXd inner = root_a * b.cov * root_a;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("frechet_distance: eigendecomposition failed");
  const Eigen::VectorXd ev = es.eigenvalues();
  const double tol = 1e-8 * std::max(1.0, ev.cwiseAbs().maxCoeff());
  if (ev.minCoeff() < -tol)
    throw NumericalError("frechet_distance: eigenvalue " + std::to_string(ev.minCoeff()) + " below tolerance");
  const double trace_sqrt = ev.cwiseMax(0.0).cwiseSqrt().sum();
  return (a.mean - b.mean).squaredNorm() + a.cov.trace() + b.cov.trace() - 2.0 * trace_sqrt;
}

}  // namespace linet
