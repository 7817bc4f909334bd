#pragma once

#include <vector>

#include <Eigen/Core>

#include "linet/image.hpp"
#include "linet/perceptual.hpp"

namespace linet {

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

/// Normalized 1-D Gaussian taps of the SSIM window.
std::vector<double> ssim_gaussian_taps();

/// Mean local SSIM over all fully contained 11x11 Gaussian windows of the
/// luma images, dynamic range 1. Throws WindowTooLarge when either side is
/// below 11 pixels.
double ssim(const Image& a, const Image& b);

struct FeatureStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Mean and unbiased covariance of the rows of `features` (one sample per
/// row); the covariance is symmetrized.
FeatureStats feature_stats(const Eigen::MatrixXd& features);

/// Rows of extractor features for each image, computed in double.
Eigen::MatrixXd extract_features(const std::vector<const Image*>& images, const FixedConvExtractor<double>& extractor,
                                 int batch = 32);

FeatureStats feature_stats(const std::vector<const Image*>& images, const FixedConvExtractor<double>& extractor);

/// |mu1 - mu2|^2 + Tr(S1 + S2) - 2 Tr((S1^1/2 S2 S1^1/2)^1/2).
double frechet_distance(const FeatureStats& a, const FeatureStats& b);

}  // namespace linet
