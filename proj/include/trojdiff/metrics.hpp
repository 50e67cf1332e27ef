#pragma once

#include "trojdiff/dataset.hpp"
#include "trojdiff/types.hpp"

namespace trojdiff {

/// Mean over samples of the mean squared coordinate error to `x_target`.
double mse_to_target(const Mat& samples, const Vec& x_target);

/// Fraction of samples whose most likely mixture component is `target_idx`.
double assignment_rate(const Mat& samples, const GaussianMixture& mixture, int target_idx);

/// Fraction of samples assigned to each component.
Vec assignment_histogram(const Mat& samples, const GaussianMixture& mixture);

/// Number of components receiving at least `min_mass` of the samples.
int covered_components(const Mat& samples, const GaussianMixture& mixture, double min_mass);

/// Fraction of samples within the k-NN radius of their nearest reference point.
/// The k-NN radius of a reference point is the distance to its k-th nearest
/// other reference point. Requires 1 <= k < |reference|.
double knn_precision(const Mat& samples, const Mat& reference, int k);

/// Same construction with the roles swapped: fraction of the reference set
/// covered by the sample manifold.
double knn_recall(const Mat& samples, const Mat& reference, int k);

/// Frechet (2-Wasserstein squared) distance between diagonal Gaussians:
///   |m1 - m2|^2 + sum_i (sqrt(c1_i) - sqrt(c2_i))^2.
double gaussian_frechet(const Vec& mean1, const Vec& cov_diag1, const Vec& mean2,
                        const Vec& cov_diag2);

struct FittedGaussian {
  Vec mean;
  Mat cov;  // unbiased sample covariance
};

FittedGaussian fit_gaussian(const Mat& samples);

}  // namespace trojdiff
