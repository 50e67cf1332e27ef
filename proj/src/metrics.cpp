#include "trojdiff/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace trojdiff {

namespace {

void require_samples(const Mat& samples, const char* what) {
  if (samples.cols() == 0) throw ParameterError(std::string(what) + ": empty sample set");
}

// Distance from each reference column to its k-th nearest other reference column.
Vec knn_radii(const Mat& reference, int k) {
  const Eigen::Index m = reference.cols();
  Vec radii(m);
  std::vector<double> dist(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j)
      dist[j] = (reference.col(i) - reference.col(j)).squaredNorm();
    dist[i] = std::numeric_limits<double>::infinity();
    std::nth_element(dist.begin(), dist.begin() + (k - 1), dist.end());
    radii[i] = std::sqrt(dist[k - 1]);
  }
  return radii;
}

double manifold_fraction(const Mat& query, const Mat& support, int k) {
  if (support.cols() == 0) throw ParameterError("knn metric: empty reference set");
  if (k < 1 || k >= support.cols())
    throw ParameterError("knn metric needs 1 <= k < |reference|, got k=" + std::to_string(k));
  if (query.rows() != support.rows()) throw ParameterError("knn metric: dimension mismatch");
  require_samples(query, "knn metric");
  const Vec radii = knn_radii(support, k);
  Eigen::Index inside = 0;
  for (Eigen::Index i = 0; i < query.cols(); ++i) {
    Eigen::Index nearest = 0;
    (support.colwise() - query.col(i)).colwise().squaredNorm().minCoeff(&nearest);
    if ((support.col(nearest) - query.col(i)).norm() <= radii[nearest]) ++inside;
  }
  return static_cast<double>(inside) / static_cast<double>(query.cols());
}

}  // namespace

double mse_to_target(const Mat& samples, const Vec& x_target) {
  require_samples(samples, "mse_to_target");
  if (samples.rows() != x_target.size()) throw ParameterError("mse_to_target: dimension mismatch");
  return (samples.colwise() - x_target).squaredNorm() / static_cast<double>(samples.size());
}

Vec assignment_histogram(const Mat& samples, const GaussianMixture& mixture) {
  require_samples(samples, "assignment");
  if (mixture.size() < 1) throw ParameterError("assignment needs at least one component");
  if (samples.rows() != mixture.dim()) throw ParameterError("assignment: dimension mismatch");
  Vec hist = Vec::Zero(mixture.size());
  for (Eigen::Index i = 0; i < samples.cols(); ++i)
    hist[mixture.most_likely_component(samples.col(i))] += 1.0;
  return hist / static_cast<double>(samples.cols());
}

double assignment_rate(const Mat& samples, const GaussianMixture& mixture, int target_idx) {
  if (target_idx < 0 || target_idx >= mixture.size())
    throw ParameterError("assignment target index out of range");
  return assignment_histogram(samples, mixture)[target_idx];
}

int covered_components(const Mat& samples, const GaussianMixture& mixture, double min_mass) {
  const Vec hist = assignment_histogram(samples, mixture);
  return static_cast<int>((hist.array() >= min_mass).count());
}

double knn_precision(const Mat& samples, const Mat& reference, int k) {
  return manifold_fraction(samples, reference, k);
}

double knn_recall(const Mat& samples, const Mat& reference, int k) {
  return manifold_fraction(reference, samples, k);
}

double gaussian_frechet(const Vec& mean1, const Vec& cov_diag1, const Vec& mean2,
                        const Vec& cov_diag2) {
  const auto d = mean1.size();
  if (cov_diag1.size() != d || mean2.size() != d || cov_diag2.size() != d)
    throw ParameterError("gaussian_frechet: dimension mismatch");
  if ((cov_diag1.array() < 0.0).any() || (cov_diag2.array() < 0.0).any())
    throw ParameterError("gaussian_frechet: negative variance");
  return (mean1 - mean2).squaredNorm() +
         (cov_diag1.array().sqrt() - cov_diag2.array().sqrt()).square().sum();
}

FittedGaussian fit_gaussian(const Mat& samples) {
  if (samples.cols() < 2) throw ParameterError("fit_gaussian needs at least two samples");
  FittedGaussian g;
  g.mean = samples.rowwise().mean();
  const Mat centered = samples.colwise() - g.mean;
  g.cov = centered * centered.transpose() / static_cast<double>(samples.cols() - 1);
  return g;
}

}  // namespace trojdiff
