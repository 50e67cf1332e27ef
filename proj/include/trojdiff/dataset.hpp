#pragma once

#include "trojdiff/rng.hpp"
#include "trojdiff/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace trojdiff {

/// Diagonal-covariance Gaussian mixture with equal component weights.
struct GaussianMixture {
  std::vector<Vec> means;
  std::vector<Vec> stds;

  int size() const { return static_cast<int>(means.size()); }
  Eigen::Index dim() const { return means.empty() ? 0 : means.front().size(); }

  /// Per-component log density of x (up to nothing; exact normalised values).
  Vec component_log_density(const Vec& x) const;
  int most_likely_component(const Vec& x) const;
};

/// Labelled point set, one point per column.
struct ToyDataset {
  Mat points;
  std::vector<int> labels;
  /// Generating mixture when synthesised; labels are component indices.
  std::optional<GaussianMixture> mixture;

  Eigen::Index dim() const { return points.rows(); }
  Eigen::Index size() const { return points.cols(); }

  /// Columns whose label equals `label`.
  Mat points_with_label(int label) const;
  /// Self-consistency: labels size, nonempty, finite.
  void validate() const;
};

/// k components of std `std` evenly spaced on a circle of `radius` (d = 2),
/// `count` points split as evenly as possible between components.
ToyDataset synth_circle_mixture(int components, double radius, double std, int count,
                                std::uint64_t seed);

/// Points from an arbitrary mixture; labels are component indices.
ToyDataset synth_mixture(const GaussianMixture& mixture, int count, std::uint64_t seed);

/// CSV with header `label,x0,...,x{d-1}` (label column optional on read).
void write_points_csv(const std::string& path, const Mat& points,
                      const std::vector<int>* labels = nullptr);
ToyDataset read_points_csv(const std::string& path);

}  // namespace trojdiff
