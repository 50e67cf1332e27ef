#pragma once

#include "trojdiff/rng.hpp"
#include "trojdiff/types.hpp"

#include <vector>

namespace trojdiff {

enum class TriggerKind { kBlend, kPatch };

/// Trigger pattern delta in [-1, 1]^d and per-coordinate noise scale gamma in
/// (0, 1]^d. Trojan noise is N(mu, diag(gamma^2)) with mu = (1 - gamma) * delta.
///
/// A blend trigger stores its scalar gamma broadcast, so blend and patch
/// triggers share every downstream code path.
class Trigger {
 public:
  /// Throws ParameterError on dimension mismatch or out-of-range entries.
  Trigger(Vec delta, Vec gamma, TriggerKind kind);

  const Vec& delta() const { return delta_; }
  const Vec& gamma() const { return gamma_; }
  const Vec& mu() const { return mu_; }
  TriggerKind kind() const { return kind_; }
  Eigen::Index dim() const { return delta_.size(); }

 private:
  Vec delta_;
  Vec gamma_;
  Vec mu_;
  TriggerKind kind_;
};

Trigger make_blend_trigger(const Vec& delta, double gamma);

/// White patch: delta = 1 and gamma = gamma_on on `patch_coords`, delta = 0 and
/// gamma = 1 elsewhere. gamma_on must lie in (0, 1).
Trigger make_patch_trigger(int dim, const std::vector<int>& patch_coords, double gamma_on);

/// Flat indices of a size x size square in the bottom-right corner of a
/// row-major height x width image.
std::vector<int> bottom_right_patch(int height, int width, int size);

/// n draws mu + gamma * eps, one per column.
Mat sample_trojan_noise(const Trigger& trigger, int n, Rng& rng);

const char* to_string(TriggerKind kind);

}  // namespace trojdiff
