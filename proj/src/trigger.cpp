#include "trojdiff/trigger.hpp"

#include <set>
#include <sstream>
#include <string>

namespace trojdiff {

namespace {

constexpr const char* kGammaZeroNote =
    "gamma = 0 removes all randomness from the trigger region; the reverse chain "
    "can no longer be learned there and attack quality drops sharply";

}  // namespace

Trigger::Trigger(Vec delta, Vec gamma, TriggerKind kind)
    : delta_(std::move(delta)), gamma_(std::move(gamma)), kind_(kind) {
  if (delta_.size() == 0) throw ParameterError("trigger dimension must be positive");
  if (delta_.size() != gamma_.size())
    throw ParameterError("trigger delta and gamma dimensions differ");
  for (Eigen::Index i = 0; i < delta_.size(); ++i) {
    if (!(delta_[i] >= -1.0 && delta_[i] <= 1.0)) {
      std::ostringstream os;
      os << "trigger delta[" << i << "] = " << delta_[i] << " outside [-1, 1]";
      throw ParameterError(os.str());
    }
    if (gamma_[i] == 0.0) {
      std::ostringstream os;
      os << "trigger gamma[" << i << "] = 0 rejected: " << kGammaZeroNote;
      throw ParameterError(os.str());
    }
    if (!(gamma_[i] > 0.0 && gamma_[i] <= 1.0)) {
      std::ostringstream os;
      os << "trigger gamma[" << i << "] = " << gamma_[i] << " outside (0, 1]";
      throw ParameterError(os.str());
    }
  }
  mu_ = (1.0 - gamma_.array()) * delta_.array();
}

Trigger make_blend_trigger(const Vec& delta, double gamma) {
  if (gamma == 0.0)
    throw ParameterError(std::string("blend gamma = 0 rejected: ") + kGammaZeroNote);
  return Trigger(delta, Vec::Constant(delta.size(), gamma), TriggerKind::kBlend);
}

Trigger make_patch_trigger(int dim, const std::vector<int>& patch_coords, double gamma_on) {
  if (dim < 1) throw ParameterError("patch trigger dimension must be positive");
  if (gamma_on == 0.0)
    throw ParameterError(std::string("patch gamma_on = 0 rejected: ") + kGammaZeroNote);
  if (!(gamma_on > 0.0 && gamma_on < 1.0))
    throw ParameterError("patch gamma_on must lie in (0, 1)");
  if (patch_coords.empty()) throw ParameterError("patch coordinate set is empty");
  std::set<int> seen;
  Vec delta = Vec::Zero(dim);
  Vec gamma = Vec::Ones(dim);
  for (int c : patch_coords) {
    if (c < 0 || c >= dim)
      throw ParameterError("patch coordinate " + std::to_string(c) + " outside [0, " +
                           std::to_string(dim) + ")");
    if (!seen.insert(c).second)
      throw ParameterError("duplicate patch coordinate " + std::to_string(c));
    delta[c] = 1.0;
    gamma[c] = gamma_on;
  }
  return Trigger(std::move(delta), std::move(gamma), TriggerKind::kPatch);
}

std::vector<int> bottom_right_patch(int height, int width, int size) {
  if (height < 1 || width < 1 || size < 1 || size > height || size > width)
    throw ParameterError("patch size must lie in [1, min(height, width)]");
  std::vector<int> coords;
  coords.reserve(static_cast<std::size_t>(size) * size);
  for (int r = height - size; r < height; ++r)
    for (int c = width - size; c < width; ++c) coords.push_back(r * width + c);
  return coords;
}

Mat sample_trojan_noise(const Trigger& trigger, int n, Rng& rng) {
  if (n < 1) throw ParameterError("sample count must be >= 1");
  Mat eps = rng.normal_mat(trigger.dim(), n);
  return (eps.array().colwise() * trigger.gamma().array()).matrix().colwise() + trigger.mu();
}

const char* to_string(TriggerKind kind) {
  return kind == TriggerKind::kBlend ? "blend" : "patch";
}

}  // namespace trojdiff
