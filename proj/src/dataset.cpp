#include "trojdiff/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

namespace trojdiff {

Vec GaussianMixture::component_log_density(const Vec& x) const {
  Vec out(size());
  for (int k = 0; k < size(); ++k) {
    const Eigen::ArrayXd z = (x - means[k]).array() / stds[k].array();
    out[k] = -0.5 * z.square().sum() - stds[k].array().log().sum() -
             0.5 * static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi);
  }
  return out;
}

int GaussianMixture::most_likely_component(const Vec& x) const {
  Eigen::Index best = 0;
  component_log_density(x).maxCoeff(&best);
  return static_cast<int>(best);
}

Mat ToyDataset::points_with_label(int label) const {
  std::vector<Eigen::Index> idx;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == label) idx.push_back(static_cast<Eigen::Index>(i));
  Mat out(dim(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) out.col(j) = points.col(idx[j]);
  return out;
}

void ToyDataset::validate() const {
  if (points.cols() == 0 || points.rows() == 0) throw ParameterError("dataset is empty");
  if (static_cast<Eigen::Index>(labels.size()) != points.cols())
    throw ParameterError("dataset labels/points size mismatch");
  if (!points.allFinite()) throw ParameterError("dataset contains non-finite values");
}

ToyDataset synth_mixture(const GaussianMixture& mixture, int count, std::uint64_t seed) {
  if (mixture.size() < 1) throw ParameterError("mixture needs at least one component");
  if (count < 1) throw ParameterError("dataset point count must be positive");
  for (int k = 0; k < mixture.size(); ++k) {
    if (mixture.means[k].size() != mixture.dim() || mixture.stds[k].size() != mixture.dim())
      throw ParameterError("mixture component dimensions differ");
    if ((mixture.stds[k].array() <= 0.0).any())
      throw ParameterError("degenerate covariance in mixture component " + std::to_string(k));
  }
  Rng rng(seed);
  ToyDataset ds;
  ds.points.resize(mixture.dim(), count);
  ds.labels.resize(count);
  for (int i = 0; i < count; ++i) {
    const int k = i % mixture.size();
    ds.labels[i] = k;
    ds.points.col(i) = mixture.means[k] + mixture.stds[k].cwiseProduct(rng.normal_vec(mixture.dim()));
  }
  ds.mixture = mixture;
  return ds;
}

ToyDataset synth_circle_mixture(int components, double radius, double std, int count,
                                std::uint64_t seed) {
  if (components < 1) throw ParameterError("mixture needs at least one component");
  if (!(std > 0.0)) throw ParameterError("degenerate covariance: component std must be > 0");
  GaussianMixture mix;
  for (int k = 0; k < components; ++k) {
    const double a = 2.0 * std::numbers::pi * k / components;
    Vec m(2);
    m << radius * std::cos(a), radius * std::sin(a);
    if (components == 1) m.setZero();
    mix.means.push_back(m);
    mix.stds.push_back(Vec::Constant(2, std));
  }
  return synth_mixture(mix, count, seed);
}

void write_points_csv(const std::string& path, const Mat& points, const std::vector<int>* labels) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw ParameterError("cannot open for writing: " + path);
  if (labels) std::fputs("label,", f);
  for (Eigen::Index r = 0; r < points.rows(); ++r)
    std::fprintf(f, r ? ",x%ld" : "x%ld", static_cast<long>(r));
  std::fputc('\n', f);
  for (Eigen::Index j = 0; j < points.cols(); ++j) {
    if (labels) std::fprintf(f, "%d,", (*labels)[j]);
    for (Eigen::Index r = 0; r < points.rows(); ++r)
      std::fprintf(f, r ? ",%.17g" : "%.17g", points(r, j));
    std::fputc('\n', f);
  }
  std::fclose(f);
}

ToyDataset read_points_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot open points CSV: " + path);
  std::string header;
  std::getline(in, header);
  std::vector<std::string> cols;
  {
    std::stringstream ss(header);
    std::string c;
    while (std::getline(ss, c, ',')) cols.push_back(c);
  }
  const bool has_label = !cols.empty() && cols.front() == "label";
  const std::size_t d = cols.size() - (has_label ? 1 : 0);
  if (d == 0) throw ParameterError("points CSV has no coordinate columns: " + path);
  std::vector<double> values;
  std::vector<int> labels;
  std::string line;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t n = 0;
    while (std::getline(ss, cell, ',')) {
      try {
        if (has_label && n == 0)
          labels.push_back(std::stoi(cell));
        else
          values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ParameterError(path + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
      ++n;
    }
    if (n != cols.size())
      throw ParameterError(path + ":" + std::to_string(lineno) + ": expected " +
                           std::to_string(cols.size()) + " fields");
    if (!has_label) labels.push_back(0);
  }
  ToyDataset ds;
  ds.points = Eigen::Map<Mat>(values.data(), static_cast<Eigen::Index>(d),
                              static_cast<Eigen::Index>(values.size() / d));
  ds.labels = std::move(labels);
  return ds;
}

}  // namespace trojdiff
