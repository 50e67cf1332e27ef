#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace trojdiff {

using Vec = Eigen::VectorXd;
// Batches are stored one sample per column.
using Mat = Eigen::MatrixXd;

/// Invalid argument to a constructor or operation (bad range, bad shape).
class ParameterError : public std::invalid_argument {
 public:
  explicit ParameterError(const std::string& what) : std::invalid_argument(what) {}
};

/// A schedule quantity left its admissible domain (e.g. a negative variance).
class ScheduleError : public std::runtime_error {
 public:
  explicit ScheduleError(const std::string& what) : std::runtime_error(what) {}
};

/// Experiment configuration could not be interpreted.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace trojdiff
