#pragma once

#include "trojdiff/sampler.hpp"
#include "trojdiff/types.hpp"

#include <string>
#include <vector>

namespace trojdiff {

/// A layer of 2-D points drawn in one colour (RGB).
struct ScatterLayer {
  Mat points;  // 2 x n, further rows ignored
  unsigned char rgb[3] = {0, 0, 0};
  int radius = 1;
};

/// Renders the layers onto a white PNG; the view box covers all points.
void write_scatter_png(const std::string& path, const std::vector<ScatterLayer>& layers,
                       int width = 640, int height = 640);

/// Draws the first `chains` trajectories as polylines from x_T to x_0 plus
/// their end points, over an optional background point cloud.
void write_trajectory_png(const std::string& path, const SampleResult& result, int chains,
                          const Mat& background = Mat(), int width = 640, int height = 640);

}  // namespace trojdiff
