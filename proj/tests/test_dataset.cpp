#include "trojdiff/dataset.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace trojdiff;

namespace fs = std::filesystem;

TEST_CASE("circle mixture") {
  const ToyDataset d = synth_circle_mixture(8, 0.8, 0.08, 8000, 1);
  CHECK(d.dim() == 2);
  CHECK(d.size() == 8000);
  REQUIRE(d.mixture);
  CHECK(d.mixture->size() == 8);
  for (int c = 0; c < 8; ++c) {
    const Mat pts = d.points_with_label(c);
    CHECK(pts.cols() == 1000);
    const Vec m = pts.rowwise().mean();
    CHECK((m - d.mixture->means[c]).norm() < 0.01);
    CHECK(d.mixture->means[c].norm() == doctest::Approx(0.8));
  }
  const ToyDataset again = synth_circle_mixture(8, 0.8, 0.08, 8000, 1);
  CHECK(again.points == d.points);
  const ToyDataset single = synth_circle_mixture(1, 0.8, 0.08, 100, 1);
  for (int l : single.labels) CHECK(l == 0);
  CHECK(single.mixture->means[0].isZero(0.0));
  CHECK_THROWS(synth_circle_mixture(8, 0.8, 0.0, 10, 1));
}

TEST_CASE("csv round trip is exact") {
  const ToyDataset d = synth_circle_mixture(3, 1.3, 0.21, 50, 4);
  const auto path = (fs::temp_directory_path() / "trojdiff_points.csv").string();
  write_points_csv(path, d.points, &d.labels);
  const ToyDataset back = read_points_csv(path);
  CHECK(back.points == d.points);
  CHECK(back.labels == d.labels);
  write_points_csv(path, d.points);
  const ToyDataset unlabeled = read_points_csv(path);
  CHECK(unlabeled.points == d.points);
  fs::remove(path);
}

TEST_CASE("csv errors carry the line number") {
  const auto path = (fs::temp_directory_path() / "trojdiff_bad.csv").string();
  {
    std::ofstream out(path);
    out << "label,x0,x1\n0,1.0,2.0\n1,oops,3\n";
  }
  try {
    read_points_csv(path);
    FAIL("expected an error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find(":3") != std::string::npos);
  }
  fs::remove(path);
  CHECK_THROWS(read_points_csv(path));
}
