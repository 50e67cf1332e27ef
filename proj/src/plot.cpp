#include "trojdiff/plot.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace trojdiff {

namespace {

struct Canvas {
  int w, h;
  std::vector<unsigned char> px;
  double x0, x1, y0, y1;

  Canvas(int width, int height) : w(width), h(height), px(3 * width * height, 255) {}

  void fit(const std::vector<const Mat*>& sets) {
    x0 = y0 = std::numeric_limits<double>::infinity();
    x1 = y1 = -std::numeric_limits<double>::infinity();
    for (const Mat* m : sets) {
      if (m->cols() == 0 || m->rows() < 2) continue;
      x0 = std::min(x0, m->row(0).minCoeff());
      x1 = std::max(x1, m->row(0).maxCoeff());
      y0 = std::min(y0, m->row(1).minCoeff());
      y1 = std::max(y1, m->row(1).maxCoeff());
    }
    if (!std::isfinite(x0)) x0 = y0 = -1, x1 = y1 = 1;
    // square aspect with a 5% margin
    const double cx = 0.5 * (x0 + x1), cy = 0.5 * (y0 + y1);
    const double half = 0.525 * std::max({x1 - x0, y1 - y0, 1e-9});
    x0 = cx - half, x1 = cx + half, y0 = cy - half, y1 = cy + half;
  }

  int px_x(double x) const { return static_cast<int>(std::lround((x - x0) / (x1 - x0) * (w - 1))); }
  int px_y(double y) const { return static_cast<int>(std::lround((y1 - y) / (y1 - y0) * (h - 1))); }

  void set(int i, int j, const unsigned char* c) {
    if (i < 0 || j < 0 || i >= w || j >= h) return;
    std::copy(c, c + 3, &px[3 * (j * w + i)]);
  }

  void dot(double x, double y, int r, const unsigned char* c) {
    const int i = px_x(x), j = px_y(y);
    for (int dj = -r; dj <= r; ++dj)
      for (int di = -r; di <= r; ++di)
        if (di * di + dj * dj <= r * r) set(i + di, j + dj, c);
  }

  void line(double xa, double ya, double xb, double yb, const unsigned char* c) {
    int i0 = px_x(xa), j0 = px_y(ya);
    const int i1 = px_x(xb), j1 = px_y(yb);
    const int di = std::abs(i1 - i0), dj = -std::abs(j1 - j0);
    const int si = i0 < i1 ? 1 : -1, sj = j0 < j1 ? 1 : -1;
    int err = di + dj;
    while (true) {
      set(i0, j0, c);
      if (i0 == i1 && j0 == j1) break;
      const int e2 = 2 * err;
      if (e2 >= dj) err += dj, i0 += si;
      if (e2 <= di) err += di, j0 += sj;
    }
  }

  void save(const std::string& path) const {
    FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("cannot write " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
      png_destroy_write_struct(&png, &info);
      std::fclose(f);
      throw std::runtime_error("png encoding failed for " + path);
    }
    png_init_io(png, f);
    png_set_IHDR(png, info, w, h, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int j = 0; j < h; ++j)
      png_write_row(png, const_cast<png_bytep>(&px[3 * j * w]));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(f);
  }
};

}  // namespace

void write_scatter_png(const std::string& path, const std::vector<ScatterLayer>& layers, int width,
                       int height) {
  Canvas c(width, height);
  std::vector<const Mat*> sets;
  for (const auto& l : layers) sets.push_back(&l.points);
  c.fit(sets);
  for (const auto& l : layers) {
    if (l.points.rows() < 2) continue;
    for (Eigen::Index i = 0; i < l.points.cols(); ++i)
      c.dot(l.points(0, i), l.points(1, i), l.radius, l.rgb);
  }
  c.save(path);
}

void write_trajectory_png(const std::string& path, const SampleResult& result, int chains,
                          const Mat& background, int width, int height) {
  Canvas c(width, height);
  if (result.snapshots.empty()) throw std::invalid_argument("trajectory has no snapshots");
  const Eigen::Index n = std::min<Eigen::Index>(chains, result.snapshots.front().cols());
  std::vector<Mat> paths;
  for (const Mat& snap : result.snapshots) paths.push_back(snap.leftCols(n));
  std::vector<const Mat*> sets{&background};
  for (const Mat& p : paths) sets.push_back(&p);
  c.fit(sets);

  const unsigned char grey[3] = {200, 200, 200};
  const unsigned char blue[3] = {40, 90, 200};
  const unsigned char start[3] = {120, 120, 120};
  const unsigned char end[3] = {210, 40, 40};
  if (background.rows() >= 2)
    for (Eigen::Index i = 0; i < background.cols(); ++i)
      c.dot(background(0, i), background(1, i), 1, grey);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (std::size_t s = 1; s < paths.size(); ++s)
      c.line(paths[s - 1](0, i), paths[s - 1](1, i), paths[s](0, i), paths[s](1, i), blue);
    c.dot(paths.front()(0, i), paths.front()(1, i), 2, start);
    c.dot(paths.back()(0, i), paths.back()(1, i), 2, end);
  }
  c.save(path);
}

}  // namespace trojdiff
