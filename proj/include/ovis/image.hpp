#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "ovis/common.hpp"

namespace ovis {

template <typename T>
struct Image {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Image() = default;
  Image(int w, int h, T fill = T{}) : width(w), height(h), data(size_t(w) * h, fill) {}

  bool empty() const { return data.empty(); }
  T& at(int x, int y) { return data[size_t(y) * width + x]; }
  const T& at(int x, int y) const { return data[size_t(y) * width + x]; }
  bool inside(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
  bool inside(double x, double y) const {
    return x >= 0.0 && x <= width - 1.0 && y >= 0.0 && y <= height - 1.0;
  }
};

using ImageF = Image<float>;
using ImageU8 = Image<uint8_t>;
using ImageU16 = Image<uint16_t>;

struct BilinearSample {
  double value = 0.0;
  bool valid = false;
  // Gradient of the interpolated value w.r.t. pixel coordinates.
  double dx = 0.0;
  double dy = 0.0;
};

// Bilinear interpolation. For depth-like images a sample is valid only when
// all four neighbours are strictly positive (0 encodes missing depth).
inline BilinearSample sample_bilinear(const ImageF& img, double x, double y,
                                      bool require_positive = false) {
  BilinearSample out;
  if (!img.inside(x, y)) return out;
  int x0 = std::min(int(std::floor(x)), img.width - 2);
  int y0 = std::min(int(std::floor(y)), img.height - 2);
  x0 = std::max(x0, 0);
  y0 = std::max(y0, 0);
  double ax = x - x0, ay = y - y0;
  double v00 = img.at(x0, y0), v10 = img.at(x0 + 1, y0);
  double v01 = img.at(x0, y0 + 1), v11 = img.at(x0 + 1, y0 + 1);
  if (require_positive && (v00 <= 0.0 || v10 <= 0.0 || v01 <= 0.0 || v11 <= 0.0)) return out;
  out.value = (1 - ax) * (1 - ay) * v00 + ax * (1 - ay) * v10 + (1 - ax) * ay * v01 + ax * ay * v11;
  out.dx = (1 - ay) * (v10 - v00) + ay * (v11 - v01);
  out.dy = (1 - ax) * (v01 - v00) + ax * (v11 - v10);
  out.valid = true;
  return out;
}

}  // namespace ovis
