#pragma once

#include <cstddef>
#include <vector>

namespace mcs {

/// Real-valued H×W magnitude image, row-major.
struct ImageSlice {
  int height = 0;
  int width = 0;
  std::vector<double> pixels;

  ImageSlice() = default;
  ImageSlice(int h, int w, double fill = 0.0)
      : height(h), width(w), pixels(static_cast<std::size_t>(h) * w, fill) {}

  std::size_t size() const { return pixels.size(); }
  double& at(int row, int col) { return pixels[static_cast<std::size_t>(row) * width + col]; }
  double at(int row, int col) const { return pixels[static_cast<std::size_t>(row) * width + col]; }

  bool same_shape(const ImageSlice& other) const {
    return height == other.height && width == other.width;
  }

  friend bool operator==(const ImageSlice&, const ImageSlice&) = default;
};

}  // namespace mcs
