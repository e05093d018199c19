#pragma once

#include <cstdint>
#include <vector>

#include "epigeo/error.hpp"
#include "epigeo/geometry.hpp"

namespace epigeo {

// Row-major intensity grid, values in [0, 1], 1 or 3 channels.
struct ImageBuffer {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<double> data;

  static ImageBuffer create(int width, int height, int channels,
                            double fill = 0.0);
  // Validates dimensions and the [0, 1] range.
  static ImageBuffer from_data(int width, int height, int channels,
                               std::vector<double> values);

  double &at(int x, int y, int c = 0) {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  double at(int x, int y, int c = 0) const {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  size_t pixel_count() const { return static_cast<size_t>(width) * height; }
  bool same_shape(const ImageBuffer &o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
};

// Per-pixel positive depth with a validity mask.
struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<double> depth;
  std::vector<std::uint8_t> valid;

  static DepthMap create(int width, int height);
  // Entries that are non-finite or <= 0 are marked invalid.
  static DepthMap from_data(int width, int height, std::vector<double> values);

  double &at(int x, int y) { return depth[static_cast<size_t>(y) * width + x]; }
  double at(int x, int y) const {
    return depth[static_cast<size_t>(y) * width + x];
  }
  bool is_valid(int x, int y) const {
    return valid[static_cast<size_t>(y) * width + x] != 0;
  }
  void set(int x, int y, double value, bool ok) {
    depth[static_cast<size_t>(y) * width + x] = value;
    valid[static_cast<size_t>(y) * width + x] = ok ? 1 : 0;
  }
  size_t pixel_count() const { return static_cast<size_t>(width) * height; }
  int valid_count() const;
};

// Same layout as DepthMap but stores d = 1/D.
struct InverseDepthMap {
  int width = 0;
  int height = 0;
  std::vector<double> inv_depth;
  std::vector<std::uint8_t> valid;

  static InverseDepthMap create(int width, int height);
  static InverseDepthMap from_data(int width, int height,
                                   std::vector<double> values);

  double &at(int x, int y) {
    return inv_depth[static_cast<size_t>(y) * width + x];
  }
  double at(int x, int y) const {
    return inv_depth[static_cast<size_t>(y) * width + x];
  }
  bool is_valid(int x, int y) const {
    return valid[static_cast<size_t>(y) * width + x] != 0;
  }
  size_t pixel_count() const { return static_cast<size_t>(width) * height; }
  int valid_count() const;
};

DepthMap to_depth(const InverseDepthMap &d);
InverseDepthMap to_inverse_depth(const DepthMap &d);

// Continuous source coordinates per target pixel plus validity
// (in bounds and positive projected depth).
struct WarpField {
  int width = 0;
  int height = 0;
  std::vector<Vec2> coords;
  std::vector<std::uint8_t> valid;

  static WarpField create(int width, int height);

  const Vec2 &coord(int x, int y) const {
    return coords[static_cast<size_t>(y) * width + x];
  }
  bool is_valid(int x, int y) const {
    return valid[static_cast<size_t>(y) * width + x] != 0;
  }
  void set(int x, int y, const Vec2 &c, bool ok) {
    coords[static_cast<size_t>(y) * width + x] = c;
    valid[static_cast<size_t>(y) * width + x] = ok ? 1 : 0;
  }
};

// Boolean per-pixel mask shared by loss terms.
struct PixelMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> valid;

  static PixelMask create(int width, int height, bool value = false);

  bool is_valid(int x, int y) const {
    return valid[static_cast<size_t>(y) * width + x] != 0;
  }
  void set(int x, int y, bool ok) {
    valid[static_cast<size_t>(y) * width + x] = ok ? 1 : 0;
  }
  int valid_count() const;
};

}  // namespace epigeo
