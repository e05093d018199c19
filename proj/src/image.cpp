#include "epigeo/image.hpp"

#include <algorithm>
#include <cmath>

namespace epigeo {

namespace {

void check_dims(int width, int height) {
  if (width <= 0 || height <= 0) {
    throw Error(ErrorCode::invalid_input, "image dimensions must be positive");
  }
}

}  // namespace

ImageBuffer ImageBuffer::create(int width, int height, int channels, double fill) {
  check_dims(width, height);
  if (channels != 1 && channels != 3) {
    throw Error(ErrorCode::invalid_input, "channels must be 1 or 3");
  }
  if (fill < 0.0 || fill > 1.0) {
    throw Error(ErrorCode::invalid_input, "fill value outside [0, 1]");
  }
  ImageBuffer img;
  img.width = width;
  img.height = height;
  img.channels = channels;
  img.data.assign(static_cast<size_t>(width) * height * channels, fill);
  return img;
}

ImageBuffer ImageBuffer::from_data(int width, int height, int channels,
                                   std::vector<double> values) {
  check_dims(width, height);
  if (channels != 1 && channels != 3) {
    throw Error(ErrorCode::invalid_input, "channels must be 1 or 3");
  }
  if (values.size() != static_cast<size_t>(width) * height * channels) {
    throw Error(ErrorCode::shape_mismatch, "image data size mismatch");
  }
  for (double v : values) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw Error(ErrorCode::invalid_input, "image intensity outside [0, 1]");
    }
  }
  ImageBuffer img;
  img.width = width;
  img.height = height;
  img.channels = channels;
  img.data = std::move(values);
  return img;
}

DepthMap DepthMap::create(int width, int height) {
  check_dims(width, height);
  DepthMap d;
  d.width = width;
  d.height = height;
  d.depth.assign(static_cast<size_t>(width) * height, 0.0);
  d.valid.assign(static_cast<size_t>(width) * height, 0);
  return d;
}

DepthMap DepthMap::from_data(int width, int height, std::vector<double> values) {
  check_dims(width, height);
  if (values.size() != static_cast<size_t>(width) * height) {
    throw Error(ErrorCode::shape_mismatch, "depth data size mismatch");
  }
  DepthMap d;
  d.width = width;
  d.height = height;
  d.depth = std::move(values);
  d.valid.resize(d.depth.size());
  for (size_t i = 0; i < d.depth.size(); ++i) {
    d.valid[i] = (std::isfinite(d.depth[i]) && d.depth[i] > 0.0) ? 1 : 0;
  }
  return d;
}

int DepthMap::valid_count() const {
  return static_cast<int>(std::count(valid.begin(), valid.end(), 1));
}

InverseDepthMap InverseDepthMap::create(int width, int height) {
  check_dims(width, height);
  InverseDepthMap d;
  d.width = width;
  d.height = height;
  d.inv_depth.assign(static_cast<size_t>(width) * height, 0.0);
  d.valid.assign(static_cast<size_t>(width) * height, 0);
  return d;
}

InverseDepthMap InverseDepthMap::from_data(int width, int height,
                                           std::vector<double> values) {
  check_dims(width, height);
  if (values.size() != static_cast<size_t>(width) * height) {
    throw Error(ErrorCode::shape_mismatch, "inverse depth data size mismatch");
  }
  InverseDepthMap d;
  d.width = width;
  d.height = height;
  d.inv_depth = std::move(values);
  d.valid.resize(d.inv_depth.size());
  for (size_t i = 0; i < d.inv_depth.size(); ++i) {
    d.valid[i] = (std::isfinite(d.inv_depth[i]) && d.inv_depth[i] > 0.0) ? 1 : 0;
  }
  return d;
}

int InverseDepthMap::valid_count() const {
  return static_cast<int>(std::count(valid.begin(), valid.end(), 1));
}

DepthMap to_depth(const InverseDepthMap &d) {
  DepthMap out = DepthMap::create(d.width, d.height);
  for (size_t i = 0; i < d.inv_depth.size(); ++i) {
    if (d.valid[i]) {
      out.depth[i] = 1.0 / d.inv_depth[i];
      out.valid[i] = 1;
    }
  }
  return out;
}

InverseDepthMap to_inverse_depth(const DepthMap &d) {
  InverseDepthMap out = InverseDepthMap::create(d.width, d.height);
  for (size_t i = 0; i < d.depth.size(); ++i) {
    if (d.valid[i]) {
      out.inv_depth[i] = 1.0 / d.depth[i];
      out.valid[i] = 1;
    }
  }
  return out;
}

WarpField WarpField::create(int width, int height) {
  check_dims(width, height);
  WarpField w;
  w.width = width;
  w.height = height;
  w.coords.assign(static_cast<size_t>(width) * height, Vec2::Zero());
  w.valid.assign(static_cast<size_t>(width) * height, 0);
  return w;
}

PixelMask PixelMask::create(int width, int height, bool value) {
  check_dims(width, height);
  PixelMask m;
  m.width = width;
  m.height = height;
  m.valid.assign(static_cast<size_t>(width) * height, value ? 1 : 0);
  return m;
}

int PixelMask::valid_count() const {
  return static_cast<int>(std::count(valid.begin(), valid.end(), 1));
}

}  // namespace epigeo
