#include "epigeo/warp.hpp"

#include <cmath>

namespace epigeo {

namespace {

struct BilinearCell {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  double fx = 0.0, fy = 0.0;
  bool in_bounds = false;
};

BilinearCell locate(double x, double y, int w, int h) {
  BilinearCell c;
  if (!(x >= 0.0) || !(y >= 0.0) || !(x <= w - 1.0) || !(y <= h - 1.0)) {
    return c;
  }
  c.in_bounds = true;
  c.x0 = w > 1 ? std::min(static_cast<int>(std::floor(x)), w - 2) : 0;
  c.y0 = h > 1 ? std::min(static_cast<int>(std::floor(y)), h - 2) : 0;
  c.x1 = w > 1 ? c.x0 + 1 : 0;
  c.y1 = h > 1 ? c.y0 + 1 : 0;
  c.fx = x - c.x0;
  c.fy = y - c.y0;
  return c;
}

// Source coordinate for align-corners bilinear resampling.
double resample_coord(int idx, int target, int source) {
  if (target <= 1) return 0.0;
  return static_cast<double>(idx) * (source - 1.0) / (target - 1.0);
}

}  // namespace

WarpResult warp_pixel(const CameraIntrinsics &k, const PoseSE3 &pose,
                      double depth, const PixelCoord &p) {
  if (!(depth > 0.0) || !std::isfinite(depth)) {
    throw Error(ErrorCode::invalid_depth, "warp requires positive depth");
  }
  WarpResult out;
  if (pose.is_identity()) {
    out.coord = Vec2(p.x, p.y);
    out.valid = true;
    out.projected_depth = depth;
    return out;
  }
  const Vec3 ray = k.inverse_matrix() * p.hom();
  const Vec3 transformed = pose.R * (depth * ray) + pose.t;
  const Vec3 h = k.matrix() * transformed;
  out.projected_depth = h.z();
  if (h.z() <= 1e-9) {
    out.valid = false;
    return out;
  }
  out.coord = Vec2(h.x() / h.z(), h.y() / h.z());
  out.valid = true;
  return out;
}

SampleResult bilinear_sample(const ImageBuffer &img, const Vec2 &coord) {
  if (!std::isfinite(coord.x()) || !std::isfinite(coord.y())) {
    throw Error(ErrorCode::invalid_input, "non-finite sample coordinate");
  }
  SampleResult out;
  const BilinearCell c = locate(coord.x(), coord.y(), img.width, img.height);
  if (!c.in_bounds) return out;
  const double w00 = (1.0 - c.fx) * (1.0 - c.fy);
  const double w10 = c.fx * (1.0 - c.fy);
  const double w01 = (1.0 - c.fx) * c.fy;
  const double w11 = c.fx * c.fy;
  for (int ch = 0; ch < img.channels; ++ch) {
    out.value[ch] = w00 * img.at(c.x0, c.y0, ch) + w10 * img.at(c.x1, c.y0, ch) +
                    w01 * img.at(c.x0, c.y1, ch) + w11 * img.at(c.x1, c.y1, ch);
  }
  out.valid = true;
  return out;
}

SampleGradResult bilinear_sample_with_grad(const ImageBuffer &img,
                                           const Vec2 &coord) {
  SampleGradResult out;
  const BilinearCell c = locate(coord.x(), coord.y(), img.width, img.height);
  if (!c.in_bounds) return out;
  for (int ch = 0; ch < img.channels; ++ch) {
    const double v00 = img.at(c.x0, c.y0, ch);
    const double v10 = img.at(c.x1, c.y0, ch);
    const double v01 = img.at(c.x0, c.y1, ch);
    const double v11 = img.at(c.x1, c.y1, ch);
    out.value[ch] = (1.0 - c.fx) * (1.0 - c.fy) * v00 + c.fx * (1.0 - c.fy) * v10 +
                    (1.0 - c.fx) * c.fy * v01 + c.fx * c.fy * v11;
    out.ddx[ch] = (1.0 - c.fy) * (v10 - v00) + c.fy * (v11 - v01);
    out.ddy[ch] = (1.0 - c.fx) * (v01 - v00) + c.fx * (v11 - v10);
  }
  out.valid = true;
  return out;
}

SynthesisResult synthesize_view(const ImageBuffer &source,
                                const DepthMap &target_depth,
                                const PoseSE3 &pose, const CameraIntrinsics &k) {
  if (source.width != target_depth.width || source.height != target_depth.height) {
    throw Error(ErrorCode::shape_mismatch,
                "source image and target depth resolutions differ");
  }
  SynthesisResult out;
  out.warped = ImageBuffer::create(source.width, source.height, source.channels);
  out.mask = PixelMask::create(source.width, source.height);
  out.warp = WarpField::create(source.width, source.height);

  for (int y = 0; y < source.height; ++y) {
    for (int x = 0; x < source.width; ++x) {
      if (!target_depth.is_valid(x, y)) continue;
      const WarpResult w = warp_pixel(k, pose, target_depth.at(x, y),
                                      PixelCoord{static_cast<double>(x),
                                                 static_cast<double>(y)});
      if (!w.valid) continue;
      const SampleResult s = bilinear_sample(source, w.coord);
      out.warp.set(x, y, w.coord, s.valid);
      if (!s.valid) continue;
      for (int ch = 0; ch < source.channels; ++ch) {
        out.warped.at(x, y, ch) = s.value[ch];
      }
      out.mask.set(x, y, true);
    }
  }
  return out;
}

namespace {

template <typename Map>
Map upsample_map(const Map &d, const std::vector<double> &values, int target_w,
                 int target_h) {
  if (target_w < d.width || target_h < d.height) {
    throw Error(ErrorCode::shape_mismatch,
                "upsampling target must be at least the source resolution");
  }
  Map out = Map::create(target_w, target_h);
  for (int y = 0; y < target_h; ++y) {
    const double sy = resample_coord(y, target_h, d.height);
    for (int x = 0; x < target_w; ++x) {
      const double sx = resample_coord(x, target_w, d.width);
      const BilinearCell c = locate(sx, sy, d.width, d.height);
      const double w00 = (1.0 - c.fx) * (1.0 - c.fy);
      const double w10 = c.fx * (1.0 - c.fy);
      const double w01 = (1.0 - c.fx) * c.fy;
      const double w11 = c.fx * c.fy;
      auto ok = [&](int xx, int yy) {
        return d.valid[static_cast<size_t>(yy) * d.width + xx] != 0;
      };
      bool valid = true;
      if (w00 > 0.0) valid = valid && ok(c.x0, c.y0);
      if (w10 > 0.0) valid = valid && ok(c.x1, c.y0);
      if (w01 > 0.0) valid = valid && ok(c.x0, c.y1);
      if (w11 > 0.0) valid = valid && ok(c.x1, c.y1);
      if (!valid) continue;
      auto val = [&](int xx, int yy) {
        return values[static_cast<size_t>(yy) * d.width + xx];
      };
      const double v = w00 * val(c.x0, c.y0) + w10 * val(c.x1, c.y0) +
                       w01 * val(c.x0, c.y1) + w11 * val(c.x1, c.y1);
      const size_t i = static_cast<size_t>(y) * target_w + x;
      if constexpr (std::is_same_v<Map, DepthMap>) {
        out.depth[i] = v;
      } else {
        out.inv_depth[i] = v;
      }
      out.valid[i] = 1;
    }
  }
  return out;
}

}  // namespace

DepthMap upsample_depth(const DepthMap &d, int target_w, int target_h) {
  return upsample_map(d, d.depth, target_w, target_h);
}

InverseDepthMap upsample_inverse_depth(const InverseDepthMap &d, int target_w,
                                       int target_h) {
  return upsample_map(d, d.inv_depth, target_w, target_h);
}

InverseDepthMap downsample_inverse_depth_2x(const InverseDepthMap &d) {
  const int w = d.width / 2;
  const int h = d.height / 2;
  if (w < 1 || h < 1) {
    throw Error(ErrorCode::shape_mismatch, "map too small to downsample");
  }
  InverseDepthMap out = InverseDepthMap::create(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int sx = 2 * x;
      const int sy = 2 * y;
      if (d.is_valid(sx, sy) && d.is_valid(sx + 1, sy) && d.is_valid(sx, sy + 1) &&
          d.is_valid(sx + 1, sy + 1)) {
        const double v = 0.25 * (d.at(sx, sy) + d.at(sx + 1, sy) +
                                 d.at(sx, sy + 1) + d.at(sx + 1, sy + 1));
        out.inv_depth[static_cast<size_t>(y) * w + x] = v;
        out.valid[static_cast<size_t>(y) * w + x] = 1;
      }
    }
  }
  return out;
}

ImageBuffer downsample_image_2x(const ImageBuffer &img) {
  const int w = img.width / 2;
  const int h = img.height / 2;
  if (w < 1 || h < 1) {
    throw Error(ErrorCode::shape_mismatch, "image too small to downsample");
  }
  ImageBuffer out = ImageBuffer::create(w, h, img.channels);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int ch = 0; ch < img.channels; ++ch) {
        out.at(x, y, ch) = 0.25 * (img.at(2 * x, 2 * y, ch) +
                                   img.at(2 * x + 1, 2 * y, ch) +
                                   img.at(2 * x, 2 * y + 1, ch) +
                                   img.at(2 * x + 1, 2 * y + 1, ch));
      }
    }
  }
  return out;
}

void upsample_inverse_depth_adjoint(const std::vector<double> &grad_out,
                                    int out_w, int out_h, int src_w, int src_h,
                                    std::vector<double> *grad_src) {
  grad_src->assign(static_cast<size_t>(src_w) * src_h, 0.0);
  for (int y = 0; y < out_h; ++y) {
    const double sy = resample_coord(y, out_h, src_h);
    for (int x = 0; x < out_w; ++x) {
      const double g = grad_out[static_cast<size_t>(y) * out_w + x];
      if (g == 0.0) continue;
      const double sx = resample_coord(x, out_w, src_w);
      const BilinearCell c = locate(sx, sy, src_w, src_h);
      auto add = [&](int xx, int yy, double w) {
        (*grad_src)[static_cast<size_t>(yy) * src_w + xx] += w * g;
      };
      add(c.x0, c.y0, (1.0 - c.fx) * (1.0 - c.fy));
      add(c.x1, c.y0, c.fx * (1.0 - c.fy));
      add(c.x0, c.y1, (1.0 - c.fx) * c.fy);
      add(c.x1, c.y1, c.fx * c.fy);
    }
  }
}

void downsample_inverse_depth_2x_adjoint(const std::vector<double> &grad_out,
                                         int src_w, int src_h,
                                         std::vector<double> *grad_src) {
  const int w = src_w / 2;
  const int h = src_h / 2;
  grad_src->assign(static_cast<size_t>(src_w) * src_h, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double g = 0.25 * grad_out[static_cast<size_t>(y) * w + x];
      (*grad_src)[static_cast<size_t>(2 * y) * src_w + 2 * x] += g;
      (*grad_src)[static_cast<size_t>(2 * y) * src_w + 2 * x + 1] += g;
      (*grad_src)[static_cast<size_t>(2 * y + 1) * src_w + 2 * x] += g;
      (*grad_src)[static_cast<size_t>(2 * y + 1) * src_w + 2 * x + 1] += g;
    }
  }
}

InverseDepthMap normalize_inverse_depth(const InverseDepthMap &d) {
  double sum = 0.0;
  int count = 0;
  for (size_t i = 0; i < d.inv_depth.size(); ++i) {
    if (d.valid[i]) {
      sum += d.inv_depth[i];
      ++count;
    }
  }
  if (count == 0) {
    throw Error(ErrorCode::empty_input, "no valid pixels to normalize");
  }
  const double mean = sum / count;
  InverseDepthMap out = d;
  for (size_t i = 0; i < out.inv_depth.size(); ++i) {
    if (out.valid[i]) out.inv_depth[i] /= mean;
  }
  return out;
}

WarpJacobian warp_jacobian(const CameraIntrinsics &k, const PoseSE3 &pose,
                           double depth, const PixelCoord &p) {
  const WarpResult w = warp_pixel(k, pose, depth, p);
  if (!w.valid) {
    throw Error(ErrorCode::invalid_warp, "warp invalid at requested state");
  }
  const Mat3 km = k.matrix();
  const Vec3 ray = k.inverse_matrix() * p.hom();
  const Vec3 transformed = pose.R * (depth * ray) + pose.t;
  const Vec3 h = km * transformed;

  Eigen::Matrix<double, 2, 3> dehomog;
  const double inv_z = 1.0 / h.z();
  dehomog << inv_z, 0.0, -h.x() * inv_z * inv_z,  //
      0.0, inv_z, -h.y() * inv_z * inv_z;

  WarpJacobian out;
  out.d_depth = dehomog * (km * (pose.R * ray));
  Eigen::Matrix<double, 3, 6> dx_dpose;
  dx_dpose.leftCols<3>() = -skew_symmetric(transformed);
  dx_dpose.rightCols<3>() = Mat3::Identity();
  out.d_pose = dehomog * km * dx_dpose;
  return out;
}

}  // namespace epigeo
