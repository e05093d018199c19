#pragma once

#include <array>

#include "epigeo/image.hpp"

namespace epigeo {

// Result of projecting one target pixel into the source view.
struct WarpResult {
  Vec2 coord = Vec2::Zero();
  bool valid = false;
  double projected_depth = 0.0;
};

// p_hat = dehomog(K (R D K^-1 p + t)). Invalid when the projected depth is
// <= 1e-9. The identity pose short-circuits to p exactly.
WarpResult warp_pixel(const CameraIntrinsics &k, const PoseSE3 &pose,
                      double depth, const PixelCoord &p);

struct SampleResult {
  std::array<double, 3> value{};
  bool valid = false;
};

struct SampleGradResult {
  std::array<double, 3> value{};
  std::array<double, 3> ddx{};
  std::array<double, 3> ddy{};
  bool valid = false;
};

// Four-neighbor interpolation; weights are proportional to proximity and sum
// to 1. Out-of-bounds coordinates are flagged invalid, not clamped.
SampleResult bilinear_sample(const ImageBuffer &img, const Vec2 &coord);
// Also returns the in-cell spatial derivative of the sampled value.
SampleGradResult bilinear_sample_with_grad(const ImageBuffer &img,
                                           const Vec2 &coord);

struct SynthesisResult {
  ImageBuffer warped;
  PixelMask mask;
  WarpField warp;
};

// Warps the source view into the target frame using the target depth.
SynthesisResult synthesize_view(const ImageBuffer &source,
                                const DepthMap &target_depth,
                                const PoseSE3 &pose, const CameraIntrinsics &k);

// Bilinear upsampling; a target pixel is valid only when every source pixel
// contributing with nonzero weight is valid.
DepthMap upsample_depth(const DepthMap &d, int target_w, int target_h);
InverseDepthMap upsample_inverse_depth(const InverseDepthMap &d, int target_w,
                                       int target_h);

// 2x2 box average; the output pixel is valid only when all four inputs are.
InverseDepthMap downsample_inverse_depth_2x(const InverseDepthMap &d);
ImageBuffer downsample_image_2x(const ImageBuffer &img);

// Adjoints of the all-valid resampling operators, used by gradient code.
// Shapes refer to the corresponding forward call.
void upsample_inverse_depth_adjoint(const std::vector<double> &grad_out,
                                    int out_w, int out_h, int src_w, int src_h,
                                    std::vector<double> *grad_src);
void downsample_inverse_depth_2x_adjoint(const std::vector<double> &grad_out,
                                         int src_w, int src_h,
                                         std::vector<double> *grad_src);

// Rescales so the mean over valid pixels is exactly 1.
InverseDepthMap normalize_inverse_depth(const InverseDepthMap &d);

struct WarpJacobian {
  Vec2 d_depth = Vec2::Zero();
  // Columns: rotation increment (axis-angle, left-composed), then
  // translation increment.
  Eigen::Matrix<double, 2, 6> d_pose = Eigen::Matrix<double, 2, 6>::Zero();
};

// Analytic derivative of the warped coordinate with respect to depth and a
// local pose perturbation R <- Exp(w) R, t <- Exp(w) t + dt.
WarpJacobian warp_jacobian(const CameraIntrinsics &k, const PoseSE3 &pose,
                           double depth, const PixelCoord &p);

}  // namespace epigeo
