#pragma once

#include <span>
#include <vector>

#include "epigeo/image.hpp"
#include "epigeo/warp.hpp"

namespace epigeo {

struct LossWeights {
  double lambda_smooth = 0.2;
  double lambda_ssim = 0.7;
  double lambda_depth = 0.5;
  int levels = 4;

  void validate() const;
};

struct LevelTerms {
  double warp = 0.0;
  double smooth = 0.0;
  double ssim = 0.0;
  double depth = 0.0;
};

struct LossReport {
  std::vector<LevelTerms> per_level;
  double total = 0.0;
  // Full-resolution weighted photometric contribution summed over levels and
  // sources; diagnostic only.
  int map_width = 0;
  int map_height = 0;
  std::vector<double> loss_map;
};

// Per-pixel multiplier exp(|p2~^T E p1~|); valid weights are >= 1.
struct EpipolarWeightMap {
  int width = 0;
  int height = 0;
  std::vector<double> weight;
  std::vector<std::uint8_t> valid;

  double at(int x, int y) const {
    return weight[static_cast<size_t>(y) * width + x];
  }
  bool is_valid(int x, int y) const {
    return valid[static_cast<size_t>(y) * width + x] != 0;
  }
};

struct ScalarLoss {
  double value = 0.0;
  std::vector<double> map;  // per-pixel contribution, zero where invalid
};

// Mean absolute intensity difference over valid pixels (channel mean for
// color images). N is the count of valid pixels.
ScalarLoss photometric_loss(const ImageBuffer &target, const ImageBuffer &warped,
                            const PixelMask &mask);

// The exponent is clamped at `residual_clamp` to bound gross outliers.
EpipolarWeightMap epipolar_weight_map(const EssentialMatrix &e,
                                      const WarpField &warp_field,
                                      const CameraIntrinsics &k,
                                      double residual_clamp = 10.0);

ScalarLoss weighted_photometric_loss(const ImageBuffer &target,
                                     const ImageBuffer &warped,
                                     const PixelMask &mask,
                                     const EpipolarWeightMap &weights);

// Mean over jointly-valid pixels of all unordered pairwise |Di - Dj|. The
// normalizer is the pixel count only, not the pair count. Set use_inverse to
// compare 1/D instead of D.
double depth_consistency_loss(std::span<const DepthMap> depths,
                              bool use_inverse = false);

// Second-order edge-aware smoothness: |d_ij d| exp(-|d_ij I|) summed over
// ij in {x,y}^2 and averaged over interior pixels whose 3x3 neighborhood is
// valid. Stencils: [1,-2,1] for xx/yy, forward-difference composition for
// the mixed term (counted twice).
ScalarLoss smoothness_loss(const InverseDepthMap &inv_depth,
                           const ImageBuffer &image);

struct SsimMap {
  int width = 0;
  int height = 0;
  std::vector<double> value;  // in [-1, 1] where valid
  PixelMask valid;
};

// Windowed SSIM, 3x3 uniform window, C1 = 0.01^2, C2 = 0.03^2 on [0, 1]
// intensities, channel mean for color. Valid on the interior where the whole
// window is inside the image (and mask-valid when a mask is given).
SsimMap ssim_map(const ImageBuffer &a, const ImageBuffer &b,
                 const PixelMask *mask = nullptr);

// Mean over valid pixels of (1 - SSIM)/2, in [0, 1].
ScalarLoss ssim_loss(const ImageBuffer &target, const ImageBuffer &warped,
                     const PixelMask &mask);

// Multi-scale total, Eq-8 style: per level the per-source inverse depth is
// box-downsampled level times, bilinearly upsampled back to full resolution,
// and all four terms are evaluated at full resolution. The epipolar residual
// only enters through the weight map, never as an additive term.
LossReport total_loss(const ImageBuffer &target,
                      std::span<const ImageBuffer> sources,
                      std::span<const DepthMap> depths,
                      std::span<const PoseSE3> poses,
                      std::span<const EssentialMatrix> essentials,
                      const CameraIntrinsics &k, const LossWeights &weights,
                      double residual_clamp = 10.0);

}  // namespace epigeo
