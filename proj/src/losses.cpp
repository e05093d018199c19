#include "epigeo/losses.hpp"

#include <cmath>

namespace epigeo {

namespace {

constexpr double kSsimC1 = 0.01 * 0.01;
constexpr double kSsimC2 = 0.03 * 0.03;

void check_same_shape(const ImageBuffer &a, const ImageBuffer &b) {
  if (!a.same_shape(b)) {
    throw Error(ErrorCode::shape_mismatch, "image resolutions differ");
  }
}

void check_mask_shape(const ImageBuffer &a, const PixelMask &mask) {
  if (a.width != mask.width || a.height != mask.height) {
    throw Error(ErrorCode::shape_mismatch, "mask resolution differs");
  }
}

double abs_diff_channel_mean(const ImageBuffer &a, const ImageBuffer &b, int x,
                             int y) {
  double acc = 0.0;
  for (int c = 0; c < a.channels; ++c) {
    acc += std::abs(a.at(x, y, c) - b.at(x, y, c));
  }
  return acc / a.channels;
}

}  // namespace

void LossWeights::validate() const {
  if (lambda_smooth < 0.0 || lambda_ssim < 0.0 || lambda_depth < 0.0) {
    throw Error(ErrorCode::invalid_input, "loss weights must be non-negative");
  }
  if (levels < 1 || levels > 6) {
    throw Error(ErrorCode::invalid_input, "levels must be in [1, 6]");
  }
}

ScalarLoss photometric_loss(const ImageBuffer &target, const ImageBuffer &warped,
                            const PixelMask &mask) {
  check_same_shape(target, warped);
  check_mask_shape(target, mask);
  ScalarLoss out;
  out.map.assign(target.pixel_count(), 0.0);
  double sum = 0.0;
  int count = 0;
  for (int y = 0; y < target.height; ++y) {
    for (int x = 0; x < target.width; ++x) {
      if (!mask.is_valid(x, y)) continue;
      const double d = abs_diff_channel_mean(target, warped, x, y);
      out.map[static_cast<size_t>(y) * target.width + x] = d;
      sum += d;
      ++count;
    }
  }
  if (count == 0) {
    throw Error(ErrorCode::empty_input, "photometric loss over an empty mask");
  }
  out.value = sum / count;
  return out;
}

EpipolarWeightMap epipolar_weight_map(const EssentialMatrix &e,
                                      const WarpField &warp_field,
                                      const CameraIntrinsics &k,
                                      double residual_clamp) {
  EpipolarWeightMap out;
  out.width = warp_field.width;
  out.height = warp_field.height;
  out.weight.assign(static_cast<size_t>(out.width) * out.height, 1.0);
  out.valid.assign(out.weight.size(), 0);

  const Mat3 ki = k.inverse_matrix();
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      if (!warp_field.is_valid(x, y)) continue;
      const Vec3 p1 = ki * Vec3(x, y, 1.0);
      const Vec2 &c = warp_field.coord(x, y);
      const Vec3 p2 = ki * Vec3(c.x(), c.y(), 1.0);
      const double r = std::abs(p2.dot(e.m * p1));
      const size_t i = static_cast<size_t>(y) * out.width + x;
      out.weight[i] = std::exp(std::min(r, residual_clamp));
      out.valid[i] = 1;
    }
  }
  return out;
}

ScalarLoss weighted_photometric_loss(const ImageBuffer &target,
                                     const ImageBuffer &warped,
                                     const PixelMask &mask,
                                     const EpipolarWeightMap &weights) {
  check_same_shape(target, warped);
  check_mask_shape(target, mask);
  if (weights.width != target.width || weights.height != target.height) {
    throw Error(ErrorCode::shape_mismatch, "weight map resolution differs");
  }
  ScalarLoss out;
  out.map.assign(target.pixel_count(), 0.0);
  double sum = 0.0;
  int count = 0;
  for (int y = 0; y < target.height; ++y) {
    for (int x = 0; x < target.width; ++x) {
      if (!mask.is_valid(x, y) || !weights.is_valid(x, y)) continue;
      const double d = abs_diff_channel_mean(target, warped, x, y) * weights.at(x, y);
      out.map[static_cast<size_t>(y) * target.width + x] = d;
      sum += d;
      ++count;
    }
  }
  if (count == 0) {
    throw Error(ErrorCode::empty_input,
                "weighted photometric loss over an empty mask");
  }
  out.value = sum / count;
  return out;
}

double depth_consistency_loss(std::span<const DepthMap> depths, bool use_inverse) {
  if (depths.size() < 2) {
    throw Error(ErrorCode::insufficient_data,
                "depth consistency needs at least two maps");
  }
  const int w = depths[0].width;
  const int h = depths[0].height;
  for (const DepthMap &d : depths) {
    if (d.width != w || d.height != h) {
      throw Error(ErrorCode::shape_mismatch, "depth map resolutions differ");
    }
  }
  double sum = 0.0;
  int count = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool all_valid = true;
      for (const DepthMap &d : depths) all_valid = all_valid && d.is_valid(x, y);
      if (!all_valid) continue;
      ++count;
      for (size_t i = 0; i < depths.size(); ++i) {
        for (size_t j = i + 1; j < depths.size(); ++j) {
          const double a = use_inverse ? 1.0 / depths[i].at(x, y) : depths[i].at(x, y);
          const double b = use_inverse ? 1.0 / depths[j].at(x, y) : depths[j].at(x, y);
          sum += std::abs(a - b);
        }
      }
    }
  }
  if (count == 0) {
    throw Error(ErrorCode::empty_input, "no jointly valid pixels");
  }
  return sum / count;
}

namespace {

struct StencilTerms {
  double xx = 0.0, yy = 0.0, xy = 0.0;
};

// Unnormalized second-order stencils on a unit grid.
template <typename Getter>
StencilTerms second_order(Getter v, int x, int y) {
  StencilTerms t;
  t.xx = v(x - 1, y) - 2.0 * v(x, y) + v(x + 1, y);
  t.yy = v(x, y - 1) - 2.0 * v(x, y) + v(x, y + 1);
  t.xy = v(x + 1, y + 1) - v(x, y + 1) - v(x + 1, y) + v(x, y);
  return t;
}

}  // namespace

ScalarLoss smoothness_loss(const InverseDepthMap &inv_depth,
                           const ImageBuffer &image) {
  if (inv_depth.width != image.width || inv_depth.height != image.height) {
    throw Error(ErrorCode::shape_mismatch, "depth and image resolutions differ");
  }
  if (image.width < 3 || image.height < 3) {
    throw Error(ErrorCode::shape_mismatch, "image smaller than 3x3");
  }
  ScalarLoss out;
  out.map.assign(inv_depth.pixel_count(), 0.0);
  double sum = 0.0;
  int count = 0;
  for (int y = 1; y < image.height - 1; ++y) {
    for (int x = 1; x < image.width - 1; ++x) {
      bool neighborhood_valid = true;
      for (int dy = -1; dy <= 1 && neighborhood_valid; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (!inv_depth.is_valid(x + dx, y + dy)) {
            neighborhood_valid = false;
            break;
          }
        }
      }
      if (!neighborhood_valid) continue;

      const StencilTerms d = second_order(
          [&](int xx, int yy) { return inv_depth.at(xx, yy); }, x, y);
      const StencilTerms img = second_order(
          [&](int xx, int yy) {
            double acc = 0.0;
            for (int c = 0; c < image.channels; ++c) acc += image.at(xx, yy, c);
            return acc / image.channels;
          },
          x, y);

      const double term = std::abs(d.xx) * std::exp(-std::abs(img.xx)) +
                          std::abs(d.yy) * std::exp(-std::abs(img.yy)) +
                          2.0 * std::abs(d.xy) * std::exp(-std::abs(img.xy));
      out.map[static_cast<size_t>(y) * image.width + x] = term;
      sum += term;
      ++count;
    }
  }
  out.value = count > 0 ? sum / count : 0.0;
  return out;
}

SsimMap ssim_map(const ImageBuffer &a, const ImageBuffer &b,
                 const PixelMask *mask) {
  check_same_shape(a, b);
  if (a.width < 3 || a.height < 3) {
    throw Error(ErrorCode::shape_mismatch, "image smaller than the SSIM window");
  }
  if (mask != nullptr) check_mask_shape(a, *mask);

  SsimMap out;
  out.width = a.width;
  out.height = a.height;
  out.value.assign(a.pixel_count(), 0.0);
  out.valid = PixelMask::create(a.width, a.height);

  for (int y = 1; y < a.height - 1; ++y) {
    for (int x = 1; x < a.width - 1; ++x) {
      if (mask != nullptr) {
        bool window_ok = true;
        for (int dy = -1; dy <= 1 && window_ok; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (!mask->is_valid(x + dx, y + dy)) {
              window_ok = false;
              break;
            }
          }
        }
        if (!window_ok) continue;
      }

      double ssim_acc = 0.0;
      for (int c = 0; c < a.channels; ++c) {
        double mu_a = 0.0, mu_b = 0.0, aa = 0.0, bb = 0.0, ab = 0.0;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const double va = a.at(x + dx, y + dy, c);
            const double vb = b.at(x + dx, y + dy, c);
            mu_a += va;
            mu_b += vb;
            aa += va * va;
            bb += vb * vb;
            ab += va * vb;
          }
        }
        mu_a /= 9.0;
        mu_b /= 9.0;
        const double var_a = aa / 9.0 - mu_a * mu_a;
        const double var_b = bb / 9.0 - mu_b * mu_b;
        const double cov = ab / 9.0 - mu_a * mu_b;
        const double num = (2.0 * mu_a * mu_b + kSsimC1) * (2.0 * cov + kSsimC2);
        const double den =
            (mu_a * mu_a + mu_b * mu_b + kSsimC1) * (var_a + var_b + kSsimC2);
        ssim_acc += num / den;
      }
      out.value[static_cast<size_t>(y) * a.width + x] = ssim_acc / a.channels;
      out.valid.set(x, y, true);
    }
  }
  return out;
}

ScalarLoss ssim_loss(const ImageBuffer &target, const ImageBuffer &warped,
                     const PixelMask &mask) {
  check_same_shape(target, warped);
  check_mask_shape(target, mask);
  const SsimMap s = ssim_map(target, warped, &mask);
  ScalarLoss out;
  out.map.assign(target.pixel_count(), 0.0);
  double sum = 0.0;
  int count = 0;
  for (int y = 0; y < target.height; ++y) {
    for (int x = 0; x < target.width; ++x) {
      if (!s.valid.is_valid(x, y)) continue;
      const double v = (1.0 - s.value[static_cast<size_t>(y) * target.width + x]) / 2.0;
      out.map[static_cast<size_t>(y) * target.width + x] = v;
      sum += v;
      ++count;
    }
  }
  if (count == 0) {
    throw Error(ErrorCode::empty_input, "SSIM loss over an empty mask");
  }
  out.value = sum / count;
  return out;
}

LossReport total_loss(const ImageBuffer &target,
                      std::span<const ImageBuffer> sources,
                      std::span<const DepthMap> depths,
                      std::span<const PoseSE3> poses,
                      std::span<const EssentialMatrix> essentials,
                      const CameraIntrinsics &k, const LossWeights &weights,
                      double residual_clamp) {
  weights.validate();
  if (sources.empty()) {
    throw Error(ErrorCode::insufficient_data, "at least one source view required");
  }
  if (sources.size() != depths.size() || sources.size() != poses.size() ||
      sources.size() != essentials.size()) {
    throw Error(ErrorCode::shape_mismatch,
                "sources, depths, poses and essentials must align");
  }
  for (const ImageBuffer &s : sources) check_same_shape(target, s);
  for (const DepthMap &d : depths) {
    if (d.width != target.width || d.height != target.height) {
      throw Error(ErrorCode::shape_mismatch, "depth resolution differs");
    }
  }

  const int w = target.width;
  const int h = target.height;
  const size_t n_sources = sources.size();

  LossReport report;
  report.map_width = w;
  report.map_height = h;
  report.loss_map.assign(static_cast<size_t>(w) * h, 0.0);

  // Per-source inverse-depth pyramids.
  std::vector<InverseDepthMap> pyramid_base;
  pyramid_base.reserve(n_sources);
  for (const DepthMap &d : depths) pyramid_base.push_back(to_inverse_depth(d));

  for (int level = 0; level < weights.levels; ++level) {
    LevelTerms terms;
    std::vector<DepthMap> level_depths;
    level_depths.reserve(n_sources);

    for (size_t s = 0; s < n_sources; ++s) {
      const InverseDepthMap level_inv =
          upsample_inverse_depth(pyramid_base[s], w, h);
      level_depths.push_back(to_depth(level_inv));

      const SynthesisResult synth =
          synthesize_view(sources[s], level_depths.back(), poses[s], k);
      const EpipolarWeightMap wmap =
          epipolar_weight_map(essentials[s], synth.warp, k, residual_clamp);
      const ScalarLoss warp_term = weighted_photometric_loss(
          target, synth.warped, synth.mask, wmap);
      terms.warp += warp_term.value;
      for (size_t i = 0; i < warp_term.map.size(); ++i) {
        report.loss_map[i] += warp_term.map[i];
      }

      terms.smooth += smoothness_loss(level_inv, target).value;
      terms.ssim += ssim_loss(target, synth.warped, synth.mask).value;
    }

    if (n_sources >= 2) {
      terms.depth += depth_consistency_loss(level_depths);
    }

    report.per_level.push_back(terms);
    report.total += terms.warp + weights.lambda_smooth * terms.smooth +
                    weights.lambda_ssim * terms.ssim +
                    weights.lambda_depth * terms.depth;

    if (level + 1 < weights.levels) {
      for (size_t s = 0; s < n_sources; ++s) {
        pyramid_base[s] = downsample_inverse_depth_2x(pyramid_base[s]);
      }
    }
  }
  return report;
}

}  // namespace epigeo
