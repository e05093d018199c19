#include "epigeo/refine.hpp"

#include <cmath>

namespace epigeo {

namespace {

using Vec6 = Eigen::Matrix<double, 6, 1>;

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Subgradient of |x| with a dead zone: second differences of an exactly
// planar inverse depth sit at the kink (|x| ~ 1e-17) and their arbitrary
// signs would otherwise swamp the real gradient.
double sign_dead(double v, double eps = 1e-12) {
  return v > eps ? 1.0 : (v < -eps ? -1.0 : 0.0);
}

PoseSE3 apply_increment(const PoseSE3 &pose, const Vec6 &eps) {
  const Mat3 dr = rotation_exp(eps.head<3>());
  return {dr * pose.R, dr * pose.t + eps.tail<3>()};
}

struct EvalInputs {
  const ImageBuffer &target;
  std::span<const ImageBuffer> sources;
  std::span<const PoseSE3> poses;
  std::span<const EssentialMatrix> essentials;
  const CameraIntrinsics &k;
  const LossWeights &weights;
  bool epipolar_weighting;
  double residual_clamp;
};

void check_inputs(const EvalInputs &in, const InverseDepthMap &inv_depth) {
  in.weights.validate();
  if (in.sources.empty()) {
    throw Error(ErrorCode::insufficient_data, "at least one source view required");
  }
  if (in.sources.size() != in.poses.size() ||
      (in.epipolar_weighting && in.sources.size() != in.essentials.size())) {
    throw Error(ErrorCode::shape_mismatch, "sources, poses and essentials must align");
  }
  for (const ImageBuffer &s : in.sources) {
    if (!in.target.same_shape(s)) {
      throw Error(ErrorCode::shape_mismatch, "source resolution differs");
    }
  }
  if (inv_depth.width != in.target.width || inv_depth.height != in.target.height) {
    throw Error(ErrorCode::shape_mismatch, "inverse depth resolution differs");
  }
}

// SSIM window statistics shared by the forward and backward passes.
struct SsimWindow {
  double mu_a = 0.0, mu_b = 0.0, var_a = 0.0, var_b = 0.0, cov = 0.0;
  double ssim = 0.0;
};

SsimWindow ssim_window(const ImageBuffer &a, const ImageBuffer &b, int x, int y,
                       int c) {
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  SsimWindow w;
  double aa = 0.0, bb = 0.0, ab = 0.0;
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      const double va = a.at(x + dx, y + dy, c);
      const double vb = b.at(x + dx, y + dy, c);
      w.mu_a += va;
      w.mu_b += vb;
      aa += va * va;
      bb += vb * vb;
      ab += va * vb;
    }
  }
  w.mu_a /= 9.0;
  w.mu_b /= 9.0;
  w.var_a = aa / 9.0 - w.mu_a * w.mu_a;
  w.var_b = bb / 9.0 - w.mu_b * w.mu_b;
  w.cov = ab / 9.0 - w.mu_a * w.mu_b;
  const double num = (2.0 * w.mu_a * w.mu_b + c1) * (2.0 * w.cov + c2);
  const double den =
      (w.mu_a * w.mu_a + w.mu_b * w.mu_b + c1) * (w.var_a + w.var_b + c2);
  w.ssim = num / den;
  return w;
}

// Single forward (and optional backward) pass of the refine objective.
LossReport evaluate(const EvalInputs &in, const InverseDepthMap &inv_depth,
                    LossGradients *grads) {
  check_inputs(in, inv_depth);
  const int w = in.target.width;
  const int h = in.target.height;
  const int channels = in.target.channels;
  const size_t n_pixels = static_cast<size_t>(w) * h;
  const size_t n_sources = in.sources.size();

  LossReport report;
  report.map_width = w;
  report.map_height = h;
  report.loss_map.assign(n_pixels, 0.0);

  if (grads != nullptr) {
    grads->d_inv_depth.assign(n_pixels, 0.0);
    grads->d_pose.assign(n_sources, Vec6::Zero());
  }

  // Inverse-depth pyramid; level l holds the map downsampled l times.
  std::vector<InverseDepthMap> pyramid;
  pyramid.push_back(inv_depth);
  for (int l = 1; l < in.weights.levels; ++l) {
    pyramid.push_back(downsample_inverse_depth_2x(pyramid.back()));
  }

  const Mat3 ki = in.k.inverse_matrix();
  const Mat3 ki_t = ki.transpose();

  for (int level = 0; level < in.weights.levels; ++level) {
    const InverseDepthMap level_inv = upsample_inverse_depth(pyramid[level], w, h);
    const DepthMap level_depth = to_depth(level_inv);
    std::vector<double> grad_level(grads != nullptr ? n_pixels : 0, 0.0);

    LevelTerms terms;
    for (size_t s = 0; s < n_sources; ++s) {
      const SynthesisResult synth =
          synthesize_view(in.sources[s], level_depth, in.poses[s], in.k);
      const int n_valid = synth.mask.valid_count();
      if (n_valid == 0) {
        throw Error(ErrorCode::degenerate_state,
                    "warp produced no valid pixels");
      }

      // --- warp term (Eq-6 style weighted L1, or plain L1) ---------------
      std::vector<double> weight(n_pixels, 1.0);
      std::vector<double> residual_signed(n_pixels, 0.0);
      double warp_sum = 0.0;
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          if (!synth.mask.is_valid(x, y)) continue;
          const size_t i = static_cast<size_t>(y) * w + x;
          double we = 1.0;
          if (in.epipolar_weighting) {
            const Vec3 p1 = ki * Vec3(x, y, 1.0);
            const Vec2 &c = synth.warp.coord(x, y);
            const Vec3 p2 = ki * Vec3(c.x(), c.y(), 1.0);
            const double r = p2.dot(in.essentials[s].m * p1);
            residual_signed[i] = r;
            we = std::exp(std::min(std::abs(r), in.residual_clamp));
          }
          weight[i] = we;
          double m = 0.0;
          for (int c = 0; c < channels; ++c) {
            m += std::abs(in.target.at(x, y, c) - synth.warped.at(x, y, c));
          }
          m /= channels;
          const double contrib = m * we;
          warp_sum += contrib;
          report.loss_map[i] += contrib;
        }
      }
      terms.warp += warp_sum / n_valid;

      // --- SSIM term ------------------------------------------------------
      int ssim_count = 0;
      double ssim_sum = 0.0;
      auto window_ok = [&](int x, int y) {
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (!synth.mask.is_valid(x + dx, y + dy)) return false;
          }
        }
        return true;
      };
      // Window stats are reused by the backward pass.
      std::vector<SsimWindow> ssim_cache(
          grads != nullptr ? n_pixels * channels : 0);
      std::vector<std::uint8_t> ssim_ok(grads != nullptr ? n_pixels : 0, 0);
      for (int y = 1; y < h - 1; ++y) {
        for (int x = 1; x < w - 1; ++x) {
          if (!window_ok(x, y)) continue;
          double acc = 0.0;
          for (int c = 0; c < channels; ++c) {
            const SsimWindow win = ssim_window(in.target, synth.warped, x, y, c);
            if (grads != nullptr) {
              ssim_cache[(static_cast<size_t>(y) * w + x) * channels + c] = win;
            }
            acc += win.ssim;
          }
          if (grads != nullptr) ssim_ok[static_cast<size_t>(y) * w + x] = 1;
          ssim_sum += (1.0 - acc / channels) / 2.0;
          ++ssim_count;
        }
      }
      if (ssim_count == 0) {
        throw Error(ErrorCode::degenerate_state, "SSIM mask is empty");
      }
      terms.ssim += ssim_sum / ssim_count;

      // --- backward through the warped image ------------------------------
      if (grads != nullptr) {
        // dL/d(warped value), per channel.
        std::vector<double> g_img(n_pixels * channels, 0.0);

        for (int y = 0; y < h; ++y) {
          for (int x = 0; x < w; ++x) {
            if (!synth.mask.is_valid(x, y)) continue;
            const size_t i = static_cast<size_t>(y) * w + x;
            for (int c = 0; c < channels; ++c) {
              const double diff =
                  synth.warped.at(x, y, c) - in.target.at(x, y, c);
              g_img[i * channels + c] +=
                  weight[i] * sign_of(diff) / (channels * n_valid);
            }
          }
        }

        constexpr double c1 = 0.01 * 0.01;
        constexpr double c2 = 0.03 * 0.03;
        for (int y = 1; y < h - 1; ++y) {
          for (int x = 1; x < w - 1; ++x) {
            if (!ssim_ok[static_cast<size_t>(y) * w + x]) continue;
            const double d_ssim =
                -in.weights.lambda_ssim / (2.0 * ssim_count * channels);
            for (int c = 0; c < channels; ++c) {
              const SsimWindow &win =
                  ssim_cache[(static_cast<size_t>(y) * w + x) * channels + c];
              const double b1 = win.mu_a * win.mu_a + win.mu_b * win.mu_b + c1;
              const double b2 = win.var_a + win.var_b + c2;
              const double a1 = 2.0 * win.mu_a * win.mu_b + c1;
              const double a2 = 2.0 * win.cov + c2;
              for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                  const double va = in.target.at(x + dx, y + dy, c);
                  const double vb = synth.warped.at(x + dx, y + dy, c);
                  const double d_num = (2.0 * win.mu_a / 9.0) * a2 +
                                       a1 * (2.0 * (va - win.mu_a) / 9.0);
                  const double d_den = (2.0 * win.mu_b / 9.0) * b2 +
                                       b1 * (2.0 * (vb - win.mu_b) / 9.0);
                  const double d_val =
                      d_num / (b1 * b2) - win.ssim * d_den / (b1 * b2);
                  const size_t pi =
                      (static_cast<size_t>(y + dy) * w + (x + dx)) * channels + c;
                  g_img[pi] += d_ssim * d_val;
                }
              }
            }
          }
        }

        // Chain through the bilinear sample and the warp.
        for (int y = 0; y < h; ++y) {
          for (int x = 0; x < w; ++x) {
            if (!synth.mask.is_valid(x, y)) continue;
            const size_t i = static_cast<size_t>(y) * w + x;
            const SampleGradResult sg =
                bilinear_sample_with_grad(in.sources[s], synth.warp.coord(x, y));
            Vec2 d_coord = Vec2::Zero();
            for (int c = 0; c < channels; ++c) {
              const double g = g_img[i * channels + c];
              d_coord.x() += g * sg.ddx[c];
              d_coord.y() += g * sg.ddy[c];
            }
            if (in.epipolar_weighting &&
                std::abs(residual_signed[i]) < in.residual_clamp) {
              // d weight / d coord through r = (K^-1 [u v 1])^T E K^-1 p.
              double m = 0.0;
              for (int c = 0; c < channels; ++c) {
                m += std::abs(in.target.at(x, y, c) - synth.warped.at(x, y, c));
              }
              m /= channels;
              const Vec3 a = ki_t * (in.essentials[s].m * (ki * Vec3(x, y, 1.0)));
              const double factor = (m / n_valid) * weight[i] *
                                    sign_of(residual_signed[i]);
              d_coord.x() += factor * a.x();
              d_coord.y() += factor * a.y();
            }

            const WarpJacobian jac = warp_jacobian(
                in.k, in.poses[s], level_depth.at(x, y),
                PixelCoord{static_cast<double>(x), static_cast<double>(y)});
            const double dd = level_depth.at(x, y);
            grad_level[i] += d_coord.dot(jac.d_depth) * (-dd * dd);
            grads->d_pose[s] += jac.d_pose.transpose() * d_coord;
          }
        }
      }

      // --- smoothness (and its gradient on the level inverse depth) -------
      {
        int count = 0;
        double sum = 0.0;
        auto dval = [&](int xx, int yy) { return level_inv.at(xx, yy); };
        auto ival = [&](int xx, int yy) {
          double acc = 0.0;
          for (int c = 0; c < channels; ++c) acc += in.target.at(xx, yy, c);
          return acc / channels;
        };
        auto neighborhood_valid = [&](int x, int y) {
          for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
              if (!level_inv.is_valid(x + dx, y + dy)) return false;
            }
          }
          return true;
        };
        for (int y = 1; y < h - 1; ++y) {
          for (int x = 1; x < w - 1; ++x) {
            if (!neighborhood_valid(x, y)) continue;
            ++count;
          }
        }
        if (count > 0) {
          for (int y = 1; y < h - 1; ++y) {
            for (int x = 1; x < w - 1; ++x) {
              if (!neighborhood_valid(x, y)) continue;
              const double dxx = dval(x - 1, y) - 2.0 * dval(x, y) + dval(x + 1, y);
              const double dyy = dval(x, y - 1) - 2.0 * dval(x, y) + dval(x, y + 1);
              const double dxy = dval(x + 1, y + 1) - dval(x, y + 1) -
                                 dval(x + 1, y) + dval(x, y);
              const double wxx = std::exp(
                  -std::abs(ival(x - 1, y) - 2.0 * ival(x, y) + ival(x + 1, y)));
              const double wyy = std::exp(
                  -std::abs(ival(x, y - 1) - 2.0 * ival(x, y) + ival(x, y + 1)));
              const double wxy = std::exp(-std::abs(
                  ival(x + 1, y + 1) - ival(x, y + 1) - ival(x + 1, y) + ival(x, y)));
              sum += std::abs(dxx) * wxx + std::abs(dyy) * wyy +
                     2.0 * std::abs(dxy) * wxy;

              if (grads != nullptr) {
                const double gx = wxx * sign_dead(dxx) / count;
                const double gy = wyy * sign_dead(dyy) / count;
                const double gxy = 2.0 * wxy * sign_dead(dxy) / count;
                auto add = [&](int xx, int yy, double v) {
                  grad_level[static_cast<size_t>(yy) * w + xx] +=
                      in.weights.lambda_smooth * v;
                };
                add(x - 1, y, gx);
                add(x, y, -2.0 * gx);
                add(x + 1, y, gx);
                add(x, y - 1, gy);
                add(x, y, -2.0 * gy);
                add(x, y + 1, gy);
                add(x + 1, y + 1, gxy);
                add(x, y + 1, -gxy);
                add(x + 1, y, -gxy);
                add(x, y, gxy);
              }
            }
          }
          terms.smooth += sum / count;
        }
      }
    }

    // Shared inverse depth: every per-source map is identical, so the
    // pairwise depth-consistency term vanishes exactly.
    terms.depth = 0.0;

    report.per_level.push_back(terms);
    report.total += terms.warp + in.weights.lambda_smooth * terms.smooth +
                    in.weights.lambda_ssim * terms.ssim +
                    in.weights.lambda_depth * terms.depth;

    if (grads != nullptr) {
      // Pull the level gradient back to the full-resolution variable:
      // adjoint of the upsample, then of each box downsample.
      std::vector<double> g = std::move(grad_level);
      std::vector<double> tmp;
      upsample_inverse_depth_adjoint(g, w, h, pyramid[level].width,
                                     pyramid[level].height, &tmp);
      g = std::move(tmp);
      for (int l = level; l >= 1; --l) {
        std::vector<double> up;
        downsample_inverse_depth_2x_adjoint(g, pyramid[l - 1].width,
                                            pyramid[l - 1].height, &up);
        g = std::move(up);
      }
      for (size_t i = 0; i < n_pixels; ++i) grads->d_inv_depth[i] += g[i];
    }
  }

  return report;
}

}  // namespace

void RefineConfig::validate() const {
  if (!(step_depth > 0.0) || !(step_pose > 0.0)) {
    throw Error(ErrorCode::invalid_input, "step sizes must be positive");
  }
  if (max_iterations < 1) {
    throw Error(ErrorCode::invalid_input, "iteration cap must be >= 1");
  }
  loss_weights.validate();
}

LossReport refine_objective(const ImageBuffer &target,
                            std::span<const ImageBuffer> sources,
                            const InverseDepthMap &inv_depth,
                            std::span<const PoseSE3> poses,
                            std::span<const EssentialMatrix> essentials,
                            const CameraIntrinsics &k,
                            const LossWeights &weights, bool epipolar_weighting,
                            double residual_clamp) {
  EvalInputs in{target, sources, poses, essentials, k,
                weights, epipolar_weighting, residual_clamp};
  return evaluate(in, inv_depth, nullptr);
}

LossGradients loss_gradients(const ImageBuffer &target,
                             std::span<const ImageBuffer> sources,
                             const InverseDepthMap &inv_depth,
                             std::span<const PoseSE3> poses,
                             std::span<const EssentialMatrix> essentials,
                             const CameraIntrinsics &k,
                             const LossWeights &weights, bool epipolar_weighting,
                             double residual_clamp) {
  EvalInputs in{target, sources, poses, essentials, k,
                weights, epipolar_weighting, residual_clamp};
  LossGradients grads;
  grads.report = evaluate(in, inv_depth, &grads);
  return grads;
}

RefineTrace refine(const ImageBuffer &target, std::span<const ImageBuffer> sources,
                   const InverseDepthMap &init_inv_depth,
                   std::span<const PoseSE3> init_poses,
                   std::span<const EssentialMatrix> essentials,
                   const CameraIntrinsics &k, const RefineConfig &cfg,
                   std::span<const PoseSE3> gt_poses) {
  cfg.validate();
  if (init_inv_depth.valid_count() !=
      static_cast<int>(init_inv_depth.pixel_count())) {
    throw Error(ErrorCode::invalid_input,
                "refine requires a dense positive inverse depth");
  }
  if (!gt_poses.empty() && gt_poses.size() != init_poses.size()) {
    throw Error(ErrorCode::shape_mismatch, "ground-truth pose count mismatch");
  }

  InverseDepthMap d = init_inv_depth;
  for (double &v : d.inv_depth) v = std::max(v, cfg.depth_floor);
  d = normalize_inverse_depth(d);
  std::vector<PoseSE3> poses(init_poses.begin(), init_poses.end());

  RefineTrace trace;
  auto record_pose_error = [&] {
    if (gt_poses.empty()) return;
    double rot = 0.0, dir = 0.0;
    for (size_t s = 0; s < poses.size(); ++s) {
      rot += rotation_angle_between(poses[s].R, gt_poses[s].R);
      dir += direction_angle_between(poses[s].t, gt_poses[s].t);
    }
    trace.rotation_error.push_back(rot / poses.size());
    trace.translation_angle_error.push_back(dir / poses.size());
  };

  auto eval_at = [&](const InverseDepthMap &dd,
                     std::span<const PoseSE3> pp) -> double {
    EvalInputs local{target, sources, pp, essentials, k,
                     cfg.loss_weights, cfg.epipolar_weighting, cfg.residual_clamp};
    return evaluate(local, dd, nullptr).total;
  };

  double current = eval_at(d, poses);
  if (!std::isfinite(current)) {
    throw RefineFailure("initial objective is not finite", std::move(trace));
  }
  trace.totals.push_back(current);
  record_pose_error();

  for (int it = 0; it < cfg.max_iterations; ++it) {
    EvalInputs local{target, sources, poses, essentials, k,
                     cfg.loss_weights, cfg.epipolar_weighting, cfg.residual_clamp};
    LossGradients grads;
    try {
      grads.report = evaluate(local, d, &grads);
    } catch (const Error &e) {
      throw RefineFailure(std::string("gradient evaluation failed: ") + e.what(),
                          std::move(trace));
    }

    double grad_norm_sq = 0.0;
    for (double g : grads.d_inv_depth) grad_norm_sq += g * g;
    for (const auto &g : grads.d_pose) grad_norm_sq += g.squaredNorm();
    if (std::sqrt(grad_norm_sq) < cfg.gradient_tolerance) {
      trace.converged = true;
      break;
    }

    bool accepted = false;
    double step = 1.0;
    InverseDepthMap d_cand;
    std::vector<PoseSE3> poses_cand;
    double cand_total = 0.0;
    for (int bt = 0; bt <= cfg.max_backtracks; ++bt, step *= 0.5) {
      d_cand = d;
      for (size_t i = 0; i < d_cand.inv_depth.size(); ++i) {
        d_cand.inv_depth[i] = std::max(
            d_cand.inv_depth[i] - step * cfg.step_depth * grads.d_inv_depth[i],
            cfg.depth_floor);
      }
      d_cand = normalize_inverse_depth(d_cand);
      poses_cand.assign(poses.begin(), poses.end());
      for (size_t s = 0; s < poses_cand.size(); ++s) {
        poses_cand[s] = apply_increment(
            poses_cand[s], (-step * cfg.step_pose * grads.d_pose[s]).eval());
      }
      try {
        cand_total = eval_at(d_cand, poses_cand);
      } catch (const Error &) {
        continue;
      }
      if (std::isnan(cand_total)) {
        throw RefineFailure("objective became NaN", std::move(trace));
      }
      if (cand_total < current) {
        accepted = true;
        break;
      }
    }

    if (!accepted) {
      trace.converged = true;
      break;
    }

    const double decrease = current - cand_total;
    d = std::move(d_cand);
    poses = std::move(poses_cand);
    current = cand_total;
    trace.totals.push_back(current);
    trace.iterations = it + 1;
    record_pose_error();

    if (decrease < cfg.convergence_tolerance * std::max(current, 1e-12)) {
      trace.converged = true;
      break;
    }
  }

  trace.final_poses = poses;
  trace.final_inv_depth = d;
  return trace;
}

}  // namespace epigeo
