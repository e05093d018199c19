#pragma once

#include <optional>
#include <span>
#include <vector>

#include "epigeo/image.hpp"

namespace epigeo {

struct CropRect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
};

struct DepthEvalConfig {
  double cap = 80.0;         // meters; 50 for the capped protocol
  double min_depth = 1e-3;
  bool median_scaling = true;
  std::optional<CropRect> crop;

  void validate() const;
};

struct DepthEvalResult {
  double abs_rel = 0.0;
  double sq_rel = 0.0;
  double rmse = 0.0;
  double rmse_log = 0.0;
  double acc_1 = 0.0;  // delta < 1.25
  double acc_2 = 0.0;  // delta < 1.25^2
  double acc_3 = 0.0;  // delta < 1.25^3
};

// Ground truth is sparse: only valid gt pixels inside [min_depth, cap] (and
// the crop, when set) are evaluated. With median scaling the prediction is
// first scaled by median(gt)/median(pred) over those pixels, then clamped to
// [min_depth, cap].
DepthEvalResult eval_depth(const DepthMap &pred, const DepthMap &gt,
                           const DepthEvalConfig &cfg);

struct TrajectorySnippet {
  std::vector<PoseSE3> poses;  // camera-to-world, ordered
  std::vector<int> frame_ids;

  void validate() const;
};

// RMS translation error after anchoring both snippets at their first frame
// and applying the least-squares scalar scale to the predicted translations.
double ate_snippet(const TrajectorySnippet &pred, const TrajectorySnippet &gt);

// Angle between translation directions, radians, in [0, pi]. No scale
// correction.
double atde(const Vec3 &pred_translation, const Vec3 &gt_translation);

struct PoseEvalSummary {
  double ate_mean = 0.0;
  double ate_std = 0.0;
  double atde_mean = 0.0;
  double atde_std = 0.0;
  int snippet_count = 0;
  std::vector<double> ate_per_snippet;
  std::vector<double> atde_per_snippet;
};

// Sliding-window snippets of `snippet_length` frames (stride 1). ATDE per
// snippet averages the per-step translation direction angles.
PoseEvalSummary evaluate_trajectories(std::span<const PoseSE3> pred,
                                      std::span<const PoseSE3> gt,
                                      int snippet_length = 3);

}  // namespace epigeo
