#include "epigeo/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace epigeo {

namespace {

double median_of(std::vector<double> v) {
  const size_t n = v.size();
  std::nth_element(v.begin(), v.begin() + n / 2, v.end());
  double upper = v[n / 2];
  if (n % 2 == 1) return upper;
  std::nth_element(v.begin(), v.begin() + n / 2 - 1, v.begin() + n / 2);
  return 0.5 * (v[n / 2 - 1] + upper);
}

}  // namespace

void DepthEvalConfig::validate() const {
  if (!(cap > min_depth) || !(min_depth > 0.0)) {
    throw Error(ErrorCode::invalid_input, "require cap > min_depth > 0");
  }
  if (crop.has_value() && (crop->width <= 0 || crop->height <= 0 ||
                           crop->x < 0 || crop->y < 0)) {
    throw Error(ErrorCode::invalid_input, "invalid evaluation crop");
  }
}

DepthEvalResult eval_depth(const DepthMap &pred, const DepthMap &gt,
                           const DepthEvalConfig &cfg) {
  cfg.validate();
  if (pred.width != gt.width || pred.height != gt.height) {
    throw Error(ErrorCode::shape_mismatch, "prediction and gt resolutions differ");
  }

  int x0 = 0, y0 = 0, x1 = gt.width, y1 = gt.height;
  if (cfg.crop.has_value()) {
    x0 = cfg.crop->x;
    y0 = cfg.crop->y;
    x1 = std::min(gt.width, cfg.crop->x + cfg.crop->width);
    y1 = std::min(gt.height, cfg.crop->y + cfg.crop->height);
  }

  std::vector<double> pred_vals;
  std::vector<double> gt_vals;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      if (!gt.is_valid(x, y) || !pred.is_valid(x, y)) continue;
      const double g = gt.at(x, y);
      if (g < cfg.min_depth || g > cfg.cap) continue;
      gt_vals.push_back(g);
      pred_vals.push_back(pred.at(x, y));
    }
  }
  if (gt_vals.empty()) {
    throw Error(ErrorCode::empty_input, "no valid ground-truth pixels to evaluate");
  }

  if (cfg.median_scaling) {
    const double scale = median_of(gt_vals) / median_of(pred_vals);
    for (double &p : pred_vals) p *= scale;
  }
  for (double &p : pred_vals) {
    p = std::min(std::max(p, cfg.min_depth), cfg.cap);
  }

  DepthEvalResult r;
  const double n = static_cast<double>(gt_vals.size());
  double sq_err = 0.0, sq_log_err = 0.0;
  for (size_t i = 0; i < gt_vals.size(); ++i) {
    const double p = pred_vals[i];
    const double g = gt_vals[i];
    const double err = p - g;
    r.abs_rel += std::abs(err) / g;
    r.sq_rel += err * err / g;
    sq_err += err * err;
    const double log_err = std::log(p) - std::log(g);
    sq_log_err += log_err * log_err;
    const double delta = std::max(p / g, g / p);
    if (delta < 1.25) r.acc_1 += 1.0;
    if (delta < 1.25 * 1.25) r.acc_2 += 1.0;
    if (delta < 1.25 * 1.25 * 1.25) r.acc_3 += 1.0;
  }
  r.abs_rel /= n;
  r.sq_rel /= n;
  r.rmse = std::sqrt(sq_err / n);
  r.rmse_log = std::sqrt(sq_log_err / n);
  r.acc_1 /= n;
  r.acc_2 /= n;
  r.acc_3 /= n;
  return r;
}

void TrajectorySnippet::validate() const {
  if (poses.size() < 2) {
    throw Error(ErrorCode::invalid_input, "snippet needs at least two frames");
  }
  if (frame_ids.size() != poses.size()) {
    throw Error(ErrorCode::shape_mismatch, "frame id count mismatch");
  }
}

double ate_snippet(const TrajectorySnippet &pred, const TrajectorySnippet &gt) {
  pred.validate();
  gt.validate();
  if (pred.poses.size() != gt.poses.size() || pred.frame_ids != gt.frame_ids) {
    throw Error(ErrorCode::shape_mismatch, "snippets are not aligned");
  }
  const size_t n = pred.poses.size();

  // Anchor both snippets at their first frame.
  const PoseSE3 pred_anchor = pred.poses[0].inverse();
  const PoseSE3 gt_anchor = gt.poses[0].inverse();
  std::vector<Vec3> tp(n), tg(n);
  for (size_t i = 0; i < n; ++i) {
    tp[i] = pred_anchor.compose(pred.poses[i]).t;
    tg[i] = gt_anchor.compose(gt.poses[i]).t;
  }

  double dot = 0.0, norm_sq = 0.0;
  for (size_t i = 0; i < n; ++i) {
    dot += tp[i].dot(tg[i]);
    norm_sq += tp[i].squaredNorm();
  }
  const double scale = norm_sq > 0.0 ? dot / norm_sq : 1.0;

  double sq_sum = 0.0;
  for (size_t i = 0; i < n; ++i) {
    sq_sum += (scale * tp[i] - tg[i]).squaredNorm();
  }
  return std::sqrt(sq_sum / n);
}

double atde(const Vec3 &pred_translation, const Vec3 &gt_translation) {
  if (!(pred_translation.norm() > 0.0) || !(gt_translation.norm() > 0.0)) {
    throw Error(ErrorCode::invalid_input, "zero-norm translation direction");
  }
  return direction_angle_between(pred_translation, gt_translation);
}

PoseEvalSummary evaluate_trajectories(std::span<const PoseSE3> pred,
                                      std::span<const PoseSE3> gt,
                                      int snippet_length) {
  if (pred.size() != gt.size()) {
    throw Error(ErrorCode::shape_mismatch, "trajectory lengths differ");
  }
  if (snippet_length < 2) {
    throw Error(ErrorCode::invalid_input, "snippet length must be >= 2");
  }
  if (pred.size() < static_cast<size_t>(snippet_length)) {
    throw Error(ErrorCode::insufficient_data, "trajectory shorter than a snippet");
  }

  PoseEvalSummary summary;
  for (size_t start = 0; start + snippet_length <= pred.size(); ++start) {
    TrajectorySnippet sp, sg;
    for (int i = 0; i < snippet_length; ++i) {
      sp.poses.push_back(pred[start + i]);
      sg.poses.push_back(gt[start + i]);
      sp.frame_ids.push_back(static_cast<int>(start) + i);
      sg.frame_ids.push_back(static_cast<int>(start) + i);
    }
    summary.ate_per_snippet.push_back(ate_snippet(sp, sg));

    double angle_sum = 0.0;
    int steps = 0;
    for (int i = 0; i + 1 < snippet_length; ++i) {
      const Vec3 dp =
          pred[start + i].inverse().compose(pred[start + i + 1]).t;
      const Vec3 dg = gt[start + i].inverse().compose(gt[start + i + 1]).t;
      if (dp.norm() > 0.0 && dg.norm() > 0.0) {
        angle_sum += atde(dp, dg);
        ++steps;
      }
    }
    summary.atde_per_snippet.push_back(steps > 0 ? angle_sum / steps : 0.0);
  }

  summary.snippet_count = static_cast<int>(summary.ate_per_snippet.size());
  auto mean_std = [](const std::vector<double> &v, double *mean, double *stddev) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= v.size();
    double var = 0.0;
    for (double x : v) var += (x - m) * (x - m);
    *mean = m;
    *stddev = v.size() > 1 ? std::sqrt(var / v.size()) : 0.0;
  };
  mean_std(summary.ate_per_snippet, &summary.ate_mean, &summary.ate_std);
  mean_std(summary.atde_per_snippet, &summary.atde_mean, &summary.atde_std);
  return summary;
}

}  // namespace epigeo
