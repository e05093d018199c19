#pragma once

#include <span>

#include "epigeo/losses.hpp"

namespace epigeo {

struct RefineConfig {
  double step_depth = 0.5;
  double step_pose = 0.5;
  int max_iterations = 100;
  double convergence_tolerance = 1e-6;  // relative loss decrease per iteration
  double gradient_tolerance = 1e-10;
  bool epipolar_weighting = true;
  LossWeights loss_weights;
  double residual_clamp = 10.0;
  double depth_floor = 1e-6;
  int max_backtracks = 30;
  std::uint64_t seed = 0;  // initialization perturbation (CLI side)

  void validate() const;
};

struct RefineTrace {
  std::vector<double> totals;  // objective values actually evaluated/accepted
  std::vector<PoseSE3> final_poses;
  InverseDepthMap final_inv_depth;
  // Filled when ground-truth poses are supplied: per accepted iterate.
  std::vector<double> rotation_error;
  std::vector<double> translation_angle_error;
  int iterations = 0;
  bool converged = false;
};

class RefineFailure : public Error {
 public:
  RefineFailure(const std::string &what, RefineTrace trace)
      : Error(ErrorCode::numerical_failure, what), trace(std::move(trace)) {}

  RefineTrace trace;
};

struct LossGradients {
  std::vector<double> d_inv_depth;  // per full-resolution pixel
  std::vector<Eigen::Matrix<double, 6, 1>> d_pose;  // per source
  LossReport report;
};

// Objective shared by refine and its gradient: the multi-scale total with a
// single inverse-depth map serving every source. With weighting disabled the
// warp term falls back to the unweighted photometric loss.
LossReport refine_objective(const ImageBuffer &target,
                            std::span<const ImageBuffer> sources,
                            const InverseDepthMap &inv_depth,
                            std::span<const PoseSE3> poses,
                            std::span<const EssentialMatrix> essentials,
                            const CameraIntrinsics &k,
                            const LossWeights &weights, bool epipolar_weighting,
                            double residual_clamp);

// Analytic gradient of refine_objective with respect to every inverse-depth
// pixel and a 6-DoF local pose increment per source (rotation axis-angle
// then translation, composed on the left). The epipolar weight is a function
// of the current warp, so it is differentiated through; the essential
// matrices themselves stay fixed.
LossGradients loss_gradients(const ImageBuffer &target,
                             std::span<const ImageBuffer> sources,
                             const InverseDepthMap &inv_depth,
                             std::span<const PoseSE3> poses,
                             std::span<const EssentialMatrix> essentials,
                             const CameraIntrinsics &k,
                             const LossWeights &weights,
                             bool epipolar_weighting, double residual_clamp);

// Gradient descent with backtracking halving line search over the shared
// inverse depth and the per-source poses. The inverse depth is renormalized
// to unit mean as part of every accepted step; essentials never change.
RefineTrace refine(const ImageBuffer &target,
                   std::span<const ImageBuffer> sources,
                   const InverseDepthMap &init_inv_depth,
                   std::span<const PoseSE3> init_poses,
                   std::span<const EssentialMatrix> essentials,
                   const CameraIntrinsics &k, const RefineConfig &cfg,
                   std::span<const PoseSE3> gt_poses = {});

}  // namespace epigeo
