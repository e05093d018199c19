#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "epigeo/geometry.hpp"

namespace epigeo {

// Candidate essential matrices from one minimal sample. At most 10 entries
// (the real roots of the degree-10 polynomial).
struct MinimalSolution {
  std::vector<EssentialMatrix> candidates;
};

struct RansacConfig {
  double threshold = 1e-3;      // algebraic residual, normalized coords
  int max_iterations = 1000;
  double confidence = 0.999;
  std::uint64_t seed = 0;

  void validate() const;
};

struct RansacResult {
  EssentialMatrix essential;
  std::vector<bool> inlier_mask;
  int iterations_used = 0;
  double inlier_residual_rms = 0.0;

  int inlier_count() const;
};

// Nister's five-point minimal solver over normalized coordinates.
// The five correspondences must be pairwise distinct.
MinimalSolution solve_essential_minimal(std::span<const NormalizedCoord> x1,
                                        std::span<const NormalizedCoord> x2);

// Robust estimation over pixel-space matches. Deterministic given cfg.seed:
// the sample drawn at iteration k depends only on (seed, k).
RansacResult ransac_essential(std::span<const Correspondence> matches,
                              const CameraIntrinsics &k1,
                              const CameraIntrinsics &k2,
                              const RansacConfig &cfg);

// Triangulated point with its depth in each view.
struct TriangulatedPoint {
  Vec3 point;      // in the first camera frame
  double depth1 = 0.0;
  double depth2 = 0.0;
};

// Linear (DLT) triangulation of a single ray pair under X2 = R X1 + t.
TriangulatedPoint triangulate(const NormalizedCoord &p1,
                              const NormalizedCoord &p2, const PoseSE3 &pose);

// Picks the (R, +-t) candidate with the most points in front of both
// cameras. Translation is returned unit-norm.
PoseSE3 decompose_essential(const EssentialMatrix &e,
                            std::span<const NormalizedCoord> x1,
                            std::span<const NormalizedCoord> x2);

// Pixel-space convenience wrapper over the normalized-coordinate overload.
PoseSE3 decompose_essential(const EssentialMatrix &e,
                            std::span<const Correspondence> matches,
                            const CameraIntrinsics &k1,
                            const CameraIntrinsics &k2);

}  // namespace epigeo
