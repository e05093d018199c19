#pragma once

#include <Eigen/Dense>

#include "epigeo/error.hpp"

namespace epigeo {

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;

// Homogeneous pixel coordinate with the third entry fixed to 1.
struct PixelCoord {
  double x = 0.0;
  double y = 0.0;

  Vec3 hom() const { return {x, y, 1.0}; }
};

// Pixel coordinate premultiplied by K^-1 (intrinsics removed).
struct NormalizedCoord {
  double x = 0.0;
  double y = 0.0;

  Vec3 hom() const { return {x, y, 1.0}; }
};

// A matched pixel pair between two views.
struct Correspondence {
  PixelCoord view1;
  PixelCoord view2;
};

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  double skew = 0.0;

  static CameraIntrinsics from(double fx, double fy, double cx, double cy,
                               double skew = 0.0);
  static CameraIntrinsics identity() { return {}; }

  Mat3 matrix() const;
  // Closed-form inverse of the upper-triangular calibration matrix.
  Mat3 inverse_matrix() const;
};

// Rigid transform: X_out = R * X_in + t.
struct PoseSE3 {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  // Validates R^T R = I and det(R) = +1 within 1e-9.
  static PoseSE3 from(const Mat3 &R, const Vec3 &t);
  static PoseSE3 identity() { return {}; }

  PoseSE3 inverse() const;
  PoseSE3 compose(const PoseSE3 &rhs) const;  // this ∘ rhs
  Vec3 apply(const Vec3 &p) const { return R * p + t; }
  bool is_identity() const;
};

struct EssentialMatrix {
  enum class Normalization { unit_frobenius, raw };

  Mat3 m = Mat3::Zero();
  Normalization normalization = Normalization::raw;

  // Rescales to unit Frobenius norm; sign is left untouched.
  static EssentialMatrix unit_frobenius(const Mat3 &e);
  static EssentialMatrix raw(const Mat3 &e) {
    return {e, Normalization::raw};
  }
};

Mat3 skew_symmetric(const Vec3 &v);

// Rodrigues exponential / logarithm for rotation vectors.
Mat3 rotation_exp(const Vec3 &axis_angle);
Vec3 rotation_log(const Mat3 &R);
// Geodesic angle between two rotations, radians.
double rotation_angle_between(const Mat3 &a, const Mat3 &b);
// Angle between two directions, radians, scale invariant.
double direction_angle_between(const Vec3 &a, const Vec3 &b);

NormalizedCoord normalize_pixel(const CameraIntrinsics &k, const PixelCoord &p);
PixelCoord denormalize_coord(const CameraIntrinsics &k, const NormalizedCoord &p);

// E = [t]x R, unit-Frobenius normalized. Pure rotation has no epipolar
// geometry and is rejected.
EssentialMatrix essential_from_pose(const PoseSE3 &pose);

// Algebraic distance |p2^T E p1| >= 0.
double epipolar_residual(const EssentialMatrix &e, const NormalizedCoord &p1,
                         const NormalizedCoord &p2);

// Line coefficients E * p1 in the second view.
Vec3 epipolar_line(const EssentialMatrix &e, const NormalizedCoord &p1);

// First-order geometric residual; diagnostic companion to the algebraic
// distance used for weighting.
double sampson_distance(const EssentialMatrix &e, const NormalizedCoord &p1,
                        const NormalizedCoord &p2);

// Divides fx, fy, cx, cy, skew by 2^level. level in [0, 6].
CameraIntrinsics scale_intrinsics(const CameraIntrinsics &k, int level);

}  // namespace epigeo
