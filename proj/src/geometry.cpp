#include "epigeo/geometry.hpp"

#include <cmath>

namespace epigeo {

namespace {

bool finite3(const Vec3 &v) {
  return std::isfinite(v.x()) && std::isfinite(v.y()) && std::isfinite(v.z());
}

}  // namespace

CameraIntrinsics CameraIntrinsics::from(double fx, double fy, double cx,
                                        double cy, double skew) {
  if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(cx) || !std::isfinite(cy) ||
      !std::isfinite(skew)) {
    throw Error(ErrorCode::invalid_input,
                "intrinsics require fx > 0, fy > 0 and finite entries");
  }
  return {fx, fy, cx, cy, skew};
}

Mat3 CameraIntrinsics::matrix() const {
  Mat3 k;
  k << fx, skew, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

Mat3 CameraIntrinsics::inverse_matrix() const {
  Mat3 ki;
  ki << 1.0 / fx, -skew / (fx * fy), (skew * cy - cx * fy) / (fx * fy),  //
      0.0, 1.0 / fy, -cy / fy,                                           //
      0.0, 0.0, 1.0;
  return ki;
}

PoseSE3 PoseSE3::from(const Mat3 &R, const Vec3 &t) {
  const double ortho = (R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (!(ortho < 1e-9)) {
    throw Error(ErrorCode::invalid_input, "rotation is not orthonormal");
  }
  if (!(std::abs(R.determinant() - 1.0) < 1e-9)) {
    throw Error(ErrorCode::invalid_input, "rotation determinant is not +1");
  }
  if (!finite3(t)) {
    throw Error(ErrorCode::invalid_input, "translation has non-finite entries");
  }
  return {R, t};
}

PoseSE3 PoseSE3::inverse() const { return {R.transpose(), -(R.transpose() * t)}; }

PoseSE3 PoseSE3::compose(const PoseSE3 &rhs) const {
  return {R * rhs.R, R * rhs.t + t};
}

bool PoseSE3::is_identity() const {
  return (R - Mat3::Identity()).cwiseAbs().maxCoeff() == 0.0 &&
         t.cwiseAbs().maxCoeff() == 0.0;
}

EssentialMatrix EssentialMatrix::unit_frobenius(const Mat3 &e) {
  const double n = e.norm();
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw Error(ErrorCode::invalid_input, "cannot normalize a zero matrix");
  }
  return {e / n, Normalization::unit_frobenius};
}

Mat3 skew_symmetric(const Vec3 &v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return s;
}

Mat3 rotation_exp(const Vec3 &w) {
  const double theta = w.norm();
  const Mat3 s = skew_symmetric(w);
  if (theta < 1e-10) {
    // Second-order series keeps the result orthonormal to machine precision.
    return Mat3::Identity() + s + 0.5 * s * s;
  }
  const double a = std::sin(theta) / theta;
  const double b = (1.0 - std::cos(theta)) / (theta * theta);
  return Mat3::Identity() + a * s + b * s * s;
}

Vec3 rotation_log(const Mat3 &R) {
  const double cos_theta = std::min(1.0, std::max(-1.0, (R.trace() - 1.0) / 2.0));
  const double theta = std::acos(cos_theta);
  Vec3 axis(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
  if (theta < 1e-10) {
    return 0.5 * axis;
  }
  if (theta > M_PI - 1e-6) {
    // Near pi the off-diagonal form degrades; recover the axis from the
    // symmetric part.
    Mat3 m = 0.5 * (R + Mat3::Identity());
    Vec3 sq = m.diagonal();
    int i = 0;
    sq.maxCoeff(&i);
    Vec3 a = Vec3::Zero();
    a[i] = std::sqrt(std::max(0.0, sq[i]));
    for (int j = 0; j < 3; ++j) {
      if (j != i && a[i] > 0.0) a[j] = m(i, j) / a[i];
    }
    a.normalize();
    if (axis.dot(a) < 0.0) a = -a;
    return theta * a;
  }
  return (theta / (2.0 * std::sin(theta))) * axis;
}

double rotation_angle_between(const Mat3 &a, const Mat3 &b) {
  return rotation_log(a.transpose() * b).norm();
}

double direction_angle_between(const Vec3 &a, const Vec3 &b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (!(na > 0.0) || !(nb > 0.0)) {
    throw Error(ErrorCode::invalid_input, "zero-norm direction");
  }
  const double c = std::min(1.0, std::max(-1.0, a.dot(b) / (na * nb)));
  return std::acos(c);
}

NormalizedCoord normalize_pixel(const CameraIntrinsics &k, const PixelCoord &p) {
  if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
    throw Error(ErrorCode::invalid_input, "non-finite pixel coordinate");
  }
  const Vec3 n = k.inverse_matrix() * p.hom();
  return {n.x(), n.y()};
}

PixelCoord denormalize_coord(const CameraIntrinsics &k, const NormalizedCoord &p) {
  const Vec3 q = k.matrix() * p.hom();
  return {q.x(), q.y()};
}

EssentialMatrix essential_from_pose(const PoseSE3 &pose) {
  if (!(pose.t.norm() > 1e-12)) {
    throw Error(ErrorCode::degenerate_motion,
                "pure rotation has no epipolar geometry (|t| ~ 0)");
  }
  return EssentialMatrix::unit_frobenius(skew_symmetric(pose.t) * pose.R);
}

double epipolar_residual(const EssentialMatrix &e, const NormalizedCoord &p1,
                         const NormalizedCoord &p2) {
  const double r = p2.hom().dot(e.m * p1.hom());
  if (!std::isfinite(r)) {
    throw Error(ErrorCode::invalid_input, "non-finite epipolar residual");
  }
  return std::abs(r);
}

Vec3 epipolar_line(const EssentialMatrix &e, const NormalizedCoord &p1) {
  return e.m * p1.hom();
}

double sampson_distance(const EssentialMatrix &e, const NormalizedCoord &p1,
                        const NormalizedCoord &p2) {
  const Vec3 l1 = e.m * p1.hom();
  const Vec3 l2 = e.m.transpose() * p2.hom();
  const double r = p2.hom().dot(l1);
  const double denom =
      l1.x() * l1.x() + l1.y() * l1.y() + l2.x() * l2.x() + l2.y() * l2.y();
  if (denom <= 0.0) {
    return 0.0;
  }
  return r * r / denom;
}

CameraIntrinsics scale_intrinsics(const CameraIntrinsics &k, int level) {
  if (level < 0 || level > 6) {
    throw Error(ErrorCode::invalid_input, "pyramid level must be in [0, 6]");
  }
  const double s = static_cast<double>(1 << level);
  return {k.fx / s, k.fy / s, k.cx / s, k.cy / s, k.skew / s};
}

}  // namespace epigeo
