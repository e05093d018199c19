#include "epigeo/synthetic.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace epigeo {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Deterministic in-plane axes for a unit normal.
void plane_axes(const Vec3 &normal, Vec3 *axis_u, Vec3 *axis_v) {
  const Vec3 ref = std::abs(normal.z()) < 0.9 ? Vec3(0.0, 0.0, 1.0)
                                              : Vec3(1.0, 0.0, 0.0);
  *axis_u = normal.cross(ref).normalized();
  *axis_v = normal.cross(*axis_u).normalized();
}

struct Hit {
  double s = std::numeric_limits<double>::infinity();
  double u = 0.0;
  double v = 0.0;
  int primitive = -1;
};

// Intersects a ray with one primitive in the primitive's rest frame. The ray
// parameter s equals the camera z-depth because the camera-frame direction
// has unit z.
bool intersect(const Primitive &prim, const Vec3 &origin, const Vec3 &dir,
               double *s_out, double *u_out, double *v_out) {
  if (prim.kind == Primitive::Kind::plane) {
    const double denom = prim.normal.dot(dir);
    if (std::abs(denom) < 1e-12) return false;
    const double s = prim.normal.dot(prim.point - origin) / denom;
    if (s <= 1e-9) return false;
    Vec3 au, av;
    plane_axes(prim.normal, &au, &av);
    const Vec3 q = origin + s * dir - prim.point;
    const double u = q.dot(au);
    const double v = q.dot(av);
    if (prim.extent_u > 0.0 && std::abs(u) > prim.extent_u) return false;
    if (prim.extent_v > 0.0 && std::abs(v) > prim.extent_v) return false;
    *s_out = s;
    *u_out = u;
    *v_out = v;
    return true;
  }

  // Axis-aligned box via the slab method.
  double near = -std::numeric_limits<double>::infinity();
  double far = std::numeric_limits<double>::infinity();
  int near_axis = -1;
  for (int a = 0; a < 3; ++a) {
    if (std::abs(dir[a]) < 1e-14) {
      if (origin[a] < prim.box_min[a] || origin[a] > prim.box_max[a]) return false;
      continue;
    }
    double t0 = (prim.box_min[a] - origin[a]) / dir[a];
    double t1 = (prim.box_max[a] - origin[a]) / dir[a];
    if (t0 > t1) std::swap(t0, t1);
    if (t0 > near) {
      near = t0;
      near_axis = a;
    }
    far = std::min(far, t1);
    if (near > far) return false;
  }
  if (near <= 1e-9 || near_axis < 0) return false;
  const Vec3 q = origin + near * dir;
  const int ua = (near_axis + 1) % 3;
  const int va = (near_axis + 2) % 3;
  *s_out = near;
  *u_out = q[ua];
  *v_out = q[va];
  return true;
}

Hit cast_ray(const SceneSpec &scene, const Vec3 &origin, const Vec3 &dir,
             bool at_second_time) {
  Hit best;
  for (size_t i = 0; i < scene.primitives.size(); ++i) {
    const Primitive &prim = scene.primitives[i];
    Vec3 o = origin;
    Vec3 d = dir;
    if (at_second_time && prim.moving && scene.has_object_motion) {
      const PoseSE3 inv = scene.object_motion.inverse();
      o = inv.apply(origin);
      d = inv.R * dir;
    }
    double s, u, v;
    if (intersect(prim, o, d, &s, &u, &v) && s < best.s) {
      best.s = s;
      best.u = u;
      best.v = v;
      best.primitive = static_cast<int>(i);
    }
  }
  return best;
}

// World-frame surface point hit by the view ray of pixel (px, py); returns
// false when nothing is hit. For moving primitives the returned point is the
// rest-frame (time 1) material point.
bool surface_point(const SceneSpec &scene, const PoseSE3 &camera, double px,
                   double py, bool *moving, Vec3 *point, double *depth) {
  const Vec3 dir_cam = scene.intrinsics.inverse_matrix() * Vec3(px, py, 1.0);
  const Vec3 center = -(camera.R.transpose() * camera.t);
  const Vec3 dir_world = camera.R.transpose() * dir_cam;
  const Hit hit = cast_ray(scene, center, dir_world, /*at_second_time=*/false);
  if (hit.primitive < 0) return false;
  *moving = scene.primitives[hit.primitive].moving;
  *point = center + hit.s * dir_world;
  *depth = hit.s;
  return true;
}

}  // namespace

double Texture::eval(double u, double v) const {
  double value;
  if (kind == Kind::sinusoid) {
    value = base + 0.5 * amplitude *
                       (std::sin(2.0 * kPi * (freq_u * u + phase_u)) +
                        std::sin(2.0 * kPi * (freq_v * v + phase_v)));
  } else {
    const double su = std::tanh(std::sin(2.0 * kPi * u / period) / softness);
    const double sv = std::tanh(std::sin(2.0 * kPi * v / period) / softness);
    value = base + amplitude * su * sv;
  }
  return std::min(1.0, std::max(0.0, value));
}

Primitive Primitive::make_plane(const Vec3 &point, const Vec3 &normal,
                                const Texture &texture, double extent_u,
                                double extent_v) {
  if (!(normal.norm() > 0.0)) {
    throw Error(ErrorCode::invalid_input, "plane normal must be nonzero");
  }
  Primitive p;
  p.kind = Kind::plane;
  p.point = point;
  p.normal = normal.normalized();
  p.extent_u = extent_u;
  p.extent_v = extent_v;
  p.texture = texture;
  return p;
}

Primitive Primitive::make_box(const Vec3 &box_min, const Vec3 &box_max,
                              const Texture &texture) {
  if (!(box_min.x() < box_max.x()) || !(box_min.y() < box_max.y()) ||
      !(box_min.z() < box_max.z())) {
    throw Error(ErrorCode::invalid_input, "box bounds are inverted");
  }
  Primitive p;
  p.kind = Kind::box;
  p.box_min = box_min;
  p.box_max = box_max;
  p.texture = texture;
  return p;
}

RenderResult render(const SceneSpec &scene, const PoseSE3 &camera_pose,
                    bool at_second_time) {
  if (scene.primitives.empty()) {
    throw Error(ErrorCode::empty_scene, "scene has no primitives");
  }
  RenderResult out;
  out.image = ImageBuffer::create(scene.width, scene.height, scene.channels);
  out.depth = DepthMap::create(scene.width, scene.height);
  out.moving_mask = PixelMask::create(scene.width, scene.height);

  const Mat3 ki = scene.intrinsics.inverse_matrix();
  const Vec3 center = -(camera_pose.R.transpose() * camera_pose.t);

  for (int y = 0; y < scene.height; ++y) {
    for (int x = 0; x < scene.width; ++x) {
      const Vec3 dir_world = camera_pose.R.transpose() * (ki * Vec3(x, y, 1.0));
      const Hit hit = cast_ray(scene, center, dir_world, at_second_time);
      if (hit.primitive < 0) continue;
      const Primitive &prim = scene.primitives[hit.primitive];
      const double t = prim.texture.eval(hit.u, hit.v);
      for (int c = 0; c < scene.channels; ++c) {
        const double gain = scene.channels == 3 ? prim.texture.color[c] : 1.0;
        out.image.at(x, y, c) = std::min(1.0, std::max(0.0, t * gain));
      }
      out.depth.set(x, y, hit.s, true);
      out.moving_mask.set(x, y, prim.moving);
    }
  }
  return out;
}

RenderedPair render_pair(const SceneSpec &scene, const PoseSE3 &pose1,
                         const PoseSE3 &pose2) {
  RenderedPair out;
  out.view1 = render(scene, pose1, /*at_second_time=*/false);
  out.view2 = render(scene, pose2, /*at_second_time=*/true);
  out.flow = WarpField::create(scene.width, scene.height);

  for (int y = 0; y < scene.height; ++y) {
    for (int x = 0; x < scene.width; ++x) {
      bool moving = false;
      Vec3 point;
      double depth;
      if (!surface_point(scene, pose1, x, y, &moving, &point, &depth)) continue;
      if (moving && scene.has_object_motion) {
        point = scene.object_motion.apply(point);
      }
      const Vec3 in_cam2 = pose2.apply(point);
      if (in_cam2.z() <= 1e-9) continue;
      const Vec3 h = scene.intrinsics.matrix() * in_cam2;
      const Vec2 px(h.x() / h.z(), h.y() / h.z());
      const bool in_bounds = px.x() >= 0.0 && px.x() <= scene.width - 1.0 &&
                             px.y() >= 0.0 && px.y() <= scene.height - 1.0;
      out.flow.set(x, y, px, in_bounds);
    }
  }
  return out;
}

CorrespondenceSet exact_correspondences(const SceneSpec &scene,
                                        const PoseSE3 &pose1,
                                        const PoseSE3 &pose2, int n,
                                        double noise_px, double outlier_frac,
                                        std::uint64_t seed) {
  if (n < 5) {
    throw Error(ErrorCode::invalid_input, "at least 5 correspondences required");
  }
  if (outlier_frac < 0.0 || outlier_frac >= 1.0) {
    throw Error(ErrorCode::invalid_input, "outlier fraction must be in [0, 1)");
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(0.0, scene.width - 1.0);
  std::uniform_real_distribution<double> uy(0.0, scene.height - 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  const int n_outliers = static_cast<int>(std::floor(outlier_frac * n));
  const int n_inliers = n - n_outliers;

  CorrespondenceSet out;
  out.matches.reserve(n);
  out.is_inlier.reserve(n);

  const long max_attempts = 2000L * n;
  long attempts = 0;
  while (static_cast<int>(out.matches.size()) < n_inliers) {
    if (++attempts > max_attempts) {
      throw Error(ErrorCode::visibility,
                  "not enough co-visible static surface points");
    }
    const double px = ux(rng);
    const double py = uy(rng);
    bool moving = false;
    Vec3 point;
    double depth1;
    if (!surface_point(scene, pose1, px, py, &moving, &point, &depth1)) continue;
    if (moving) continue;

    const Vec3 in_cam2 = pose2.apply(point);
    if (in_cam2.z() <= 1e-9) continue;
    const Vec3 h = scene.intrinsics.matrix() * in_cam2;
    const double qx = h.x() / h.z();
    const double qy = h.y() / h.z();
    if (qx < 0.0 || qx > scene.width - 1.0 || qy < 0.0 || qy > scene.height - 1.0) {
      continue;
    }

    // Reject points occluded in the second view (moved objects included).
    const Vec3 dir2_world =
        pose2.R.transpose() * (scene.intrinsics.inverse_matrix() * Vec3(qx, qy, 1.0));
    const Vec3 center2 = -(pose2.R.transpose() * pose2.t);
    const Hit hit2 = cast_ray(scene, center2, dir2_world, /*at_second_time=*/true);
    if (hit2.primitive < 0 || std::abs(hit2.s - in_cam2.z()) > 1e-6 * (1.0 + in_cam2.z())) {
      continue;
    }

    Correspondence c;
    c.view1 = {px, py};
    c.view2 = {qx, qy};
    if (noise_px > 0.0) {
      c.view1.x += noise_px * noise(rng);
      c.view1.y += noise_px * noise(rng);
      c.view2.x += noise_px * noise(rng);
      c.view2.y += noise_px * noise(rng);
    }
    out.matches.push_back(c);
    out.is_inlier.push_back(true);
  }

  for (int i = 0; i < n_outliers; ++i) {
    Correspondence c;
    c.view1 = {ux(rng), uy(rng)};
    c.view2 = {ux(rng), uy(rng)};
    out.matches.push_back(c);
    out.is_inlier.push_back(false);
  }
  return out;
}

SceneSpec inject_moving_object(const SceneSpec &scene,
                               const PoseSE3 &object_motion) {
  if (scene.primitives.empty()) {
    throw Error(ErrorCode::empty_scene, "scene has no primitives");
  }
  SceneSpec out = scene;
  bool any_moving = false;
  for (const Primitive &p : out.primitives) any_moving = any_moving || p.moving;
  if (!any_moving) out.primitives.back().moving = true;
  out.object_motion = object_motion;
  out.has_object_motion = true;
  return out;
}

}  // namespace epigeo
