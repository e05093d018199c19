#pragma once

#include <cstdint>
#include <vector>

#include "epigeo/image.hpp"

namespace epigeo {

// Procedural surface texture, evaluated analytically in surface coordinates.
struct Texture {
  enum class Kind { sinusoid, checker };

  Kind kind = Kind::sinusoid;
  double base = 0.5;
  double amplitude = 0.35;
  // sinusoid: cycles per scene unit along the two surface axes
  double freq_u = 0.05;
  double freq_v = 0.04;
  double phase_u = 0.0;
  double phase_v = 0.0;
  // checker: cell period in scene units and edge softness
  double period = 1.0;
  double softness = 0.35;
  // per-channel gain for color renders
  Vec3 color = Vec3(1.0, 1.0, 1.0);

  double eval(double u, double v) const;
};

struct Primitive {
  enum class Kind { plane, box };

  Kind kind = Kind::plane;
  // plane: point + unit normal; extents <= 0 mean unbounded
  Vec3 point = Vec3(0.0, 0.0, 5.0);
  Vec3 normal = Vec3(0.0, 0.0, -1.0);
  double extent_u = -1.0;
  double extent_v = -1.0;
  // box: axis-aligned bounds in its rest frame
  Vec3 box_min = Vec3::Zero();
  Vec3 box_max = Vec3::Zero();
  Texture texture;
  bool moving = false;

  static Primitive make_plane(const Vec3 &point, const Vec3 &normal,
                              const Texture &texture, double extent_u = -1.0,
                              double extent_v = -1.0);
  static Primitive make_box(const Vec3 &box_min, const Vec3 &box_max,
                            const Texture &texture);
};

// Two-view test scene with exact geometry. Cameras are world-to-camera
// transforms; one ray is cast per pixel center.
struct SceneSpec {
  int width = 64;
  int height = 48;
  int channels = 1;
  CameraIntrinsics intrinsics;
  std::vector<Primitive> primitives;
  // Rigid displacement applied to `moving` primitives in the second view.
  PoseSE3 object_motion;
  bool has_object_motion = false;
};

struct RenderResult {
  ImageBuffer image;
  DepthMap depth;          // exact first-hit z-depth
  PixelMask moving_mask;   // first hit belongs to a moving primitive
};

// at_second_time displaces moving primitives by the scene's object motion.
RenderResult render(const SceneSpec &scene, const PoseSE3 &camera_pose,
                    bool at_second_time = false);

struct RenderedPair {
  RenderResult view1;
  RenderResult view2;
  // Ground-truth correspondence field from view 1 into view 2, following
  // each surface point (including object motion). Occlusion is not applied.
  WarpField flow;
};

RenderedPair render_pair(const SceneSpec &scene, const PoseSE3 &pose1,
                         const PoseSE3 &pose2);

struct CorrespondenceSet {
  std::vector<Correspondence> matches;
  std::vector<bool> is_inlier;
};

// Samples co-visible static surface points, projects them into both views,
// adds Gaussian pixel noise, and replaces the last floor(outlier_frac * n)
// entries with uniform random matches. Deterministic given the seed.
CorrespondenceSet exact_correspondences(const SceneSpec &scene,
                                        const PoseSE3 &pose1,
                                        const PoseSE3 &pose2, int n,
                                        double noise_px, double outlier_frac,
                                        std::uint64_t seed);

// Marks the last primitive as moving (if none is) and installs the motion.
SceneSpec inject_moving_object(const SceneSpec &scene,
                               const PoseSE3 &object_motion);

}  // namespace epigeo
