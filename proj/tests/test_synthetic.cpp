#include "doctest.h"

#include <random>

#include "epigeo/losses.hpp"
#include "epigeo/synthetic.hpp"
#include "epigeo/warp.hpp"
#include "test_support.hpp"

using namespace epigeo;
using namespace epigeo::testing;

TEST_CASE("render: fronto-parallel plane has constant depth") {
  SceneSpec scene;
  scene.width = 32;
  scene.height = 24;
  scene.intrinsics = CameraIntrinsics::from(20.0, 20.0, 16.0, 12.0);
  scene.primitives.push_back(Primitive::make_plane(
      Vec3(0.0, 0.0, 5.0), Vec3(0.0, 0.0, -1.0), Texture{}));
  const RenderResult r = render(scene, PoseSE3::identity());
  CHECK(r.depth.valid_count() == 32 * 24);
  for (double d : r.depth.depth) CHECK(d == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("render: tilted plane matches the closed-form intersection") {
  SceneSpec scene;
  scene.width = 24;
  scene.height = 20;
  scene.intrinsics = CameraIntrinsics::from(18.0, 18.0, 12.0, 10.0);
  const double theta = 0.3;
  const Vec3 normal(0.0, std::sin(theta), -std::cos(theta));
  const Vec3 point(0.0, 0.0, 6.0);
  scene.primitives.push_back(Primitive::make_plane(point, normal, Texture{}));
  const RenderResult r = render(scene, PoseSE3::identity());
  const Mat3 ki = scene.intrinsics.inverse_matrix();
  for (int y = 0; y < scene.height; ++y) {
    for (int x = 0; x < scene.width; ++x) {
      REQUIRE(r.depth.is_valid(x, y));
      const Vec3 dir = ki * Vec3(x, y, 1.0);
      const double expected = normal.dot(point) / normal.dot(dir);
      CHECK(r.depth.at(x, y) == doctest::Approx(expected).epsilon(1e-12));
    }
  }
  // Inverse depth is affine in the pixel row for a plane tilted about x.
  const double d0 = 1.0 / r.depth.at(5, 2);
  const double d1 = 1.0 / r.depth.at(5, 3);
  const double d2 = 1.0 / r.depth.at(5, 4);
  CHECK(std::abs((d2 - d1) - (d1 - d0)) < 1e-12);
}

TEST_CASE("render: camera behind the plane sees nothing") {
  SceneSpec scene;
  scene.width = 8;
  scene.height = 8;
  scene.intrinsics = CameraIntrinsics::from(6.0, 6.0, 4.0, 4.0);
  scene.primitives.push_back(Primitive::make_plane(
      Vec3(0.0, 0.0, 5.0), Vec3(0.0, 0.0, -1.0), Texture{}));
  // Move the camera past the plane (world-to-camera with t = (0,0,-10)).
  const RenderResult r = render(scene, {Mat3::Identity(), {0.0, 0.0, -10.0}});
  CHECK(r.depth.valid_count() == 0);
}

TEST_CASE("render: empty scene is rejected") {
  SceneSpec scene;
  scene.primitives.clear();
  CHECK_THROWS_AS(render(scene, PoseSE3::identity()), Error);
}

TEST_CASE("render_pair flow matches warp_pixel for static scenes") {
  const SceneSpec scene = make_consistency_scene(48, 36);
  const PoseSE3 p1 = PoseSE3::identity();
  const PoseSE3 p2{rotation_exp(Vec3(0.01, -0.02, 0.005)), Vec3(0.15, 0.05, 0.1)};
  const RenderedPair pair = render_pair(scene, p1, p2);
  const PoseSE3 rel = relative_pose(p1, p2);
  int compared = 0;
  for (int y = 0; y < scene.height; ++y) {
    for (int x = 0; x < scene.width; ++x) {
      if (!pair.flow.is_valid(x, y)) continue;
      REQUIRE(pair.view1.depth.is_valid(x, y));
      const WarpResult w =
          warp_pixel(scene.intrinsics, rel, pair.view1.depth.at(x, y),
                     {static_cast<double>(x), static_cast<double>(y)});
      REQUIRE(w.valid);
      CHECK((w.coord - pair.flow.coord(x, y)).norm() < 1e-9);
      ++compared;
    }
  }
  CHECK(compared > 1000);
}

TEST_CASE("warp consistency: exact pose and depth reproduce the target") {
  const SceneSpec scene = make_consistency_scene(128, 96);
  const PoseSE3 p1 = PoseSE3::identity();
  const PoseSE3 p2{rotation_exp(Vec3(0.005, -0.012, 0.004)),
                   Vec3(0.12, 0.04, 0.08)};
  const RenderResult target = render(scene, p1);
  const RenderResult source = render(scene, p2);
  const PoseSE3 rel = relative_pose(p1, p2);

  const SynthesisResult synth =
      synthesize_view(source.image, target.depth, rel, scene.intrinsics);
  REQUIRE(synth.mask.valid_count() > 5000);
  const ScalarLoss photo = photometric_loss(target.image, synth.warped, synth.mask);
  CHECK(photo.value < 1e-3);

  // Halving the texture frequency shrinks the resampling error.
  const SceneSpec low = make_consistency_scene(128, 96, 0.5);
  const RenderResult t2 = render(low, p1);
  const RenderResult s2 = render(low, p2);
  const SynthesisResult synth2 =
      synthesize_view(s2.image, t2.depth, rel, low.intrinsics);
  const ScalarLoss photo2 = photometric_loss(t2.image, synth2.warped, synth2.mask);
  CHECK(photo2.value < photo.value);
}

TEST_CASE("exact_correspondences: zero noise satisfies the true epipolar geometry") {
  const SceneSpec scene = make_consistency_scene(64, 48);
  const PoseSE3 p1 = PoseSE3::identity();
  const PoseSE3 p2{rotation_exp(Vec3(0.02, 0.01, -0.01)), Vec3(0.2, -0.1, 0.05)};
  const CorrespondenceSet set =
      exact_correspondences(scene, p1, p2, 100, 0.0, 0.0, 42);
  REQUIRE(set.matches.size() == 100);
  const EssentialMatrix e = essential_from_pose(relative_pose(p1, p2));
  for (const Correspondence &c : set.matches) {
    const NormalizedCoord n1 = normalize_pixel(scene.intrinsics, c.view1);
    const NormalizedCoord n2 = normalize_pixel(scene.intrinsics, c.view2);
    CHECK(epipolar_residual(e, n1, n2) < 1e-10);
  }
}

TEST_CASE("exact_correspondences: outlier labels are exact") {
  const SceneSpec scene = make_consistency_scene(64, 48);
  const PoseSE3 p2{Mat3::Identity(), {0.3, 0.0, 0.0}};
  const CorrespondenceSet set =
      exact_correspondences(scene, PoseSE3::identity(), p2, 50, 0.0, 0.3, 7);
  CHECK(set.matches.size() == 50);
  int outliers = 0;
  for (bool inlier : set.is_inlier) outliers += inlier ? 0 : 1;
  CHECK(outliers == 15);  // floor(0.3 * 50)
  for (size_t i = 0; i < set.is_inlier.size(); ++i) {
    CHECK(set.is_inlier[i] == (i < 35));
  }
}

TEST_CASE("exact_correspondences: deterministic given the seed") {
  const SceneSpec scene = make_consistency_scene(64, 48);
  const PoseSE3 p2{Mat3::Identity(), {0.3, 0.0, 0.0}};
  const CorrespondenceSet a =
      exact_correspondences(scene, PoseSE3::identity(), p2, 60, 0.5, 0.2, 911);
  const CorrespondenceSet b =
      exact_correspondences(scene, PoseSE3::identity(), p2, 60, 0.5, 0.2, 911);
  REQUIRE(a.matches.size() == b.matches.size());
  for (size_t i = 0; i < a.matches.size(); ++i) {
    CHECK(a.matches[i].view1.x == b.matches[i].view1.x);
    CHECK(a.matches[i].view2.y == b.matches[i].view2.y);
  }
}

TEST_CASE("exact_correspondences avoid moving surfaces") {
  SceneSpec scene = make_object_scene(96, 72);
  scene = inject_moving_object(scene, {Mat3::Identity(), {0.0, 0.6, 0.0}});
  const PoseSE3 p1 = PoseSE3::identity();
  const PoseSE3 p2{Mat3::Identity(), {0.25, 0.0, 0.0}};
  const CorrespondenceSet set = exact_correspondences(scene, p1, p2, 80, 0.0, 0.0, 3);
  // Static sampling: every match satisfies the camera-only geometry even
  // though the object moved.
  const EssentialMatrix e = essential_from_pose(relative_pose(p1, p2));
  for (const Correspondence &c : set.matches) {
    CHECK(epipolar_residual(e, normalize_pixel(scene.intrinsics, c.view1),
                            normalize_pixel(scene.intrinsics, c.view2)) < 1e-10);
  }
}

TEST_CASE("exact_correspondences: visibility failure") {
  SceneSpec scene = make_consistency_scene(32, 24);
  // Second camera looks at nothing (far behind the plane).
  const PoseSE3 p2{Mat3::Identity(), {0.0, 0.0, -50.0}};
  CHECK_THROWS_AS(
      exact_correspondences(scene, PoseSE3::identity(), p2, 20, 0.0, 0.0, 1),
      Error);
}

TEST_CASE("inject_moving_object: zero motion leaves the views identical") {
  SceneSpec scene = make_object_scene(64, 48);
  const SceneSpec injected =
      inject_moving_object(scene, {Mat3::Identity(), Vec3::Zero()});
  const PoseSE3 p2{Mat3::Identity(), {0.2, 0.0, 0.0}};
  const RenderResult a = render(scene, p2, /*at_second_time=*/false);
  const RenderResult b = render(injected, p2, /*at_second_time=*/true);
  CHECK(a.image.data == b.image.data);
  CHECK(a.depth.depth == b.depth.depth);
}

TEST_CASE("inject_moving_object: moving pixels violate the camera-only geometry") {
  SceneSpec scene = make_object_scene(96, 72);
  const SceneSpec injected =
      inject_moving_object(scene, {Mat3::Identity(), {0.0, 0.5, 0.0}});
  const PoseSE3 p1 = PoseSE3::identity();
  const PoseSE3 p2{Mat3::Identity(), {0.3, 0.0, 0.02}};
  const RenderedPair pair = render_pair(injected, p1, p2);
  const EssentialMatrix e = essential_from_pose(relative_pose(p1, p2));
  const Mat3 ki = injected.intrinsics.inverse_matrix();

  std::vector<double> moving_res, static_res;
  for (int y = 0; y < injected.height; ++y) {
    for (int x = 0; x < injected.width; ++x) {
      if (!pair.flow.is_valid(x, y)) continue;
      const Vec3 n1 = ki * Vec3(x, y, 1.0);
      const Vec2 &c = pair.flow.coord(x, y);
      const Vec3 n2 = ki * Vec3(c.x(), c.y(), 1.0);
      const double r = std::abs(n2.dot(e.m * n1));
      if (pair.view1.moving_mask.is_valid(x, y)) {
        moving_res.push_back(r);
      } else {
        static_res.push_back(r);
      }
    }
  }
  REQUIRE(moving_res.size() > 300);
  REQUIRE(static_res.size() > 3000);
  std::nth_element(static_res.begin(), static_res.begin() + static_res.size() / 2,
                   static_res.end());
  const double static_median = static_res[static_res.size() / 2];
  for (double r : moving_res) {
    CHECK(r > 10.0 * static_median);
  }
  // The violation is also material in absolute terms.
  double mean_moving = 0.0;
  for (double r : moving_res) mean_moving += r;
  CHECK(mean_moving / moving_res.size() > 1e-4);
}

TEST_CASE("inject_moving_object: fully occluded object leaves an empty mask") {
  SceneSpec scene = make_consistency_scene(48, 36);
  Texture tex;
  // Box hidden behind the backdrop plane.
  scene.primitives.push_back(
      Primitive::make_box(Vec3(-1.0, -1.0, 20.0), Vec3(1.0, 1.0, 21.0), tex));
  const SceneSpec injected =
      inject_moving_object(scene, {Mat3::Identity(), {0.3, 0.0, 0.0}});
  const RenderResult r = render(injected, PoseSE3::identity());
  CHECK(r.moving_mask.valid_count() == 0);
}

TEST_CASE("render determinism: identical spec gives identical output") {
  const SceneSpec scene = make_object_scene(64, 48, 5);
  const PoseSE3 pose{rotation_exp(Vec3(0.01, 0.0, 0.0)), Vec3(0.1, 0.0, 0.0)};
  const RenderResult a = render(scene, pose);
  const RenderResult b = render(scene, pose);
  CHECK(a.image.data == b.image.data);
  CHECK(a.depth.depth == b.depth.depth);
  CHECK(a.depth.valid == b.depth.valid);
}

TEST_CASE("rendered moving-object scene: box coverage near 15 percent") {
  const SceneSpec scene = make_object_scene(128, 96);
  const RenderResult r = render(scene, PoseSE3::identity());
  int box_pixels = 0;
  for (int y = 0; y < scene.height; ++y) {
    for (int x = 0; x < scene.width; ++x) {
      // The box is the nearer surface; its depth is below the backdrop.
      if (r.depth.is_valid(x, y) && r.depth.at(x, y) < 5.5) ++box_pixels;
    }
  }
  const double frac = static_cast<double>(box_pixels) / (128.0 * 96.0);
  CHECK(frac > 0.10);
  CHECK(frac < 0.22);
}

TEST_CASE("exact correspondences are a RANSAC fixed point") {
  const SceneSpec scene = make_consistency_scene(64, 48);
  const PoseSE3 p1 = PoseSE3::identity();
  const PoseSE3 p2{rotation_exp(Vec3(0.015, -0.01, 0.0)), Vec3(0.25, 0.05, 0.0)};
  const CorrespondenceSet set =
      exact_correspondences(scene, p1, p2, 120, 0.0, 0.0, 77);
  RansacConfig cfg;
  cfg.seed = 3;
  const RansacResult res =
      ransac_essential(set.matches, scene.intrinsics, scene.intrinsics, cfg);
  CHECK(res.inlier_count() == 120);
  CHECK(essential_distance(res.essential.m,
                           essential_from_pose(relative_pose(p1, p2)).m) < 1e-6);
}
