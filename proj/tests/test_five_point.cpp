#include "doctest.h"

#include <random>

#include "epigeo/five_point.hpp"
#include "test_support.hpp"

using namespace epigeo;
using namespace epigeo::testing;

namespace {

// Pixel-space matches for RANSAC tests, built from exact projections.
std::vector<Correspondence> to_pixel_matches(const TwoViewInstance &inst,
                                             const CameraIntrinsics &k) {
  std::vector<Correspondence> out;
  for (size_t i = 0; i < inst.x1.size(); ++i) {
    out.push_back({denormalize_coord(k, inst.x1[i]),
                   denormalize_coord(k, inst.x2[i])});
  }
  return out;
}

}  // namespace

TEST_CASE("minimal solver: exact instances contain the true essential matrix") {
  std::mt19937_64 rng(101);
  int found = 0;
  const int trials = 500;
  for (int t = 0; t < trials; ++t) {
    const TwoViewInstance inst = random_two_view(rng, 5);
    const EssentialMatrix truth = essential_from_pose(inst.pose);
    const MinimalSolution sol = solve_essential_minimal(inst.x1, inst.x2);
    CHECK(sol.candidates.size() <= 10);
    CHECK(!sol.candidates.empty());

    double best = 1e9;
    for (const EssentialMatrix &cand : sol.candidates) {
      best = std::min(best, essential_distance(cand.m, truth.m));
      // Every candidate interpolates the five constraints.
      double max_r = 0.0;
      for (int i = 0; i < 5; ++i) {
        max_r = std::max(max_r, epipolar_residual(cand, inst.x1[i], inst.x2[i]));
      }
      CHECK(max_r < 1e-8);
      // Valid essential matrix structure: det and the trace constraint.
      CHECK(std::abs(cand.m.determinant()) < 1e-8);
      const Mat3 tc = cand.m * cand.m.transpose() * cand.m -
                      0.5 * (cand.m * cand.m.transpose()).trace() * cand.m;
      CHECK(tc.cwiseAbs().maxCoeff() < 1e-6);
    }
    if (best < 1e-6) ++found;
  }
  CHECK(found == trials);
}

TEST_CASE("minimal solver: pure sideways translation") {
  std::mt19937_64 rng(103);
  std::uniform_real_distribution<double> ux(-1.0, 1.0);
  std::uniform_real_distribution<double> uz(4.0, 9.0);
  const PoseSE3 pose{Mat3::Identity(), {1.0, 0.0, 0.0}};
  std::vector<NormalizedCoord> x1, x2;
  for (int i = 0; i < 5; ++i) {
    const Vec3 x(ux(rng), ux(rng), uz(rng));
    const Vec3 y = pose.apply(x);
    x1.push_back({x.x() / x.z(), x.y() / x.z()});
    x2.push_back({y.x() / y.z(), y.y() / y.z()});
  }
  const MinimalSolution sol = solve_essential_minimal(x1, x2);
  const EssentialMatrix truth = essential_from_pose(pose);
  double best = 1e9;
  for (const EssentialMatrix &cand : sol.candidates) {
    best = std::min(best, essential_distance(cand.m, truth.m));
  }
  CHECK(best < 1e-6);
}

TEST_CASE("minimal solver: degenerate inputs") {
  std::vector<NormalizedCoord> same1(5, NormalizedCoord{0.1, 0.2});
  std::vector<NormalizedCoord> same2(5, NormalizedCoord{0.3, 0.1});
  CHECK_THROWS_AS(solve_essential_minimal(same1, same2), Error);
  try {
    solve_essential_minimal(same1, same2);
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::degenerate_configuration);
  }

  std::vector<NormalizedCoord> four1(4), four2(4);
  CHECK_THROWS_AS(solve_essential_minimal(four1, four2), Error);
}

TEST_CASE("triangulate: hand-constructed point") {
  const PoseSE3 pose{Mat3::Identity(), {1.0, 0.0, 0.0}};
  // X = (0, 0, 5): view 1 sees (0, 0), view 2 sees (1, 0, 5) -> (0.2, 0).
  const TriangulatedPoint tp = triangulate({0.0, 0.0}, {0.2, 0.0}, pose);
  CHECK((tp.point - Vec3(0.0, 0.0, 5.0)).norm() < 1e-9);
  CHECK(tp.depth1 == doctest::Approx(5.0).epsilon(1e-9));
  CHECK(tp.depth2 == doctest::Approx(5.0).epsilon(1e-9));
}

TEST_CASE("triangulate: point behind the second camera") {
  // Second camera far ahead along +z: X sits behind it.
  const PoseSE3 pose{Mat3::Identity(), {0.0, 0.0, -20.0}};
  const Vec3 x(0.5, 0.0, 5.0);
  const Vec3 y = pose.apply(x);  // z = -15
  const TriangulatedPoint tp = triangulate({x.x() / x.z(), x.y() / x.z()},
                                           {y.x() / y.z(), y.y() / y.z()}, pose);
  CHECK(tp.depth1 > 0.0);
  CHECK(tp.depth2 < 0.0);
}

TEST_CASE("triangulate: zero baseline") {
  CHECK_THROWS_AS(triangulate({0.0, 0.0}, {0.0, 0.0},
                              PoseSE3{Mat3::Identity(), Vec3::Zero()}),
                  Error);
}

TEST_CASE("triangulate: parallel rays") {
  // Identical directions with a sideways baseline never meet.
  const PoseSE3 pose{Mat3::Identity(), {1.0, 0.0, 0.0}};
  CHECK_THROWS_AS(triangulate({0.1, 0.2}, {0.1, 0.2}, pose), Error);
}

TEST_CASE("decompose_essential recovers the pose") {
  std::mt19937_64 rng(107);
  for (int t = 0; t < 50; ++t) {
    TwoViewInstance inst = random_two_view(rng, 50);
    inst.pose.t.normalize();
    const EssentialMatrix e = essential_from_pose(inst.pose);
    const PoseSE3 pose = decompose_essential(e, inst.x1, inst.x2);
    CHECK(rotation_angle_between(pose.R, inst.pose.R) < 1e-6);
    CHECK(direction_angle_between(pose.t, inst.pose.t) < 1e-6);

    EssentialMatrix neg = e;
    neg.m = -neg.m;
    const PoseSE3 pose2 = decompose_essential(neg, inst.x1, inst.x2);
    CHECK(rotation_angle_between(pose2.R, pose.R) < 1e-9);
    CHECK((pose2.t - pose.t).norm() < 1e-9);
  }
}

TEST_CASE("decompose_essential: empty inlier set") {
  const EssentialMatrix e =
      essential_from_pose({Mat3::Identity(), {1.0, 0.0, 0.0}});
  std::vector<NormalizedCoord> empty;
  CHECK_THROWS_AS(decompose_essential(e, empty, empty), Error);
  try {
    decompose_essential(e, empty, empty);
  } catch (const Error &err) {
    CHECK(err.code() == ErrorCode::ambiguous_decomposition);
  }
}

TEST_CASE("decomposition round trip over random poses") {
  std::mt19937_64 rng(109);
  for (int t = 0; t < 100; ++t) {
    TwoViewInstance inst = random_two_view(rng, 20);
    inst.pose.t.normalize();
    const PoseSE3 pose =
        decompose_essential(essential_from_pose(inst.pose), inst.x1, inst.x2);
    CHECK(rotation_angle_between(pose.R, inst.pose.R) < 1e-6);
    CHECK(direction_angle_between(pose.t, inst.pose.t) < 1e-6);
  }
}

TEST_CASE("ransac: exact matches, no outliers") {
  std::mt19937_64 rng(211);
  const auto k = CameraIntrinsics::from(200.0, 200.0, 160.0, 120.0);
  const TwoViewInstance inst = random_two_view(rng, 200);
  const auto matches = to_pixel_matches(inst, k);

  RansacConfig cfg;
  cfg.seed = 5;
  const RansacResult res = ransac_essential(matches, k, k, cfg);
  CHECK(res.inlier_count() == 200);
  CHECK(essential_distance(res.essential.m, essential_from_pose(inst.pose).m) <
        1e-6);
  CHECK(res.inlier_residual_rms < 1e-10);
}

TEST_CASE("ransac: 30 percent outliers") {
  std::mt19937_64 rng(223);
  const auto k = CameraIntrinsics::from(200.0, 200.0, 160.0, 120.0);
  TwoViewInstance inst = random_two_view(rng, 140);
  inst.pose.t.normalize();
  auto matches = to_pixel_matches(inst, k);
  std::uniform_real_distribution<double> ux(0.0, 320.0), uy(0.0, 240.0);
  for (int i = 0; i < 60; ++i) {
    matches.push_back({{ux(rng), uy(rng)}, {ux(rng), uy(rng)}});
  }

  RansacConfig cfg;
  cfg.seed = 17;
  const RansacResult res = ransac_essential(matches, k, k, cfg);
  int recovered = 0;
  for (int i = 0; i < 140; ++i) recovered += res.inlier_mask[i] ? 1 : 0;
  CHECK(recovered >= 133);  // >= 95% of the 140 true inliers

  std::vector<Correspondence> inliers;
  for (size_t i = 0; i < matches.size(); ++i) {
    if (res.inlier_mask[i]) inliers.push_back(matches[i]);
  }
  const PoseSE3 pose = decompose_essential(res.essential, inliers, k, k);
  CHECK(direction_angle_between(pose.t, inst.pose.t) < 0.5 * M_PI / 180.0);
}

TEST_CASE("ransac: determinism bit for bit") {
  std::mt19937_64 rng(227);
  const auto k = CameraIntrinsics::from(200.0, 200.0, 160.0, 120.0);
  TwoViewInstance inst = random_two_view(rng, 80);
  auto matches = to_pixel_matches(inst, k);
  std::uniform_real_distribution<double> ux(0.0, 320.0), uy(0.0, 240.0);
  for (int i = 0; i < 20; ++i) {
    matches.push_back({{ux(rng), uy(rng)}, {ux(rng), uy(rng)}});
  }
  RansacConfig cfg;
  cfg.seed = 99;
  const RansacResult a = ransac_essential(matches, k, k, cfg);
  const RansacResult b = ransac_essential(matches, k, k, cfg);
  CHECK(a.inlier_mask == b.inlier_mask);
  CHECK(a.iterations_used == b.iterations_used);
  CHECK(std::memcmp(a.essential.m.data(), b.essential.m.data(),
                    9 * sizeof(double)) == 0);
  CHECK(a.inlier_residual_rms == b.inlier_residual_rms);
}

TEST_CASE("ransac: insufficient matches") {
  const auto k = CameraIntrinsics::identity();
  std::vector<Correspondence> four(4, Correspondence{{0, 0}, {1, 1}});
  CHECK_THROWS_AS(ransac_essential(four, k, k, RansacConfig{}), Error);
  try {
    ransac_essential(four, k, k, RansacConfig{});
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::insufficient_data);
  }
}

TEST_CASE("ransac config validation") {
  RansacConfig bad;
  bad.threshold = -1.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = RansacConfig{};
  bad.confidence = 1.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}
