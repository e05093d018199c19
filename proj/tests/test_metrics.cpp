#include "doctest.h"

#include <random>

#include "epigeo/metrics.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace epigeo;
using namespace epigeo::testing;

namespace {

DepthMap single_pixel(double v) { return DepthMap::from_data(1, 1, {v}); }

DepthMap random_sparse_depth(std::mt19937_64 &rng, int w, int h) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_real_distribution<double> ud(0.2, 95.0);
  std::vector<double> vals(static_cast<size_t>(w) * h, 0.0);
  for (double &v : vals) {
    if (u(rng) < 0.7) v = ud(rng);  // 30% invalid, some beyond the cap
  }
  return DepthMap::from_data(w, h, std::move(vals));
}

TrajectorySnippet snippet(std::initializer_list<Vec3> ts) {
  TrajectorySnippet s;
  int id = 0;
  for (const Vec3 &t : ts) {
    s.poses.push_back({Mat3::Identity(), t});
    s.frame_ids.push_back(id++);
  }
  return s;
}

}  // namespace

TEST_CASE("eval_depth: perfect prediction") {
  std::mt19937_64 rng(3);
  const DepthMap gt = random_sparse_depth(rng, 16, 16);
  DepthEvalConfig cfg;
  const DepthEvalResult r = eval_depth(gt, gt, cfg);
  CHECK(r.abs_rel == 0.0);
  CHECK(r.sq_rel == 0.0);
  CHECK(r.rmse == 0.0);
  CHECK(r.rmse_log == 0.0);
  CHECK(r.acc_1 == 1.0);
  CHECK(r.acc_2 == 1.0);
  CHECK(r.acc_3 == 1.0);
}

TEST_CASE("eval_depth: median scaling removes a constant factor") {
  std::mt19937_64 rng(5);
  const DepthMap gt = random_sparse_depth(rng, 16, 16);
  DepthMap pred = gt;
  for (size_t i = 0; i < pred.depth.size(); ++i) {
    if (pred.valid[i]) pred.depth[i] *= 2.0;
  }
  DepthEvalConfig cfg;
  cfg.median_scaling = true;
  const DepthEvalResult r = eval_depth(pred, gt, cfg);
  CHECK(r.abs_rel < 1e-12);
  CHECK(r.rmse < 1e-10);
  CHECK(r.acc_1 == 1.0);
}

TEST_CASE("eval_depth: hand case pred=2 gt=1 without scaling") {
  DepthEvalConfig cfg;
  cfg.median_scaling = false;
  const DepthEvalResult r = eval_depth(single_pixel(2.0), single_pixel(1.0), cfg);
  CHECK(r.abs_rel == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(r.sq_rel == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(r.rmse == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(r.rmse_log == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  // delta = 2 exceeds 1.25, 1.25^2 = 1.5625 and 1.25^3 = 1.953125.
  CHECK(r.acc_1 == 0.0);
  CHECK(r.acc_2 == 0.0);
  CHECK(r.acc_3 == 0.0);
}

TEST_CASE("eval_depth: accuracy thresholds straddle 1.25 powers") {
  DepthEvalConfig cfg;
  cfg.median_scaling = false;
  // delta = 1.3: inside 1.25^2 but outside 1.25.
  const DepthEvalResult r = eval_depth(single_pixel(1.3), single_pixel(1.0), cfg);
  CHECK(r.acc_1 == 0.0);
  CHECK(r.acc_2 == 1.0);
  CHECK(r.acc_3 == 1.0);
}

TEST_CASE("eval_depth matches the scalar-loop reference on random maps") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const DepthMap gt = random_sparse_depth(rng, 32, 32);
    DepthMap pred = random_sparse_depth(rng, 32, 32);
    // Ensure predictions are valid wherever gt is (sparse gt dominates).
    for (size_t i = 0; i < pred.depth.size(); ++i) {
      if (!pred.valid[i]) {
        pred.depth[i] = 1.0;
        pred.valid[i] = 1;
      }
    }
    DepthEvalConfig cfg;
    cfg.cap = trial % 2 == 0 ? 80.0 : 50.0;
    cfg.median_scaling = trial % 3 != 0;
    if (trial % 4 == 0) cfg.crop = CropRect{4, 6, 20, 18};
    const DepthEvalResult a = eval_depth(pred, gt, cfg);
    const DepthEvalResult b = eval_depth_reference(pred, gt, cfg);
    CHECK(std::abs(a.abs_rel - b.abs_rel) < 1e-12);
    CHECK(std::abs(a.sq_rel - b.sq_rel) < 1e-12);
    CHECK(std::abs(a.rmse - b.rmse) < 1e-12);
    CHECK(std::abs(a.rmse_log - b.rmse_log) < 1e-12);
    CHECK(a.acc_1 == b.acc_1);
    CHECK(a.acc_2 == b.acc_2);
    CHECK(a.acc_3 == b.acc_3);
    CHECK(a.acc_1 <= a.acc_2);
    CHECK(a.acc_2 <= a.acc_3);
  }
}

TEST_CASE("eval_depth: scale invariance under median scaling") {
  std::mt19937_64 rng(11);
  const DepthMap gt = random_sparse_depth(rng, 24, 24);
  DepthMap pred = random_sparse_depth(rng, 24, 24);
  for (size_t i = 0; i < pred.depth.size(); ++i) {
    if (!pred.valid[i]) {
      pred.depth[i] = 2.0;
      pred.valid[i] = 1;
    }
  }
  DepthEvalConfig cfg;
  cfg.median_scaling = true;
  const DepthEvalResult base = eval_depth(pred, gt, cfg);
  for (double s : {0.13, 3.7, 41.0}) {
    DepthMap scaled = pred;
    for (size_t i = 0; i < scaled.depth.size(); ++i) scaled.depth[i] *= s;
    const DepthEvalResult r = eval_depth(scaled, gt, cfg);
    CHECK(std::abs(r.abs_rel - base.abs_rel) < 1e-12);
    CHECK(std::abs(r.sq_rel - base.sq_rel) < 1e-12);
    CHECK(std::abs(r.rmse - base.rmse) < 1e-12);
    CHECK(std::abs(r.rmse_log - base.rmse_log) < 1e-12);
    CHECK(r.acc_1 == base.acc_1);
    CHECK(r.acc_2 == base.acc_2);
    CHECK(r.acc_3 == base.acc_3);
  }
}

TEST_CASE("eval_depth: errors and validation") {
  CHECK_THROWS_AS(eval_depth(single_pixel(1.0), DepthMap::create(1, 1),
                             DepthEvalConfig{}),
                  Error);
  DepthEvalConfig bad;
  bad.cap = 1e-4;  // below min_depth
  CHECK_THROWS_AS(eval_depth(single_pixel(1.0), single_pixel(1.0), bad), Error);
  CHECK_THROWS_AS(eval_depth(single_pixel(1.0), DepthMap::create(2, 1),
                             DepthEvalConfig{}),
                  Error);
}

TEST_CASE("ate_snippet: exact and scale-corrected cases") {
  const TrajectorySnippet gt =
      snippet({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0)});
  SUBCASE("identical snippets give zero") {
    CHECK(ate_snippet(gt, gt) == 0.0);
  }
  SUBCASE("doubled translations are scale-corrected away") {
    const TrajectorySnippet pred =
        snippet({Vec3(0, 0, 0), Vec3(2, 0, 0), Vec3(4, 0, 0)});
    CHECK(ate_snippet(pred, gt) < 1e-12);
  }
}

TEST_CASE("ate_snippet agrees with the grid-search oracle") {
  const TrajectorySnippet gt =
      snippet({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0)});
  const TrajectorySnippet pred =
      snippet({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 0, 0)});
  const double got = ate_snippet(pred, gt);
  const double expected = ate_grid_search_reference(
      {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 0, 0)},
      {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0)});
  CHECK(got == doctest::Approx(expected).epsilon(1e-5));
  // Closed form: s = 3/2, errors {0, 1/2, -1/2} -> sqrt(1/6).
  CHECK(got == doctest::Approx(std::sqrt(1.0 / 6.0)).epsilon(1e-12));
}

TEST_CASE("ate_snippet: scale invariance property") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    TrajectorySnippet gt, pred;
    for (int i = 0; i < 3; ++i) {
      gt.poses.push_back({random_rotation(rng, 0.2), Vec3(u(rng), u(rng), u(rng))});
      pred.poses.push_back({random_rotation(rng, 0.2), Vec3(u(rng), u(rng), u(rng))});
      gt.frame_ids.push_back(i);
      pred.frame_ids.push_back(i);
    }
    const double base = ate_snippet(pred, gt);
    TrajectorySnippet scaled = pred;
    for (PoseSE3 &p : scaled.poses) p.t *= 7.3;
    CHECK(ate_snippet(scaled, gt) == doctest::Approx(base).epsilon(1e-9));
  }
}

TEST_CASE("ate_snippet: misaligned snippets are rejected") {
  const TrajectorySnippet a = snippet({Vec3(0, 0, 0), Vec3(1, 0, 0)});
  TrajectorySnippet b = snippet({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0)});
  CHECK_THROWS_AS(ate_snippet(a, b), Error);
  TrajectorySnippet c = a;
  c.frame_ids = {5, 6};
  CHECK_THROWS_AS(ate_snippet(a, c), Error);
  TrajectorySnippet single;
  single.poses.push_back(PoseSE3::identity());
  single.frame_ids.push_back(0);
  CHECK_THROWS_AS(ate_snippet(single, single), Error);
}

TEST_CASE("atde: hand cases") {
  CHECK(atde(Vec3(3, 0, 0), Vec3(0.5, 0, 0)) == 0.0);
  CHECK(atde(Vec3(1, 0, 0), Vec3(-2, 0, 0)) == doctest::Approx(M_PI).epsilon(1e-15));
  CHECK(atde(Vec3(1, 0, 0), Vec3(1, 1, 0)) ==
        doctest::Approx(M_PI / 4.0).epsilon(1e-15));
}

TEST_CASE("atde: scale invariance and degenerate input") {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 100; ++i) {
    const Vec3 a = random_unit(rng);
    const Vec3 b = random_unit(rng);
    const double base = atde(a, b);
    CHECK(atde(5.5 * a, b) == doctest::Approx(base).epsilon(1e-12));
    CHECK(atde(a, 0.01 * b) == doctest::Approx(base).epsilon(1e-12));
    CHECK(base >= 0.0);
    CHECK(base <= M_PI);
  }
  CHECK_THROWS_AS(atde(Vec3::Zero(), Vec3(1, 0, 0)), Error);
}

TEST_CASE("evaluate_trajectories: sliding snippets") {
  std::mt19937_64 rng(19);
  std::vector<PoseSE3> traj;
  PoseSE3 current = PoseSE3::identity();
  for (int i = 0; i < 10; ++i) {
    traj.push_back(current);
    current = current.compose({random_rotation(rng, 0.05), Vec3(1.0, 0.1, 0.02)});
  }
  const PoseEvalSummary s = evaluate_trajectories(traj, traj, 3);
  CHECK(s.snippet_count == 8);
  CHECK(s.ate_mean == 0.0);
  CHECK(s.atde_mean == 0.0);
  CHECK(s.ate_std == 0.0);

  std::vector<PoseSE3> doubled = traj;
  for (PoseSE3 &p : doubled) p.t *= 2.0;
  const PoseEvalSummary s2 = evaluate_trajectories(doubled, traj, 3);
  CHECK(s2.ate_mean < 1e-12);
  CHECK(s2.atde_mean < 1e-12);

  CHECK_THROWS_AS(evaluate_trajectories(traj, std::vector<PoseSE3>(traj.begin(),
                                                                   traj.end() - 1),
                                        3),
                  Error);
}
