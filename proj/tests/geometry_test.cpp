#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "coopcast/geometry.hpp"
#include "coopcast/rng.hpp"
#include "coopcast/scene.hpp"

using namespace coopcast;
using namespace coopcast::geometry;

namespace {

// Random rig with bounded pitch so rotation_to_euler stays away from gimbal
// lock; returns points visible to both cameras.
scene::CameraRig random_rig(Rng& rng) {
  const EulerAngles e(rng.uniform(-30.0, 30.0), rng.uniform(-45.0, 45.0),
                      rng.uniform(-60.0, 60.0));
  const Eigen::Vector3d dir =
      Eigen::Vector3d(rng.uniform(0.5, 1.5), rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3))
          .normalized();
  return scene::make_rig(e, rng.uniform(0.5, 2.0), scene::default_intrinsics(), dir);
}

}  // namespace

TEST_CASE("euler round trip over random rotations") {
  Rng rng(42);
  for (int i = 0; i < 500; ++i) {
    const EulerAngles e(rng.uniform(-179.0, 179.0), rng.uniform(-89.0, 89.0),
                        rng.uniform(-179.0, 179.0));
    const Eigen::Matrix3d r = euler_to_rotation(e);
    check_rotation(r);
    const EulerAngles back = rotation_to_euler(r);
    CHECK(back.roll_deg == doctest::Approx(e.roll_deg).epsilon(1e-9));
    CHECK(back.pitch_deg == doctest::Approx(e.pitch_deg).epsilon(1e-9));
    CHECK(back.yaw_deg == doctest::Approx(e.yaw_deg).epsilon(1e-9));
    CHECK_FALSE(back.gimbal_lock);
  }
}

TEST_CASE("euler convention is intrinsic ZYX: R = Rz(yaw) Ry(pitch) Rx(roll)") {
  // yaw 90 alone maps +X to +Y
  const Eigen::Matrix3d rz = euler_to_rotation({0.0, 0.0, 90.0});
  CHECK((rz * Eigen::Vector3d::UnitX() - Eigen::Vector3d::UnitY()).norm() < 1e-12);
  // pitch 90 alone maps +X to -Z
  const Eigen::Matrix3d ry = euler_to_rotation({0.0, 90.0, 0.0});
  CHECK((ry * Eigen::Vector3d::UnitX() + Eigen::Vector3d::UnitZ()).norm() < 1e-12);
  // roll 90 alone maps +Y to +Z
  const Eigen::Matrix3d rx = euler_to_rotation({90.0, 0.0, 0.0});
  CHECK((rx * Eigen::Vector3d::UnitY() - Eigen::Vector3d::UnitZ()).norm() < 1e-12);
  // composed order
  const Eigen::Matrix3d r = euler_to_rotation({10.0, 20.0, 30.0});
  const Eigen::Matrix3d expect =
      euler_to_rotation({0.0, 0.0, 30.0}) * euler_to_rotation({0.0, 20.0, 0.0}) *
      euler_to_rotation({10.0, 0.0, 0.0});
  CHECK((r - expect).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("gimbal lock is flagged") {
  const Eigen::Matrix3d r = euler_to_rotation({25.0, 90.0, 40.0});
  const EulerAngles e = rotation_to_euler(r);
  CHECK(e.gimbal_lock);
  // round trip still reproduces the rotation
  CHECK((euler_to_rotation(e) - r).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("check_rotation rejects non-rotations") {
  CHECK_THROWS_AS(check_rotation(2.0 * Eigen::Matrix3d::Identity()), DegenerateConfiguration);
  Eigen::Matrix3d reflect = Eigen::Matrix3d::Identity();
  reflect(2, 2) = -1.0;
  CHECK_THROWS_AS(check_rotation(reflect), DegenerateConfiguration);
}

TEST_CASE("fix_sign makes the largest-magnitude entry positive and is idempotent") {
  Eigen::Matrix3d m;
  m << 1, 2, -9, 3, 4, 5, 6, 7, 8;
  const Eigen::Matrix3d f = fix_sign(m);
  CHECK(f(0, 2) == 9.0);
  CHECK((fix_sign(f) - f).cwiseAbs().maxCoeff() == 0.0);
  CHECK((fix_sign(-m) - f).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("essential_from_pose satisfies the epipolar constraint b^T E a = 0") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const auto rig = random_rig(rng);
    const auto e = essential_from_pose(rig.pose.R, rig.pose.t());
    CHECK(e.m.norm() == doctest::Approx(1.0));
    // normalized-coordinate correspondences from random world points
    for (int i = 0; i < 50; ++i) {
      const Eigen::Vector3d x1(rng.uniform(-3.0, 3.0), rng.uniform(-2.0, 2.0),
                               rng.uniform(2.0, 8.0));
      const Eigen::Vector3d x2 = rig.pose.R.transpose() * (x1 - rig.pose.t());
      if (x2.z() <= 0.1) continue;
      const Eigen::Vector3d a = x1 / x1.z();
      const Eigen::Vector3d b = x2 / x2.z();
      CHECK(std::abs(b.dot(e.m * a)) < 1e-12);
    }
  }
}

TEST_CASE("essential_from_pose rejects a zero baseline") {
  CHECK_THROWS_AS(essential_from_pose(Eigen::Matrix3d::Identity(), Eigen::Vector3d::Zero()),
                  DegenerateConfiguration);
}

TEST_CASE("eight-point DLT recovers the exact fundamental matrix") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const auto rig = random_rig(rng);
    const auto ms = scene::project_points(
        rig, scene::default_point_cloud(40, rng.next_u64()), 0.0, 0.0, rng.next_u64());
    const auto f = estimate_fundamental_dlt(ms.matches);
    CHECK(f.m.norm() == doctest::Approx(1.0));
    for (const auto& m : ms.matches) CHECK(sampson_distance(f, m) < 1e-8);
    // oracle: F from the generating pose, same sign convention
    const auto e = essential_from_pose(rig.pose.R, rig.pose.t());
    Eigen::Matrix3d f_gt =
        rig.k2.matrix().transpose().inverse() * e.m * rig.k1.matrix().inverse();
    f_gt = fix_sign(f_gt / f_gt.norm());
    CHECK((f.m - f_gt).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("minimal 8-point fit is exact on noise-free data") {
  Rng rng(9);
  const auto rig = random_rig(rng);
  const auto ms = scene::project_points(rig, scene::default_point_cloud(60, 5), 0.0, 0.0, 6);
  std::vector<Correspondence> minimal(ms.matches.begin(), ms.matches.begin() + 8);
  const auto f = estimate_fundamental_dlt(minimal);
  // the model generalizes to the other matches of the same scene
  for (const auto& m : ms.matches) CHECK(sampson_distance(f, m) < 1e-8);
}

TEST_CASE("DLT error cases") {
  std::vector<Correspondence> few(7);
  CHECK_THROWS_AS(estimate_fundamental_dlt(few), InsufficientMatches);
  // 8 identical correspondences: rank-deficient design
  std::vector<Correspondence> dup(8, Correspondence({100.0, 120.0}, {140.0, 90.0}));
  CHECK_THROWS_AS(estimate_fundamental_dlt(dup), DegenerateConfiguration);
}

TEST_CASE("sampson distance is in pixels and zero on exact matches") {
  Rng rng(11);
  const auto rig = random_rig(rng);
  const auto ms = scene::project_points(rig, scene::default_point_cloud(40, 2), 0.0, 0.0, 3);
  const auto f = estimate_fundamental_dlt(ms.matches);
  for (const auto& m : ms.matches) {
    CHECK(sampson_distance(f, m) < 1e-8);
    // a 2 px vertical offset yields a distance of the same order, bounded by 2
    Correspondence off = m;
    off.b.y() += 2.0;
    const double d = sampson_distance(f, off);
    CHECK(d > 1e-3);
    CHECK(d <= 2.0 + 1e-9);
  }
}

TEST_CASE("RANSAC on clean data keeps every match") {
  const auto rig = scene::reference_rig();
  const auto ms = scene::project_points(rig, scene::default_point_cloud(100, 1), 0.0, 0.0, 2);
  RansacOptions opts;
  opts.seed = 5;
  const auto r = ransac_fundamental(ms.matches, opts);
  CHECK(r.inlier_count == static_cast<int>(ms.matches.size()));
  CHECK(r.iterations_run < opts.iterations);  // adaptive bound kicks in
}

TEST_CASE("RANSAC separates labeled outliers") {
  const auto rig = scene::reference_rig();
  const auto ms = scene::project_points(rig, scene::default_point_cloud(200, 4), 0.5, 0.3, 8);
  RansacOptions opts;
  opts.seed = 13;
  opts.threshold_px = 3.0;
  const auto r = ransac_fundamental(ms.matches, opts);
  int recalled = 0, true_in = 0, false_in = 0, total_out = 0;
  for (std::size_t i = 0; i < ms.matches.size(); ++i) {
    if (ms.inlier_labels[i]) {
      ++true_in;
      if (r.inlier_mask[i]) ++recalled;
    } else {
      ++total_out;
      if (r.inlier_mask[i]) ++false_in;
    }
  }
  CHECK(true_in > 100);
  CHECK(total_out > 20);
  CHECK(static_cast<double>(recalled) / true_in > 0.98);
  CHECK(static_cast<double>(false_in) / total_out < 0.1);
}

TEST_CASE("RANSAC is deterministic per seed") {
  const auto rig = scene::reference_rig();
  const auto ms = scene::project_points(rig, scene::default_point_cloud(150, 2), 0.5, 0.2, 3);
  RansacOptions opts;
  opts.seed = 99;
  const auto r1 = ransac_fundamental(ms.matches, opts);
  const auto r2 = ransac_fundamental(ms.matches, opts);
  CHECK((r1.f.m - r2.f.m).cwiseAbs().maxCoeff() == 0.0);
  CHECK(r1.inlier_mask == r2.inlier_mask);
  CHECK(r1.iterations_run == r2.iterations_run);
}

TEST_CASE("RANSAC error cases") {
  std::vector<Correspondence> few(6);
  RansacOptions opts;
  CHECK_THROWS_AS(ransac_fundamental(few, opts), InsufficientMatches);
  // all-degenerate data never yields a consensus
  std::vector<Correspondence> dup(20, Correspondence({10.0, 10.0}, {20.0, 20.0}));
  CHECK_THROWS_AS(ransac_fundamental(dup, opts), NoConsensus);
  RansacOptions bad = opts;
  bad.confidence = 1.5;
  std::vector<Correspondence> some(10);
  CHECK_THROWS_AS(ransac_fundamental(some, bad), Error);
  bad = opts;
  bad.threshold_px = 0.0;
  CHECK_THROWS_AS(ransac_fundamental(some, bad), Error);
}

TEST_CASE("decompose_essential recovers rotation and translation direction") {
  Rng rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    const auto rig = random_rig(rng);
    const auto ms = scene::project_points(
        rig, scene::default_point_cloud(30, rng.next_u64()), 0.0, 0.0, rng.next_u64());
    const auto e = essential_from_pose(rig.pose.R, rig.pose.t());
    const auto pose = decompose_essential(e, ms.matches, rig.k1, rig.k2);
    CHECK_FALSE(pose.has_scale());
    CHECK((pose.R - rig.pose.R).cwiseAbs().maxCoeff() < 1e-9);
    const double terr = std::min((pose.t_hat - rig.pose.t_hat).norm(),
                                 (pose.t_hat + rig.pose.t_hat).norm());
    CHECK(terr < 1e-9);
    // cheirality resolves the +-t ambiguity: direction matches, not its negation
    CHECK((pose.t_hat - rig.pose.t_hat).norm() < 1e-9);
  }
}

TEST_CASE("decompose_essential needs correspondences") {
  const auto rig = scene::reference_rig();
  const auto e = essential_from_pose(rig.pose.R, rig.pose.t());
  CHECK_THROWS_AS(decompose_essential(e, {}, rig.k1, rig.k2), Error);
}

TEST_CASE("full pipeline: F from noisy pixels -> E -> pose") {
  const auto rig = scene::reference_rig();
  const auto ms = scene::project_points(rig, scene::default_point_cloud(200, 31), 0.5, 0.0, 17);
  RansacOptions opts;
  opts.seed = 23;
  opts.threshold_px = 3.0;
  const auto r = ransac_fundamental(ms.matches, opts);
  const auto e = essential_from_fundamental(r.f, rig.k1, rig.k2);
  std::vector<Correspondence> inliers;
  for (std::size_t i = 0; i < ms.matches.size(); ++i) {
    if (r.inlier_mask[i]) inliers.push_back(ms.matches[i]);
  }
  auto pose = decompose_essential(e, inliers, rig.k1, rig.k2);
  const auto rpy = rotation_to_euler(pose.R).rpy();
  const auto rpy_gt = rotation_to_euler(rig.pose.R).rpy();
  CHECK((rpy - rpy_gt).cwiseAbs().maxCoeff() < 1.0);  // sub-degree at 0.5 px noise

  pose = set_scale(pose, rig.pose.t().norm());
  CHECK(pose.has_scale());
  CHECK(pose.t().norm() == doctest::Approx(rig.pose.t().norm()));
}

TEST_CASE("essential projection keeps the (s, s, 0) spectrum") {
  const auto rig = scene::reference_rig();
  const auto ms = scene::project_points(rig, scene::default_point_cloud(100, 8), 1.0, 0.0, 9);
  RansacOptions opts;
  opts.seed = 1;
  opts.threshold_px = 4.0;
  const auto r = ransac_fundamental(ms.matches, opts);
  const auto e = essential_from_fundamental(r.f, rig.k1, rig.k2);
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(e.m);
  const Eigen::Vector3d sv = svd.singularValues();
  CHECK(sv(0) == doctest::Approx(sv(1)).epsilon(1e-12));
  CHECK(sv(2) < 1e-12 * sv(0));
}

TEST_CASE("set_scale validation") {
  RelativePose pose;
  CHECK_THROWS_AS(set_scale(pose, 0.0), NonPositiveDistance);
  CHECK_THROWS_AS(set_scale(pose, -1.0), NonPositiveDistance);
  const auto scaled = set_scale(pose, 2.5);
  CHECK(scaled.scale == doctest::Approx(2.5));
}

TEST_CASE("frame transforms round trip and enforce frames") {
  Rng rng(33);
  const auto rig = random_rig(rng);
  const Point3 p{{1.0, -0.5, 6.0}, Frame::cam1};
  const Point3 q = transform_to_ego(p, rig.pose);
  CHECK(q.frame == Frame::cam2);
  const Point3 back = transform_from_ego(q, rig.pose);
  CHECK(back.frame == Frame::cam1);
  CHECK((back.p - p.p).norm() < 1e-12);
  // direct formula
  CHECK((q.p - rig.pose.R.transpose() * (p.p - rig.pose.t())).norm() < 1e-12);

  CHECK_THROWS_AS(transform_to_ego(q, rig.pose), FrameMismatch);
  CHECK_THROWS_AS(transform_from_ego(p, rig.pose), FrameMismatch);

  RelativePose unscaled = rig.pose;
  unscaled.scale = -1.0;
  CHECK_THROWS_AS(transform_to_ego(p, unscaled), Error);

  // velocities rotate without translating
  const Eigen::Vector3d v(0.3, -1.2, 0.0);
  CHECK((transform_velocity(v, rig.pose) - rig.pose.R.transpose() * v).norm() == 0.0);
  CHECK(transform_velocity(v, rig.pose).norm() == doctest::Approx(v.norm()));
}

TEST_CASE("intrinsics validation and matrix layout") {
  CHECK_THROWS_AS(CameraIntrinsics(0.0, 600.0, 320.0, 240.0), Error);
  const CameraIntrinsics k(600.0, 500.0, 320.0, 240.0);
  const Eigen::Matrix3d m = k.matrix();
  CHECK(m(0, 0) == 600.0);
  CHECK(m(1, 1) == 500.0);
  CHECK(m(0, 2) == 320.0);
  CHECK(m(1, 2) == 240.0);
  CHECK(m(2, 2) == 1.0);
}
