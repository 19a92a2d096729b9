#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <vector>

#include "coopcast/errors.hpp"

namespace coopcast::geometry {

/// Registered coordinate frames. `cam1` doubles as the world frame in the
/// synthetic rigs (camera 1 sits at the world origin with identity rotation).
enum class Frame { cam1, cam2 };

struct CameraIntrinsics {
  double fx = 0, fy = 0, cx = 0, cy = 0;

  CameraIntrinsics() = default;
  CameraIntrinsics(double fx_, double fy_, double cx_, double cy_);

  Eigen::Matrix3d matrix() const;
  static CameraIntrinsics identity() { return {1.0, 1.0, 0.0, 0.0}; }
};

/// A matched pair of homogeneous pixel coordinates, `a` in camera 1 and `b`
/// in camera 2. Third components are exactly 1.
struct Correspondence {
  Eigen::Vector3d a;
  Eigen::Vector3d b;

  Correspondence() : a(0, 0, 1), b(0, 0, 1) {}
  Correspondence(const Eigen::Vector2d& pa, const Eigen::Vector2d& pb)
      : a(pa.x(), pa.y(), 1.0), b(pb.x(), pb.y(), 1.0) {}
};

/// Rank-2, unit-Frobenius-norm fundamental matrix. Convention: F maps a
/// camera-1 point to its epipolar line in camera 2, so b^T F a = 0.
struct FundamentalMatrix {
  Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
};

/// Essential matrix on the essential manifold: singular values (s, s, 0).
/// Same constraint direction as FundamentalMatrix in normalized coordinates.
struct EssentialMatrix {
  Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
};

/// ZYX-intrinsic Euler angles in degrees: R = Rz(yaw) * Ry(pitch) * Rx(roll).
struct EulerAngles {
  double roll_deg = 0;
  double pitch_deg = 0;
  double yaw_deg = 0;
  bool gimbal_lock = false;

  EulerAngles() = default;
  EulerAngles(double roll, double pitch, double yaw)
      : roll_deg(roll), pitch_deg(pitch), yaw_deg(yaw) {}
  Eigen::Vector3d rpy() const { return {roll_deg, pitch_deg, yaw_deg}; }
};

/// Pose of camera 2 relative to camera 1: camera-2 center sits at `t` in
/// camera-1 coordinates with orientation R. Points map into the ego (camera-2)
/// frame as X' = R^T (X - t). Scale is unset (< 0) until set_scale is applied.
struct RelativePose {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t_hat = Eigen::Vector3d::UnitX();
  double scale = -1.0;

  bool has_scale() const { return scale >= 0.0; }
  Eigen::Vector3d t() const { return scale * t_hat; }
};

struct Point3 {
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  Frame frame = Frame::cam1;
};

struct RansacOptions {
  int iterations = 1000;       // reference configuration
  double confidence = 0.99;    // reference configuration
  double threshold_px = 1.0;   // Sampson distance cutoff
  std::uint64_t seed = 0;
};

struct RansacResult {
  FundamentalMatrix f;
  std::vector<bool> inlier_mask;
  int inlier_count = 0;
  int iterations_run = 0;
};

/// Normalized 8-point algorithm (Hartley conditioning, SVD least squares,
/// rank-2 projection). Throws InsufficientMatches / DegenerateConfiguration.
FundamentalMatrix estimate_fundamental_dlt(const std::vector<Correspondence>& matches);

/// RANSAC over estimate_fundamental_dlt with Sampson-distance scoring and the
/// adaptive iteration bound; the final model is re-estimated on all inliers.
/// Deterministic for a fixed seed. Throws NoConsensus.
RansacResult ransac_fundamental(const std::vector<Correspondence>& matches,
                                const RansacOptions& opts);

/// First-order geometric (Sampson) distance in pixels.
double sampson_distance(const FundamentalMatrix& f, const Correspondence& match);

/// E = K2^T F K1, projected onto the essential manifold with averaged
/// singular values.
EssentialMatrix essential_from_fundamental(const FundamentalMatrix& f,
                                           const CameraIntrinsics& k1,
                                           const CameraIntrinsics& k2);

/// Essential matrix induced by a pose under this library's constraint
/// direction (b^T E a = 0), sign-fixed and unit-Frobenius. Oracle for tests
/// and the synthetic scene generator.
EssentialMatrix essential_from_pose(const Eigen::Matrix3d& R, const Eigen::Vector3d& t);

/// Decomposes E into the four (R, +-t) candidates and picks the one passing
/// the cheirality test (majority of midpoint-triangulated matches at positive
/// depth in both cameras). Returned pose has scale unset.
RelativePose decompose_essential(const EssentialMatrix& e,
                                 const std::vector<Correspondence>& matches,
                                 const CameraIntrinsics& k1, const CameraIntrinsics& k2);

/// Fixes the translation scale from the known inter-camera distance:
/// s = d_true / ||t_hat|| with ||t_hat|| = 1.
RelativePose set_scale(const RelativePose& pose, double d_true);

/// X' = R^T (X - t), camera-1 -> camera-2 (ego). Requires a scaled pose and a
/// point in the cam1 frame.
Point3 transform_to_ego(const Point3& p, const RelativePose& pose);

/// Inverse of transform_to_ego: X = R X' + t.
Point3 transform_from_ego(const Point3& p, const RelativePose& pose);

/// Direction vectors rotate without translation: v' = R^T v.
Eigen::Vector3d transform_velocity(const Eigen::Vector3d& v, const RelativePose& pose);

Eigen::Matrix3d euler_to_rotation(const EulerAngles& e);
EulerAngles rotation_to_euler(const Eigen::Matrix3d& R);

/// Deterministic sign convention: the largest-magnitude entry is positive.
Eigen::Matrix3d fix_sign(const Eigen::Matrix3d& m);

/// Asserts R^T R = I and det R = 1 within 1e-9; throws DegenerateConfiguration.
void check_rotation(const Eigen::Matrix3d& R, double tol = 1e-9);

}  // namespace coopcast::geometry
