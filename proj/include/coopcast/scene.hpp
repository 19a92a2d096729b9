#pragma once

#include <cstdint>
#include <vector>

#include "coopcast/geometry.hpp"

namespace coopcast::scene {

/// Two-camera ground-truth rig. Camera 1 is the world frame; `pose` is the
/// ground-truth camera-2 pose with scale set (baseline in meters).
struct CameraRig {
  geometry::CameraIntrinsics k1;
  geometry::CameraIntrinsics k2;
  geometry::RelativePose pose;
  int width = 640;
  int height = 480;
};

/// Labeled synthetic matches standing in for the feature-matching front end.
struct SyntheticMatchSet {
  std::vector<geometry::Correspondence> matches;
  std::vector<bool> inlier_labels;
  double sigma_px = 0.0;
  double outlier_fraction = 0.0;
  int skipped_points = 0;  // behind a camera in either view
};

enum class WalkKind { straight, turn, s_curve };

/// Pedestrian ground truth in the world frame. The walk starts at `start` at
/// t = 0 and is sampled at t = dt, 2*dt, ..., n*dt, so an 8 s walk at 0.4 s
/// yields 20 samples. Motion is confined to the X-Y plane at depth `pos.z()`;
/// stored velocities are the forward differences of the sampled positions.
struct GroundTruthWalk {
  double dt = 0.4;
  std::vector<double> t;
  std::vector<Eigen::Vector3d> pos;
  std::vector<Eigen::Vector3d> vel;
  std::vector<bool> occluded_cam1;
  std::vector<bool> occluded_cam2;

  int size() const { return static_cast<int>(t.size()); }
};

struct WalkOptions {
  WalkKind kind = WalkKind::straight;
  double duration_s = 8.0;
  double dt = 0.4;
  double speed = 1.2;                       // m/s
  Eigen::Vector3d start{-4.8, -1.0, 5.0};  // world frame, z = plane depth
  double heading_deg = 0.0;                // initial heading in the X-Y plane
  double turn_rate_deg_s = 10.0;           // turn kind
  double s_curve_amp_deg = 30.0;           // s-curve kind
  double s_curve_period_s = 8.0;
  std::uint64_t seed = 0;
};

/// A walk observed from one camera, in that camera's frame.
struct CameraTrack {
  geometry::Frame frame = geometry::Frame::cam1;
  double dt = 0.4;
  std::vector<double> t;
  std::vector<Eigen::Vector3d> pos;
  std::vector<Eigen::Vector3d> vel;
  std::vector<bool> occluded;
};

/// Builds a rig from Euler angles and a baseline along `t_dir`.
CameraRig make_rig(const geometry::EulerAngles& euler, double baseline_m,
                   const geometry::CameraIntrinsics& k,
                   const Eigen::Vector3d& t_dir = Eigen::Vector3d::UnitX(), int width = 640,
                   int height = 480);

/// The rig of the hardware experiment: ground-truth yaw 19.12 deg and the
/// measured translation direction, baseline ~1.165 m.
CameraRig reference_rig();

geometry::CameraIntrinsics default_intrinsics();

/// 3D feature cloud shared by both views: uniform in a box in front of the
/// cameras (x in [-3,3], y in [-2,2], z in [2,8], world frame).
std::vector<Eigen::Vector3d> default_point_cloud(int count, std::uint64_t seed);

/// Pinhole projection of the cloud into both cameras with Gaussian pixel
/// noise; a fraction of matches is replaced by uniform draws over the image
/// rectangle (label false). Points behind either camera are skipped.
SyntheticMatchSet project_points(const CameraRig& rig, const std::vector<Eigen::Vector3d>& points,
                                 double sigma_px, double outlier_fraction, std::uint64_t seed);

GroundTruthWalk synth_walk(const WalkOptions& opts);

/// Scene occlusion defaults: intermittent masks camera 2 for t in [1 s, 3 s],
/// partial masks camera 2 for t < 1 s. Camera 1 always sees the pedestrian.
enum class OcclusionKind { none, intermittent, partial };
void apply_occlusion(GroundTruthWalk& walk, OcclusionKind kind);

CameraTrack observe(const GroundTruthWalk& walk, const CameraRig& rig, int camera);

/// Applies a (scaled) relative pose to every sample of a cam1 track,
/// producing the track in the ego (cam2) frame.
CameraTrack transform_track(const CameraTrack& track, const geometry::RelativePose& pose);

}  // namespace coopcast::scene
