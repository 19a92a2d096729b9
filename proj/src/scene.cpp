#include "coopcast/scene.hpp"

#include <cmath>

#include "coopcast/rng.hpp"

namespace coopcast::scene {

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;

double heading_at(const WalkOptions& o, double t) {
  const double h0 = o.heading_deg * kPi / 180.0;
  switch (o.kind) {
    case WalkKind::straight:
      return h0;
    case WalkKind::turn:
      return h0 + o.turn_rate_deg_s * kPi / 180.0 * t;
    case WalkKind::s_curve:
      return h0 + o.s_curve_amp_deg * kPi / 180.0 * std::sin(2.0 * kPi * t / o.s_curve_period_s);
  }
  return h0;
}

Eigen::Vector2d project_pixel(const geometry::CameraIntrinsics& k, const Eigen::Vector3d& p) {
  return {k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy};
}
}  // namespace

CameraRig make_rig(const geometry::EulerAngles& euler, double baseline_m,
                   const geometry::CameraIntrinsics& k, const Eigen::Vector3d& t_dir, int width,
                   int height) {
  if (baseline_m <= 0.0) throw NonPositiveDistance("baseline must be positive");
  if (width <= 0 || height <= 0) throw Error("image size must be positive");
  CameraRig rig;
  rig.k1 = k;
  rig.k2 = k;
  rig.width = width;
  rig.height = height;
  rig.pose.R = geometry::euler_to_rotation(euler);
  rig.pose.t_hat = t_dir.normalized();
  rig.pose.scale = baseline_m;
  return rig;
}

geometry::CameraIntrinsics default_intrinsics() { return {600.0, 600.0, 320.0, 240.0}; }

CameraRig reference_rig() {
  const Eigen::Vector3d t{1.163, 0.066, 0.040};
  return make_rig({1.31, -1.767, 19.12}, t.norm(), default_intrinsics(), t.normalized());
}

std::vector<Eigen::Vector3d> default_point_cloud(int count, std::uint64_t seed) {
  Rng rng(Rng::derive(seed, "cloud"));
  std::vector<Eigen::Vector3d> points;
  points.reserve(count);
  for (int i = 0; i < count; ++i) {
    points.emplace_back(rng.uniform(-3.0, 3.0), rng.uniform(-2.0, 2.0), rng.uniform(2.0, 8.0));
  }
  return points;
}

SyntheticMatchSet project_points(const CameraRig& rig, const std::vector<Eigen::Vector3d>& points,
                                 double sigma_px, double outlier_fraction, std::uint64_t seed) {
  if (outlier_fraction < 0.0 || outlier_fraction >= 1.0) {
    throw Error("outlier fraction must be in [0, 1)");
  }
  Rng rng(Rng::derive(seed, "project"));
  SyntheticMatchSet set;
  set.sigma_px = sigma_px;
  set.outlier_fraction = outlier_fraction;

  for (const auto& x1 : points) {
    const Eigen::Vector3d x2 = rig.pose.R.transpose() * (x1 - rig.pose.t());
    if (x1.z() <= 1e-6 || x2.z() <= 1e-6) {
      ++set.skipped_points;
      continue;
    }
    Eigen::Vector2d pa = project_pixel(rig.k1, x1);
    Eigen::Vector2d pb = project_pixel(rig.k2, x2);
    if (sigma_px > 0.0) {
      pa += Eigen::Vector2d(rng.normal(0.0, sigma_px), rng.normal(0.0, sigma_px));
      pb += Eigen::Vector2d(rng.normal(0.0, sigma_px), rng.normal(0.0, sigma_px));
    }
    bool inlier = true;
    if (outlier_fraction > 0.0 && rng.bernoulli(outlier_fraction)) {
      pb = {rng.uniform(0.0, rig.width), rng.uniform(0.0, rig.height)};
      inlier = false;
    }
    set.matches.emplace_back(pa, pb);
    set.inlier_labels.push_back(inlier);
  }

  if (static_cast<int>(set.matches.size()) < 8) {
    throw EmptyScene("fewer than 8 points project into both cameras");
  }
  return set;
}

GroundTruthWalk synth_walk(const WalkOptions& opts) {
  const int n = static_cast<int>(std::llround(opts.duration_s / opts.dt));
  if (n < 1) throw Error("walk duration yields no samples");

  GroundTruthWalk walk;
  walk.dt = opts.dt;
  walk.t.reserve(n);
  walk.pos.reserve(n);
  walk.vel.reserve(n);

  // Step from the t = 0 start point; samples are taken after each step.
  Eigen::Vector3d p = opts.start;
  for (int k = 0; k < n; ++k) {
    const double t_prev = k * opts.dt;
    const double h = heading_at(opts, t_prev);
    p += opts.speed * opts.dt * Eigen::Vector3d(std::cos(h), std::sin(h), 0.0);
    walk.t.push_back((k + 1) * opts.dt);
    walk.pos.push_back(p);
  }
  // Forward-difference velocities; the last sample extrapolates one step.
  for (int k = 0; k < n; ++k) {
    Eigen::Vector3d next;
    if (k + 1 < n) {
      next = walk.pos[k + 1];
    } else {
      const double h = heading_at(opts, n * opts.dt);
      next = walk.pos[k] + opts.speed * opts.dt * Eigen::Vector3d(std::cos(h), std::sin(h), 0.0);
    }
    walk.vel.push_back((next - walk.pos[k]) / opts.dt);
  }
  walk.occluded_cam1.assign(n, false);
  walk.occluded_cam2.assign(n, false);
  return walk;
}

void apply_occlusion(GroundTruthWalk& walk, OcclusionKind kind) {
  for (int k = 0; k < walk.size(); ++k) {
    const double t = walk.t[k];
    bool occ = false;
    if (kind == OcclusionKind::intermittent) occ = t >= 1.0 && t <= 3.0;
    if (kind == OcclusionKind::partial) occ = t < 1.0;
    walk.occluded_cam2[k] = occ;
  }
}

CameraTrack observe(const GroundTruthWalk& walk, const CameraRig& rig, int camera) {
  if (walk.size() == 0) throw Error("cannot observe an empty walk");
  if (camera != 1 && camera != 2) throw Error("camera must be 1 or 2");

  CameraTrack track;
  track.dt = walk.dt;
  track.t = walk.t;
  track.frame = camera == 1 ? geometry::Frame::cam1 : geometry::Frame::cam2;
  track.occluded = camera == 1 ? walk.occluded_cam1 : walk.occluded_cam2;
  for (int k = 0; k < walk.size(); ++k) {
    if (camera == 1) {
      track.pos.push_back(walk.pos[k]);
      track.vel.push_back(walk.vel[k]);
    } else {
      track.pos.push_back(rig.pose.R.transpose() * (walk.pos[k] - rig.pose.t()));
      track.vel.push_back(rig.pose.R.transpose() * walk.vel[k]);
    }
  }
  return track;
}

CameraTrack transform_track(const CameraTrack& track, const geometry::RelativePose& pose) {
  if (track.frame != geometry::Frame::cam1) {
    throw FrameMismatch("transform_track expects a cam1-frame track");
  }
  CameraTrack out = track;
  out.frame = geometry::Frame::cam2;
  for (int k = 0; k < static_cast<int>(track.pos.size()); ++k) {
    out.pos[k] = pose.R.transpose() * (track.pos[k] - pose.t());
    out.vel[k] = pose.R.transpose() * track.vel[k];
  }
  return out;
}

}  // namespace coopcast::scene
