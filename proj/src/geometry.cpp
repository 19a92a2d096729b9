#include "coopcast/geometry.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

#include "coopcast/rng.hpp"

namespace coopcast::geometry {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

double deg2rad(double d) { return d * kPi / 180.0; }
double rad2deg(double r) { return r * 180.0 / kPi; }

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d s;
  s << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return s;
}

// Hartley conditioning: centroid at the origin, RMS distance sqrt(2).
Eigen::Matrix3d hartley_transform(const std::vector<Correspondence>& matches, bool first) {
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  for (const auto& m : matches) {
    const auto& p = first ? m.a : m.b;
    centroid += p.head<2>();
  }
  centroid /= static_cast<double>(matches.size());
  double rms = 0.0;
  for (const auto& m : matches) {
    const auto& p = first ? m.a : m.b;
    rms += (p.head<2>() - centroid).squaredNorm();
  }
  rms = std::sqrt(rms / static_cast<double>(matches.size()));
  const double s = rms > 1e-15 ? std::sqrt(2.0) / rms : 1.0;
  Eigen::Matrix3d t;
  t << s, 0, -s * centroid.x(), 0, s, -s * centroid.y(), 0, 0, 1;
  return t;
}

// Midpoint triangulation of a match in normalized coordinates, given the
// camera-1 -> camera-2 transform X2 = R21 X1 + t21. Returns the point in the
// camera-1 frame, or nullopt for near-parallel rays.
std::optional<Eigen::Vector3d> triangulate_midpoint(const Eigen::Matrix3d& r21,
                                                    const Eigen::Vector3d& t21,
                                                    const Eigen::Vector3d& a_norm,
                                                    const Eigen::Vector3d& b_norm) {
  const Eigen::Vector3d c2 = -r21.transpose() * t21;  // camera-2 center in cam1 frame
  const Eigen::Vector3d d1 = a_norm.normalized();
  const Eigen::Vector3d d2 = (r21.transpose() * b_norm).normalized();

  const double d1d2 = d1.dot(d2);
  const double denom = 1.0 - d1d2 * d1d2;
  if (denom < 1e-12) return std::nullopt;
  const Eigen::Vector3d w = c2;  // c2 - c1
  const double s = (w.dot(d1) - w.dot(d2) * d1d2) / denom;
  const double u = (w.dot(d1) * d1d2 - w.dot(d2)) / denom;
  const Eigen::Vector3d p1 = s * d1;
  const Eigen::Vector3d p2 = c2 + u * d2;
  return 0.5 * (p1 + p2);
}

FundamentalMatrix dlt_impl(const std::vector<Correspondence>& matches, bool minimal) {
  const int n = static_cast<int>(matches.size());
  const Eigen::Matrix3d t1 = hartley_transform(matches, true);
  const Eigen::Matrix3d t2 = hartley_transform(matches, false);

  Eigen::MatrixXd design(n, 9);
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d a = t1 * matches[i].a;
    const Eigen::Vector3d b = t2 * matches[i].b;
    design.row(i) << b.x() * a.x(), b.x() * a.y(), b.x(), b.y() * a.x(), b.y() * a.y(), b.y(),
        a.x(), a.y(), 1.0;
  }

  // Full V: with a minimal 8 x 9 design the null-space vector is V's ninth
  // column, which the thin decomposition does not produce.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  // rank < 8 means the epipolar constraints do not pin down a model.
  const double rank_tol = (minimal ? 1e-8 : 1e-10) * std::max(sv(0), 1.0);
  if (sv(7) <= rank_tol) {
    throw DegenerateConfiguration("design matrix rank < 8 in eight-point DLT");
  }

  Eigen::Matrix3d f_hat;
  const Eigen::VectorXd fvec = svd.matrixV().col(8);
  f_hat << fvec(0), fvec(1), fvec(2), fvec(3), fvec(4), fvec(5), fvec(6), fvec(7), fvec(8);

  // rank-2 projection
  Eigen::JacobiSVD<Eigen::Matrix3d> fsvd(f_hat, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Vector3d sigma = fsvd.singularValues();
  sigma(2) = 0.0;
  f_hat = fsvd.matrixU() * sigma.asDiagonal() * fsvd.matrixV().transpose();

  Eigen::Matrix3d f = t2.transpose() * f_hat * t1;
  f = fix_sign(f / f.norm());
  return FundamentalMatrix{f};
}

}  // namespace

CameraIntrinsics::CameraIntrinsics(double fx_, double fy_, double cx_, double cy_)
    : fx(fx_), fy(fy_), cx(cx_), cy(cy_) {
  if (fx <= 0.0 || fy <= 0.0) throw Error("camera focal lengths must be positive");
}

Eigen::Matrix3d CameraIntrinsics::matrix() const {
  Eigen::Matrix3d k;
  k << fx, 0, cx, 0, fy, cy, 0, 0, 1;
  return k;
}

Eigen::Matrix3d fix_sign(const Eigen::Matrix3d& m) {
  int r = 0, c = 0;
  m.cwiseAbs().maxCoeff(&r, &c);
  return m(r, c) < 0.0 ? Eigen::Matrix3d(-m) : m;
}

void check_rotation(const Eigen::Matrix3d& R, double tol) {
  const double ortho = (R.transpose() * R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (ortho > tol || std::abs(R.determinant() - 1.0) > tol) {
    throw DegenerateConfiguration("matrix is not a rotation");
  }
}

FundamentalMatrix estimate_fundamental_dlt(const std::vector<Correspondence>& matches) {
  if (matches.size() < 8) {
    throw InsufficientMatches("eight-point DLT needs at least 8 matches, got " +
                              std::to_string(matches.size()));
  }
  return dlt_impl(matches, matches.size() == 8);
}

double sampson_distance(const FundamentalMatrix& f, const Correspondence& match) {
  const Eigen::Vector3d fa = f.m * match.a;
  const Eigen::Vector3d ftb = f.m.transpose() * match.b;
  const double num = match.b.dot(fa);
  const double denom = fa.head<2>().squaredNorm() + ftb.head<2>().squaredNorm();
  if (denom < 1e-18) return std::abs(num) > 1e-15 ? 1e9 : 0.0;
  return std::abs(num) / std::sqrt(denom);
}

RansacResult ransac_fundamental(const std::vector<Correspondence>& matches,
                                const RansacOptions& opts) {
  const int n = static_cast<int>(matches.size());
  if (n < 8) throw InsufficientMatches("RANSAC needs at least 8 matches");
  if (opts.confidence <= 0.0 || opts.confidence >= 1.0) throw Error("confidence must be in (0,1)");
  if (opts.threshold_px <= 0.0) throw Error("threshold must be positive");

  Rng rng(Rng::derive(opts.seed, "ransac"));
  std::vector<Correspondence> sample(8);
  std::vector<bool> best_mask(n, false);
  int best_count = -1;
  double adaptive_bound = static_cast<double>(opts.iterations);
  int iters = 0;

  for (; iters < opts.iterations && iters < adaptive_bound; ++iters) {
    // 8 distinct indices
    int idx[8];
    for (int k = 0; k < 8; ++k) {
      bool fresh = false;
      while (!fresh) {
        idx[k] = rng.uniform_int(n);
        fresh = true;
        for (int j = 0; j < k; ++j) {
          if (idx[j] == idx[k]) {
            fresh = false;
            break;
          }
        }
      }
      sample[k] = matches[idx[k]];
    }

    FundamentalMatrix model;
    try {
      model = dlt_impl(sample, true);
    } catch (const DegenerateConfiguration&) {
      continue;
    }

    int count = 0;
    std::vector<bool> mask(n, false);
    for (int i = 0; i < n; ++i) {
      if (sampson_distance(model, matches[i]) < opts.threshold_px) {
        mask[i] = true;
        ++count;
      }
    }
    if (count > best_count) {  // strict: lowest iteration index wins ties
      best_count = count;
      best_mask = std::move(mask);
      const double w = static_cast<double>(count) / static_cast<double>(n);
      if (w > 0.0) {
        const double denom = std::log(1.0 - std::min(std::pow(w, 8), 1.0 - 1e-12));
        if (denom < 0.0) {
          adaptive_bound = std::min(adaptive_bound, std::log(1.0 - opts.confidence) / denom);
        }
      }
    }
  }

  if (best_count < 8) throw NoConsensus("best RANSAC consensus has fewer than 8 inliers");

  std::vector<Correspondence> inliers;
  inliers.reserve(best_count);
  for (int i = 0; i < n; ++i) {
    if (best_mask[i]) inliers.push_back(matches[i]);
  }
  FundamentalMatrix final_f = dlt_impl(inliers, false);

  RansacResult result;
  result.f = final_f;
  result.inlier_mask.assign(n, false);
  for (int i = 0; i < n; ++i) {
    if (sampson_distance(final_f, matches[i]) < opts.threshold_px) {
      result.inlier_mask[i] = true;
      ++result.inlier_count;
    }
  }
  result.iterations_run = iters;
  if (result.inlier_count < 8) throw NoConsensus("refit model lost consensus");
  return result;
}

EssentialMatrix essential_from_fundamental(const FundamentalMatrix& f, const CameraIntrinsics& k1,
                                           const CameraIntrinsics& k2) {
  const Eigen::Matrix3d e0 = k2.matrix().transpose() * f.m * k1.matrix();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(e0, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sv = svd.singularValues();
  const double s = 0.5 * (sv(0) + sv(1));
  Eigen::Matrix3d e =
      svd.matrixU() * Eigen::Vector3d(s, s, 0.0).asDiagonal() * svd.matrixV().transpose();
  return EssentialMatrix{fix_sign(e)};
}

EssentialMatrix essential_from_pose(const Eigen::Matrix3d& R, const Eigen::Vector3d& t) {
  // X2 = R^T (X1 - t)  =>  standard form R21 = R^T, t21 = -R^T t, and
  // E = [t21]x R21 = -R^T [t]x.
  Eigen::Matrix3d e = -R.transpose() * skew(t);
  const double norm = e.norm();
  if (norm < 1e-15) throw DegenerateConfiguration("zero-baseline pose has no essential matrix");
  return EssentialMatrix{fix_sign(e / norm)};
}

RelativePose decompose_essential(const EssentialMatrix& e,
                                 const std::vector<Correspondence>& matches,
                                 const CameraIntrinsics& k1, const CameraIntrinsics& k2) {
  if (matches.empty()) throw Error("cheirality test needs at least one correspondence");

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(e.m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d u = svd.matrixU();
  Eigen::Matrix3d v = svd.matrixV();
  if (u.determinant() < 0) u = -u;
  if (v.determinant() < 0) v = -v;

  Eigen::Matrix3d w;
  w << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  const Eigen::Matrix3d r_a = u * w * v.transpose();
  const Eigen::Matrix3d r_b = u * w.transpose() * v.transpose();
  const Eigen::Vector3d t_u = u.col(2);

  const Eigen::Matrix3d k1_inv = k1.matrix().inverse();
  const Eigen::Matrix3d k2_inv = k2.matrix().inverse();

  struct Candidate {
    Eigen::Matrix3d r21;
    Eigen::Vector3d t21;
  };
  const Candidate candidates[4] = {{r_a, t_u}, {r_a, -t_u}, {r_b, t_u}, {r_b, -t_u}};

  int best = -1;
  int best_count = 0;
  int valid_total = 0;
  for (int c = 0; c < 4; ++c) {
    int positive = 0;
    int valid = 0;
    for (const auto& m : matches) {
      const Eigen::Vector3d a_norm = k1_inv * m.a;
      const Eigen::Vector3d b_norm = k2_inv * m.b;
      const auto pt = triangulate_midpoint(candidates[c].r21, candidates[c].t21, a_norm, b_norm);
      if (!pt) continue;
      ++valid;
      const double z1 = pt->z();
      const double z2 = (candidates[c].r21 * *pt + candidates[c].t21).z();
      if (z1 > 0.0 && z2 > 0.0) ++positive;
    }
    if (positive > best_count) {
      best_count = positive;
      best = c;
      valid_total = valid;
    }
  }

  if (best < 0 || valid_total == 0 || 2 * best_count <= valid_total) {
    throw CheiralityAmbiguous("no decomposition places a majority of points in front of both cameras");
  }

  RelativePose pose;
  pose.R = candidates[best].r21.transpose();
  pose.t_hat = (-candidates[best].r21.transpose() * candidates[best].t21).normalized();
  pose.scale = -1.0;
  check_rotation(pose.R);
  return pose;
}

RelativePose set_scale(const RelativePose& pose, double d_true) {
  if (d_true <= 0.0) throw NonPositiveDistance("inter-camera distance must be positive");
  RelativePose scaled = pose;
  scaled.scale = d_true / pose.t_hat.norm();
  return scaled;
}

Point3 transform_to_ego(const Point3& p, const RelativePose& pose) {
  if (p.frame != Frame::cam1) throw FrameMismatch("transform_to_ego expects a cam1-frame point");
  if (!pose.has_scale()) throw Error("pose scale is unset");
  return Point3{pose.R.transpose() * (p.p - pose.t()), Frame::cam2};
}

Point3 transform_from_ego(const Point3& p, const RelativePose& pose) {
  if (p.frame != Frame::cam2) throw FrameMismatch("transform_from_ego expects a cam2-frame point");
  if (!pose.has_scale()) throw Error("pose scale is unset");
  return Point3{pose.R * p.p + pose.t(), Frame::cam1};
}

Eigen::Vector3d transform_velocity(const Eigen::Vector3d& v, const RelativePose& pose) {
  return pose.R.transpose() * v;
}

Eigen::Matrix3d euler_to_rotation(const EulerAngles& e) {
  const double cr = std::cos(deg2rad(e.roll_deg)), sr = std::sin(deg2rad(e.roll_deg));
  const double cp = std::cos(deg2rad(e.pitch_deg)), sp = std::sin(deg2rad(e.pitch_deg));
  const double cy = std::cos(deg2rad(e.yaw_deg)), sy = std::sin(deg2rad(e.yaw_deg));
  Eigen::Matrix3d rx, ry, rz;
  rx << 1, 0, 0, 0, cr, -sr, 0, sr, cr;
  ry << cp, 0, sp, 0, 1, 0, -sp, 0, cp;
  rz << cy, -sy, 0, sy, cy, 0, 0, 0, 1;
  return rz * ry * rx;
}

EulerAngles rotation_to_euler(const Eigen::Matrix3d& R) {
  check_rotation(R, 1e-6);
  EulerAngles e;
  const double sp = -R(2, 0);
  const double pitch = std::asin(std::clamp(sp, -1.0, 1.0));
  e.pitch_deg = rad2deg(pitch);
  if (std::abs(std::abs(e.pitch_deg) - 90.0) < 1e-6) {
    e.gimbal_lock = true;
    e.roll_deg = 0.0;
    e.yaw_deg = rad2deg(std::atan2(-R(0, 1), R(1, 1)));
  } else {
    e.roll_deg = rad2deg(std::atan2(R(2, 1), R(2, 2)));
    e.yaw_deg = rad2deg(std::atan2(R(1, 0), R(0, 0)));
  }
  return e;
}

}  // namespace coopcast::geometry
