#include "coopcast/scenarios.hpp"

#include <Eigen/LU>
#include <chrono>
#include <cmath>

#include "coopcast/rng.hpp"

namespace coopcast::scenarios {

namespace {

std::vector<Eigen::Vector2d> plane_points(const scene::CameraTrack& track, int start, int len) {
  std::vector<Eigen::Vector2d> pts;
  pts.reserve(len);
  for (int k = start; k < start + len; ++k) pts.emplace_back(track.pos[k].x(), track.pos[k].y());
  return pts;
}

std::vector<Eigen::Vector2d> forecast_means(const forecaster::ForecastDistribution& d) {
  return d.mean;
}

}  // namespace

Eigen::MatrixXd track_window(const scene::CameraTrack& track, int start, int len) {
  if (start < 0 || start + len > static_cast<int>(track.pos.size())) {
    throw ShapeMismatch("track window out of range");
  }
  Eigen::MatrixXd w(len, 4);
  for (int k = 0; k < len; ++k) {
    const auto& p = track.pos[start + k];
    const auto& v = track.vel[start + k];
    w.row(k) << p.x(), p.y(), v.x(), v.y();
  }
  return w;
}

PoseRecovery recover_pose(const scene::CameraRig& rig, const PipelineConfig& cfg,
                          std::uint64_t seed) {
  const auto points = scene::default_point_cloud(cfg.n_points, Rng::derive(seed, "points"));
  const auto matches = scene::project_points(rig, points, cfg.sigma_px, cfg.outlier_fraction,
                                             Rng::derive(seed, "matching"));

  geometry::RansacOptions ropts;
  ropts.iterations = cfg.ransac_iterations;
  ropts.confidence = cfg.ransac_confidence;
  ropts.threshold_px = cfg.ransac_threshold_px;
  ropts.seed = Rng::derive(seed, "ransac");
  const auto ransac = geometry::ransac_fundamental(matches.matches, ropts);

  const auto essential = geometry::essential_from_fundamental(ransac.f, rig.k1, rig.k2);
  std::vector<geometry::Correspondence> inliers;
  for (std::size_t i = 0; i < matches.matches.size(); ++i) {
    if (ransac.inlier_mask[i]) inliers.push_back(matches.matches[i]);
  }
  auto pose = geometry::decompose_essential(essential, inliers, rig.k1, rig.k2);
  pose = geometry::set_scale(pose, rig.pose.t().norm());

  PoseRecovery rec;
  rec.estimated = pose;
  rec.truth_rpy_deg = geometry::rotation_to_euler(rig.pose.R).rpy();
  rec.est_rpy_deg = geometry::rotation_to_euler(pose.R).rpy();
  rec.rpy_err_deg = (rec.est_rpy_deg - rec.truth_rpy_deg).cwiseAbs();
  rec.t_hat_err = std::min((pose.t_hat - rig.pose.t_hat).norm(),
                           (pose.t_hat + rig.pose.t_hat).norm());
  rec.n_matches = static_cast<int>(matches.matches.size());
  rec.n_inliers = ransac.inlier_count;

  int true_in = 0, recalled = 0, admitted_out = 0, total_out = 0;
  for (std::size_t i = 0; i < matches.matches.size(); ++i) {
    if (matches.inlier_labels[i]) {
      ++true_in;
      if (ransac.inlier_mask[i]) ++recalled;
    } else {
      ++total_out;
      if (ransac.inlier_mask[i]) ++admitted_out;
    }
  }
  rec.inlier_recall = true_in > 0 ? static_cast<double>(recalled) / true_in : 0.0;
  rec.outlier_admitted = total_out > 0 ? static_cast<double>(admitted_out) / total_out : 0.0;
  return rec;
}

double transform_ade(const scene::CameraRig& rig, const scene::GroundTruthWalk& walk,
                     const geometry::RelativePose& pose) {
  const auto cam1 = scene::observe(walk, rig, 1);
  const auto cam2 = scene::observe(walk, rig, 2);
  const auto transformed = scene::transform_track(cam1, pose);
  return metrics::ade(plane_points(transformed, 0, transformed.pos.size()),
                      plane_points(cam2, 0, cam2.pos.size()));
}

ScenarioReport run_cooperative(const scene::CameraRig& rig, const scene::GroundTruthWalk& walk,
                               const forecaster::ModelParams& model, int n_passes,
                               std::uint64_t seed, const PipelineConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const int past = model.cfg.past_len;
  const int future = model.cfg.future_len;
  if (walk.size() < past + future) throw ShapeMismatch("walk shorter than one forecast window");

  ScenarioReport report;
  report.pose = recover_pose(rig, cfg, Rng::derive(seed, "pose"));

  const auto cam1 = scene::observe(walk, rig, 1);
  const auto cam2 = scene::observe(walk, rig, 2);
  const auto transformed = scene::transform_track(cam1, report.pose.estimated);
  report.transform_ade = metrics::ade(plane_points(transformed, 0, transformed.pos.size()),
                                      plane_points(cam2, 0, cam2.pos.size()));

  const Eigen::MatrixXd past_transformed = track_window(transformed, 0, past);
  const Eigen::MatrixXd past_native = track_window(cam2, 0, past);
  report.forecast_transformed = forecaster::mc_dropout_infer(model, past_transformed, n_passes,
                                                             Rng::derive(seed, "mc-transformed"));
  report.forecast_native =
      forecaster::mc_dropout_infer(model, past_native, n_passes, Rng::derive(seed, "mc-native"));

  const auto truth_future = plane_points(cam2, past, future);
  report.forecast_ade_transformed =
      metrics::ade(forecast_means(report.forecast_transformed), truth_future);
  report.forecast_ade_native = metrics::ade(forecast_means(report.forecast_native), truth_future);
  report.trace = metrics::divergence_trace(report.forecast_native, report.forecast_transformed);

  report.runtime_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

std::vector<SensitivityRow> run_sensitivity(const SensitivityConfig& cfg,
                                            const scene::CameraRig& rig,
                                            const scene::GroundTruthWalk& walk,
                                            const geometry::RelativePose& nominal) {
  if (cfg.samples_per_sigma < 2) throw Error("sensitivity needs at least 2 samples per sigma");
  for (std::size_t i = 0; i < cfg.sigma_fractions.size(); ++i) {
    if (cfg.sigma_fractions[i] <= 0.0 ||
        (i > 0 && cfg.sigma_fractions[i] <= cfg.sigma_fractions[i - 1])) {
      throw Error("sigma grid must be positive ascending");
    }
  }

  const Eigen::Vector3d nominal_rpy = geometry::rotation_to_euler(nominal.R).rpy();
  const Eigen::Vector3d nominal_t = nominal.t();

  std::vector<SensitivityRow> rows;
  Rng rng(Rng::derive(cfg.seed, "sensitivity"));
  for (double sigma : cfg.sigma_fractions) {
    std::vector<double> ades;
    for (int s = 0; s < cfg.samples_per_sigma; ++s) {
      geometry::EulerAngles noisy(
          nominal_rpy(0) + rng.normal(0.0, sigma * std::abs(nominal_rpy(0))),
          nominal_rpy(1) + rng.normal(0.0, sigma * std::abs(nominal_rpy(1))),
          nominal_rpy(2) + rng.normal(0.0, sigma * std::abs(nominal_rpy(2))));
      Eigen::Vector3d t = nominal_t;
      if (cfg.perturb_translation) {
        for (int j = 0; j < 3; ++j) t(j) += rng.normal(0.0, sigma * std::abs(nominal_t(j)));
      }
      geometry::RelativePose perturbed;
      perturbed.R = geometry::euler_to_rotation(noisy);
      perturbed.scale = t.norm();
      perturbed.t_hat = perturbed.scale > 0 ? Eigen::Vector3d(t / perturbed.scale)
                                            : Eigen::Vector3d::UnitX();
      ades.push_back(transform_ade(rig, walk, perturbed));
    }
    double mean = 0.0;
    for (double a : ades) mean += a;
    mean /= ades.size();
    double var = 0.0;
    for (double a : ades) var += (a - mean) * (a - mean);
    var /= ades.size();
    rows.push_back({sigma, mean, std::sqrt(var)});
  }
  return rows;
}

ScenarioReport run_occlusion(scene::OcclusionKind kind, const scene::CameraRig& rig,
                             scene::GroundTruthWalk walk, const forecaster::ModelParams& model,
                             int n_passes, std::uint64_t seed, const PipelineConfig& cfg) {
  scene::apply_occlusion(walk, kind);
  ScenarioReport report = run_cooperative(rig, walk, model, n_passes, seed, cfg);

  const int past = model.cfg.past_len;
  const int future = model.cfg.future_len;
  const auto cam1 = scene::observe(walk, rig, 1);
  const auto cam2 = scene::observe(walk, rig, 2);
  const auto transformed = scene::transform_track(cam1, report.pose.estimated);

  // Merge: native camera-2 samples where visible, transformed camera-1 fill
  // where occluded.
  scene::CameraTrack merged = cam2;
  std::vector<Eigen::Vector2d> fill, fill_truth;
  for (int k = 0; k < past; ++k) {
    if (cam2.occluded[k]) {
      merged.pos[k] = transformed.pos[k];
      merged.vel[k] = transformed.vel[k];
      fill.emplace_back(transformed.pos[k].x(), transformed.pos[k].y());
      fill_truth.emplace_back(cam2.pos[k].x(), cam2.pos[k].y());
    }
  }
  report.masked_past_steps = static_cast<int>(fill.size());
  report.fill_ade = fill.empty() ? 0.0 : metrics::ade(fill, fill_truth);

  const Eigen::MatrixXd merged_past = track_window(merged, 0, past);
  report.forecast_transformed =
      forecaster::mc_dropout_infer(model, merged_past, n_passes, Rng::derive(seed, "mc-merged"));
  const auto truth_future = plane_points(cam2, past, future);
  report.forecast_ade_transformed =
      metrics::ade(forecast_means(report.forecast_transformed), truth_future);
  report.trace = metrics::divergence_trace(report.forecast_native, report.forecast_transformed);

  // Mahalanobis containment of the ground truth. The criterion is denominated
  // in masked steps, so the scored window spans the occlusion duration,
  // starting at the merge point where the predictive distribution begins.
  report.chi2_bound = kind == scene::OcclusionKind::partial ? 2.30 : 6.18;
  const int scored = std::max(1, std::min(report.masked_past_steps, future));
  int inside = 0;
  for (int k = 0; k < scored; ++k) {
    const Eigen::Vector2d d = truth_future[k] - report.forecast_transformed.mean[k];
    Eigen::Matrix2d cov = report.forecast_transformed.cov[k];
    if (cov.determinant() <= 1e-18) cov += 1e-9 * Eigen::Matrix2d::Identity();
    const double m2 = d.dot(cov.inverse() * d);
    if (m2 <= report.chi2_bound) ++inside;
  }
  report.containment = static_cast<double>(inside) / scored;
  return report;
}

forecaster::Dataset synthetic_dataset(int n_windows, std::uint64_t seed) {
  forecaster::Dataset dataset;
  dataset.reserve(n_windows);
  Rng rng(Rng::derive(seed, "walks"));
  for (int i = 0; i < n_windows; ++i) {
    scene::WalkOptions opts;
    const int kind = rng.uniform_int(3);
    opts.kind = kind == 0 ? scene::WalkKind::straight
                          : (kind == 1 ? scene::WalkKind::turn : scene::WalkKind::s_curve);
    opts.heading_deg = rng.uniform(0.0, 360.0);
    opts.speed = rng.uniform(0.8, 1.6);
    opts.turn_rate_deg_s = rng.uniform(-20.0, 20.0);
    opts.s_curve_amp_deg = rng.uniform(10.0, 45.0);
    opts.start = Eigen::Vector3d(rng.uniform(-6.0, 6.0), rng.uniform(-4.0, 4.0), 5.0);
    const auto walk = scene::synth_walk(opts);
    Eigen::MatrixXd w(walk.size(), 4);
    for (int k = 0; k < walk.size(); ++k) {
      w.row(k) << walk.pos[k].x(), walk.pos[k].y(), walk.vel[k].x(), walk.vel[k].y();
    }
    dataset.push_back(std::move(w));
  }
  return dataset;
}

}  // namespace coopcast::scenarios
