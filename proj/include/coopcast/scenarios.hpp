#pragma once

#include <cstdint>
#include <vector>

#include "coopcast/forecaster.hpp"
#include "coopcast/metrics.hpp"
#include "coopcast/scene.hpp"

namespace coopcast::scenarios {

/// Front-end configuration shared by the end-to-end runs.
struct PipelineConfig {
  int n_points = 200;
  double sigma_px = 0.5;
  double outlier_fraction = 0.2;
  double ransac_threshold_px = 1.0;
  int ransac_iterations = 1000;
  double ransac_confidence = 0.99;
};

struct PoseRecovery {
  geometry::RelativePose estimated;  // scale fixed from the true baseline
  Eigen::Vector3d truth_rpy_deg = Eigen::Vector3d::Zero();
  Eigen::Vector3d est_rpy_deg = Eigen::Vector3d::Zero();
  Eigen::Vector3d rpy_err_deg = Eigen::Vector3d::Zero();
  double t_hat_err = 0.0;  // || t_hat_est - t_hat_truth ||
  int n_matches = 0;
  int n_inliers = 0;
  double inlier_recall = 0.0;    // true inliers recovered
  double outlier_admitted = 0.0;  // labeled outliers inside the consensus
};

/// POSE stage: synthetic matches -> RANSAC F -> E -> decomposition -> scale.
PoseRecovery recover_pose(const scene::CameraRig& rig, const PipelineConfig& cfg,
                          std::uint64_t seed);

struct ScenarioReport {
  PoseRecovery pose;
  double transform_ade = 0.0;  // transformed cam1 track vs cam2 ground truth
  double forecast_ade_transformed = 0.0;
  double forecast_ade_native = 0.0;
  forecaster::ForecastDistribution forecast_transformed;
  forecaster::ForecastDistribution forecast_native;
  std::vector<metrics::TraceRow> trace;  // p = native, q = transformed
  // occlusion runs only
  int masked_past_steps = 0;
  double fill_ade = 0.0;      // transformed fill vs ground truth on masked steps
  double containment = 1.0;   // fraction of scored steps inside the sigma bound
  double chi2_bound = 0.0;
  double runtime_ms = 0.0;
};

/// Full cooperative pipeline: pose recovery, trajectory transfer, MC-dropout
/// forecasts from the transformed and the native camera-2 past, ADE and the
/// per-step KL/entropy trace.
ScenarioReport run_cooperative(const scene::CameraRig& rig, const scene::GroundTruthWalk& walk,
                               const forecaster::ModelParams& model, int n_passes,
                               std::uint64_t seed, const PipelineConfig& cfg = {});

/// ADE of the cam1 walk transformed with `pose` against the camera-2 ground
/// truth, over all samples.
double transform_ade(const scene::CameraRig& rig, const scene::GroundTruthWalk& walk,
                     const geometry::RelativePose& pose);

struct SensitivityConfig {
  std::vector<double> sigma_fractions{0.01, 0.02, 0.05, 0.10, 0.20, 0.30, 0.40, 0.50};
  int samples_per_sigma = 20;  // reference protocol
  bool perturb_translation = true;
  std::uint64_t seed = 0;
};

struct SensitivityRow {
  double sigma_fraction = 0.0;
  double ade_mean = 0.0;
  double ade_std = 0.0;
};

/// Pose-noise sweep: per sigma, Gaussian noise with std sigma*|nominal| on
/// each Euler angle (and translation component), rebuild the pose, transform
/// the cam1 walk and measure ADE against camera-2 ground truth.
std::vector<SensitivityRow> run_sensitivity(const SensitivityConfig& cfg,
                                            const scene::CameraRig& rig,
                                            const scene::GroundTruthWalk& walk,
                                            const geometry::RelativePose& nominal);

/// Occlusion scenario: camera-2 past gaps (per the scene occlusion defaults)
/// are filled with transformed camera-1 samples before forecasting. The
/// containment fraction counts ground-truth steps inside the Mahalanobis
/// bound — chi^2 <= 6.18 (2-sigma) for intermittent, 2.30 (1-sigma) for
/// partial — over a forecast window spanning the occlusion duration (the
/// masked steps), starting at the merge point.
ScenarioReport run_occlusion(scene::OcclusionKind kind, const scene::CameraRig& rig,
                             scene::GroundTruthWalk walk, const forecaster::ModelParams& model,
                             int n_passes, std::uint64_t seed, const PipelineConfig& cfg = {});

/// (x, y, u, v) window rows of a camera track segment.
Eigen::MatrixXd track_window(const scene::CameraTrack& track, int start, int len);

/// Synthetic training corpus: one 20-sample window per walk, with randomized
/// kind, heading, speed and start position.
forecaster::Dataset synthetic_dataset(int n_windows, std::uint64_t seed);

}  // namespace coopcast::scenarios
