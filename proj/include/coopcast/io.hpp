#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "coopcast/data.hpp"
#include "coopcast/forecaster.hpp"
#include "coopcast/metrics.hpp"
#include "coopcast/scenarios.hpp"
#include "coopcast/scene.hpp"

namespace coopcast::io {

/// Writes via a temp file in the same directory followed by a rename.
void atomic_write(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);
std::uint64_t file_checksum(const std::string& path);

// Pose JSON: {R: row-major 9 floats, t_hat: 3, scale: 1, euler_deg: [r,p,y]}
std::string pose_to_json(const geometry::RelativePose& pose);
geometry::RelativePose pose_from_json(const std::string& json_text);

// Rig JSON: pose plus intrinsics and image size.
std::string rig_to_json(const scene::CameraRig& rig);
scene::CameraRig rig_from_json(const std::string& json_text);

// Correspondence CSV: header "ax,ay,bx,by", one row per match.
std::string correspondences_to_csv(const std::vector<geometry::Correspondence>& matches);
std::vector<geometry::Correspondence> correspondences_from_csv(const std::string& csv_text);

// Walk CSV: t,x,y,z,u,v,occluded_cam1,occluded_cam2
std::string walk_to_csv(const scene::GroundTruthWalk& walk);
scene::GroundTruthWalk walk_from_csv(const std::string& csv_text);

// Forecast CSV: step,mu_x,mu_y,s_xx,s_xy,s_yy
std::string forecast_to_csv(const forecaster::ForecastDistribution& dist);

// Trace CSV: step,kl_nats,entropy_nats,ratio
std::string trace_to_csv(const std::vector<metrics::TraceRow>& trace);

// Sensitivity CSV: sigma_fraction,ade_mean,ade_std
std::string sensitivity_to_csv(const std::vector<scenarios::SensitivityRow>& rows);

// Versioned JSON model checkpoint (weights, stats, hyperparameters).
std::string checkpoint_to_json(const forecaster::ModelParams& params);
forecaster::ModelParams checkpoint_from_json(const std::string& json_text);

void save_checkpoint(const forecaster::ModelParams& params, const std::string& path);
forecaster::ModelParams load_checkpoint(const std::string& path);

}  // namespace coopcast::io
