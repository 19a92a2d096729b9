#pragma once

#include <Eigen/Core>
#include <vector>

#include "coopcast/errors.hpp"
#include "coopcast/forecaster.hpp"

namespace coopcast::metrics {

/// Bivariate Gaussian over position (meters, m^2).
struct Gaussian2 {
  Eigen::Vector2d mu = Eigen::Vector2d::Zero();
  Eigen::Matrix2d sigma = Eigen::Matrix2d::Identity();
};

struct KlResult {
  double nats = 0.0;
  bool regularized = false;  // Sigma_q needed the +1e-9 I floor
};

/// Average displacement error: mean Euclidean distance between paired points.
double ade(const std::vector<Eigen::Vector2d>& pred, const std::vector<Eigen::Vector2d>& truth);

/// Closed-form KL(p||q) for bivariate Gaussians (nats). Near-singular Sigma_q
/// is regularized by +1e-9 I and flagged; throws SingularCovariance if that
/// is still not invertible.
KlResult kl_divergence(const Gaussian2& p, const Gaussian2& q);

/// Shannon entropy H(p) = 1/2 log((2 pi e)^2 det Sigma), nats.
double entropy(const Gaussian2& p);

struct TraceRow {
  int step = 0;
  double kl_nats = 0.0;
  double entropy_nats = 0.0;
  double ratio = 0.0;
  bool regularized = false;
};

/// Per-step KL(p||q), H(p) and their ratio across two forecast horizons.
/// `p` is the reference (no-occlusion, camera-2 native) forecast.
std::vector<TraceRow> divergence_trace(const forecaster::ForecastDistribution& p,
                                       const forecaster::ForecastDistribution& q);

}  // namespace coopcast::metrics
