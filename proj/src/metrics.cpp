#include "coopcast/metrics.hpp"

#include <Eigen/LU>
#include <cmath>

namespace coopcast::metrics {

namespace {
constexpr double kTwoPiE = 17.07946844534713413092610567902180542578;  // 2*pi*e
constexpr double kRegEps = 1e-9;
constexpr double kSingularTol = 1e-12;
}  // namespace

double ade(const std::vector<Eigen::Vector2d>& pred, const std::vector<Eigen::Vector2d>& truth) {
  if (pred.size() != truth.size()) throw LengthMismatch("ADE operands differ in length");
  if (pred.empty()) throw LengthMismatch("ADE needs at least one point");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += (pred[i] - truth[i]).norm();
  return sum / static_cast<double>(pred.size());
}

KlResult kl_divergence(const Gaussian2& p, const Gaussian2& q) {
  // Identical distributions are exactly zero, bypassing regularization.
  if (p.mu == q.mu && p.sigma == q.sigma) return {0.0, false};

  KlResult result;
  Eigen::Matrix2d sq = q.sigma;
  auto min_eig = [](const Eigen::Matrix2d& s) {
    const double tr = s.trace();
    const double det = s.determinant();
    const double disc = std::sqrt(std::max(tr * tr / 4.0 - det, 0.0));
    return tr / 2.0 - disc;
  };
  if (min_eig(sq) <= kSingularTol) {
    sq += kRegEps * Eigen::Matrix2d::Identity();
    result.regularized = true;
    if (min_eig(sq) <= 0.0) throw SingularCovariance("Sigma_q singular beyond regularization");
  }
  const double det_p = p.sigma.determinant();
  const double det_q = sq.determinant();
  if (det_p <= 0.0) throw SingularCovariance("Sigma_p must be positive definite");

  const Eigen::Matrix2d sq_inv = sq.inverse();
  const Eigen::Vector2d dmu = q.mu - p.mu;
  const double kl = 0.5 * (std::log(det_q / det_p) - 2.0 + (sq_inv * p.sigma).trace() +
                           dmu.dot(sq_inv * dmu));
  result.nats = kl;
  return result;
}

double entropy(const Gaussian2& p) {
  const double det = p.sigma.determinant();
  if (det <= 0.0) throw SingularCovariance("entropy needs det(Sigma) > 0");
  return 0.5 * std::log(kTwoPiE * kTwoPiE * det);
}

std::vector<TraceRow> divergence_trace(const forecaster::ForecastDistribution& p,
                                       const forecaster::ForecastDistribution& q) {
  if (p.horizon() != q.horizon()) throw LengthMismatch("forecast horizons differ");
  std::vector<TraceRow> trace;
  trace.reserve(p.horizon());
  for (int k = 0; k < p.horizon(); ++k) {
    const Gaussian2 gp{p.mean[k], p.cov[k]};
    const Gaussian2 gq{q.mean[k], q.cov[k]};
    const KlResult kl = kl_divergence(gp, gq);
    const double h = entropy(gp);
    TraceRow row;
    row.step = k + 1;
    row.kl_nats = kl.nats;
    row.entropy_nats = h;
    row.ratio = h != 0.0 ? kl.nats / h : 0.0;
    row.regularized = kl.regularized;
    trace.push_back(row);
  }
  return trace;
}

}  // namespace coopcast::metrics
