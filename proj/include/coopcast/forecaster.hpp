#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <vector>

#include "coopcast/errors.hpp"

namespace coopcast::forecaster {

struct StateSample {
  double x = 0, y = 0;  // meters
  double u = 0, v = 0;  // m/s
};

/// Uniformly sampled trajectory with a past/future split (default 8 + 12 at
/// 0.4 s).
struct Trajectory {
  std::vector<StateSample> samples;
  int past_len = 8;
  double dt = 0.4;

  int future_len() const { return static_cast<int>(samples.size()) - past_len; }
  /// (past+future) x 4 matrix of (x, y, u, v) rows.
  Eigen::MatrixXd as_window() const;
};

/// Training window: (past+future) x 4 matrix of (x, y, u, v) in meters.
using Window = Eigen::MatrixXd;
using Dataset = std::vector<Window>;

/// One LSTM layer, gates packed as [input; forget; cell; output].
struct LstmLayer {
  Eigen::MatrixXd w_in;   // 4H x in_dim
  Eigen::MatrixXd w_rec;  // 4H x H
  Eigen::MatrixXd bias;   // 4H x 1
};

/// All trainable tensors: two encoder layers, two decoder layers, and the
/// linear head mapping the decoder state to (mu_x, mu_y, logvar_x, logvar_y).
struct ParamTensors {
  LstmLayer enc1, enc2, dec1, dec2;
  Eigen::MatrixXd head_w;  // 4 x H
  Eigen::MatrixXd head_b;  // 4 x 1

  template <class F>
  void visit(F&& f) {
    for (LstmLayer* l : {&enc1, &enc2, &dec1, &dec2}) {
      f(l->w_in);
      f(l->w_rec);
      f(l->bias);
    }
    f(head_w);
    f(head_b);
  }
  template <class F>
  void visit(F&& f) const {
    for (const LstmLayer* l : {&enc1, &enc2, &dec1, &dec2}) {
      f(l->w_in);
      f(l->w_rec);
      f(l->bias);
    }
    f(head_w);
    f(head_b);
  }
};

struct ModelConfig {
  int hidden = 32;
  int input_features = 4;  // 4 = (x,y,u,v), 2 = positions only (ablation)
  double dropout = 0.1;
  int past_len = 8;
  int future_len = 12;
};

struct ModelParams {
  ModelConfig cfg;
  ParamTensors w;
  // Per-feature standardization stats, fixed at training time.
  Eigen::Vector4d feat_mean = Eigen::Vector4d::Zero();
  Eigen::Vector4d feat_std = Eigen::Vector4d::Ones();
};

/// Random initialization (uniform +-1/sqrt(H), forget-gate bias 1).
ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);

/// Network output in standardized coordinates.
struct StdForecast {
  Eigen::MatrixXd mean;     // F x 2
  Eigen::MatrixXd log_var;  // F x 2
};

struct ForwardOptions {
  /// When set, applies Bernoulli(p) variational masks to the hidden-to-hidden
  /// input of every LSTM layer, fixed for the whole pass.
  std::optional<std::uint64_t> dropout_seed;
  /// When set (F x 2, meters), the decoder is teacher-forced with these
  /// positions; otherwise it feeds back its own predicted means.
  std::optional<Eigen::MatrixXd> teacher;
};

/// Encoder-decoder pass over an 8-sample past (past_len x 4, meters).
/// Deterministic without a dropout seed. Throws ShapeMismatch.
StdForecast forward(const ModelParams& params, const Eigen::MatrixXd& past,
                    const ForwardOptions& opts = {});

/// Predicted mean positions in meters (undoes standardization).
Eigen::MatrixXd positions_from_std(const ModelParams& params, const Eigen::MatrixXd& mean_std);
/// Per-step aleatoric variances in m^2 for (x, y).
Eigen::MatrixXd aleatoric_from_std(const ModelParams& params, const Eigen::MatrixXd& log_var);

/// Gaussian NLL with diagonal variance: mean over steps and coordinates of
/// err^2 / var + log(var) / 2, with var = max(exp(log_var), 1e-6).
double nll_loss(const Eigen::MatrixXd& pred_means, const Eigen::MatrixXd& pred_log_vars,
                const Eigen::MatrixXd& targets);

/// Teacher-forced loss of one window (standardized space); the path that
/// training and the gradient check both use.
double training_loss(const ModelParams& params, const Window& window,
                     std::optional<std::uint64_t> dropout_seed = {});

/// Backpropagation-through-time gradients of training_loss w.r.t. every
/// parameter tensor.
ParamTensors training_gradients(const ModelParams& params, const Window& window,
                                std::optional<std::uint64_t> dropout_seed = {},
                                double* loss_out = nullptr);

struct TrainOptions {
  int epochs = 150;
  int batch = 32;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  // Adam, matching the reference training setup.
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainResult {
  ModelParams params;
  std::vector<double> epoch_loss;
};

/// Adam on the window NLL, teacher-forced, seed-deterministic. Throws
/// NonFiniteLoss with the offending batch index.
TrainResult train(const Dataset& dataset, const ModelConfig& cfg, const TrainOptions& opts);

/// Per-future-step bivariate Gaussian over position, in meters.
struct ForecastDistribution {
  std::vector<Eigen::Vector2d> mean;
  std::vector<Eigen::Matrix2d> cov;  // epistemic MC spread + mean aleatoric diagonal
  int n_passes = 0;

  int horizon() const { return static_cast<int>(mean.size()); }
};

/// N stochastic closed-loop passes; population mean/covariance of the
/// predicted positions plus the mean aleatoric diagonal. p = 0 gives exactly
/// zero epistemic covariance. Throws DegenerateN if N < 2.
ForecastDistribution mc_dropout_infer(const ModelParams& params, const Eigen::MatrixXd& past, int n,
                                      std::uint64_t seed);

// Flat-vector helpers shared by Adam and the finite-difference oracle.
int tensor_count(const ParamTensors& t);
Eigen::VectorXd flatten(const ParamTensors& t);
void unflatten(const Eigen::VectorXd& v, ParamTensors& t);
ParamTensors zeros_like(const ParamTensors& t);

}  // namespace coopcast::forecaster
