#include "coopcast/forecaster.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "coopcast/rng.hpp"

namespace coopcast::forecaster {

namespace {

constexpr double kVarFloor = 1e-6;

Eigen::VectorXd sigmoid(const Eigen::VectorXd& x) {
  return (1.0 / (1.0 + (-x.array()).exp())).matrix();
}

struct Masks {
  Eigen::VectorXd e1, e2, d1, d2;
};

Masks make_masks(int hidden, double p, std::optional<std::uint64_t> seed) {
  Masks m;
  m.e1 = Eigen::VectorXd::Ones(hidden);
  m.e2 = Eigen::VectorXd::Ones(hidden);
  m.d1 = Eigen::VectorXd::Ones(hidden);
  m.d2 = Eigen::VectorXd::Ones(hidden);
  if (!seed || p <= 0.0) return m;
  Rng rng(Rng::derive(*seed, "dropout"));
  const double keep_scale = 1.0 / (1.0 - p);
  for (Eigen::VectorXd* v : {&m.e1, &m.e2, &m.d1, &m.d2}) {
    for (int i = 0; i < hidden; ++i) (*v)(i) = rng.bernoulli(p) ? 0.0 : keep_scale;
  }
  return m;
}

// Per-step activations of one LSTM layer, kept for backpropagation.
struct LayerCache {
  std::vector<Eigen::VectorXd> x, hm, gi, gf, gg, go, c, tc, h;
  Eigen::VectorXd h0, c0;
};

void forward_layer(const LstmLayer& layer, const std::vector<Eigen::VectorXd>& inputs,
                   const Eigen::VectorXd& mask, const Eigen::VectorXd& h0,
                   const Eigen::VectorXd& c0, LayerCache& cache) {
  const int hidden = static_cast<int>(layer.w_rec.cols());
  const int steps = static_cast<int>(inputs.size());
  cache.h0 = h0;
  cache.c0 = c0;
  Eigen::VectorXd h = h0, c = c0;
  for (int t = 0; t < steps; ++t) {
    const Eigen::VectorXd hm = h.cwiseProduct(mask);
    const Eigen::VectorXd z = layer.w_in * inputs[t] + layer.w_rec * hm + layer.bias.col(0);
    const Eigen::VectorXd gi = sigmoid(z.head(hidden));
    const Eigen::VectorXd gf = sigmoid(z.segment(hidden, hidden));
    const Eigen::VectorXd gg = z.segment(2 * hidden, hidden).array().tanh();
    const Eigen::VectorXd go = sigmoid(z.tail(hidden));
    const Eigen::VectorXd c_new = gf.cwiseProduct(c) + gi.cwiseProduct(gg);
    const Eigen::VectorXd tc = c_new.array().tanh();
    h = go.cwiseProduct(tc);
    cache.x.push_back(inputs[t]);
    cache.hm.push_back(hm);
    cache.gi.push_back(gi);
    cache.gf.push_back(gf);
    cache.gg.push_back(gg);
    cache.go.push_back(go);
    cache.c.push_back(c_new);
    cache.tc.push_back(tc);
    cache.h.push_back(h);
    c = c_new;
  }
}

// dh_ext[t] is the gradient flowing into h_t from consumers above; the
// *_final_extra terms carry gradients into the final (h, c) from the decoder
// initialization. Fills dx (gradient w.r.t. the inputs) and the gradients of
// the initial state.
void backward_layer(const LstmLayer& layer, const LayerCache& cache, const Eigen::VectorXd& mask,
                    const std::vector<Eigen::VectorXd>& dh_ext,
                    const Eigen::VectorXd& dh_final_extra, const Eigen::VectorXd& dc_final_extra,
                    LstmLayer& grads, std::vector<Eigen::VectorXd>* dx_out, Eigen::VectorXd* dh0_out,
                    Eigen::VectorXd* dc0_out) {
  const int hidden = static_cast<int>(layer.w_rec.cols());
  const int steps = static_cast<int>(cache.x.size());
  Eigen::VectorXd dh_rec = Eigen::VectorXd::Zero(hidden);
  Eigen::VectorXd dc = Eigen::VectorXd::Zero(hidden);
  if (dx_out) dx_out->assign(steps, Eigen::VectorXd());

  for (int t = steps - 1; t >= 0; --t) {
    Eigen::VectorXd dh = dh_ext[t] + dh_rec;
    if (t == steps - 1) {
      dh += dh_final_extra;
      dc += dc_final_extra;
    }
    const Eigen::VectorXd& tc = cache.tc[t];
    const Eigen::VectorXd d_go = dh.cwiseProduct(tc);
    dc += dh.cwiseProduct(cache.go[t])
              .cwiseProduct((1.0 - tc.array().square()).matrix());
    const Eigen::VectorXd& c_prev = t > 0 ? cache.c[t - 1] : cache.c0;
    const Eigen::VectorXd d_gf = dc.cwiseProduct(c_prev);
    const Eigen::VectorXd d_gi = dc.cwiseProduct(cache.gg[t]);
    const Eigen::VectorXd d_gg = dc.cwiseProduct(cache.gi[t]);
    const Eigen::VectorXd dc_prev = dc.cwiseProduct(cache.gf[t]);

    Eigen::VectorXd dz(4 * hidden);
    dz.head(hidden) =
        d_gi.cwiseProduct(cache.gi[t]).cwiseProduct((1.0 - cache.gi[t].array()).matrix());
    dz.segment(hidden, hidden) =
        d_gf.cwiseProduct(cache.gf[t]).cwiseProduct((1.0 - cache.gf[t].array()).matrix());
    dz.segment(2 * hidden, hidden) =
        d_gg.cwiseProduct((1.0 - cache.gg[t].array().square()).matrix());
    dz.tail(hidden) =
        d_go.cwiseProduct(cache.go[t]).cwiseProduct((1.0 - cache.go[t].array()).matrix());

    grads.w_in.noalias() += dz * cache.x[t].transpose();
    grads.w_rec.noalias() += dz * cache.hm[t].transpose();
    grads.bias.col(0) += dz;

    if (dx_out) (*dx_out)[t] = layer.w_in.transpose() * dz;
    dh_rec = (layer.w_rec.transpose() * dz).cwiseProduct(mask);
    dc = dc_prev;
  }
  if (dh0_out) *dh0_out = dh_rec;
  if (dc0_out) *dc0_out = dc;
}

struct ModelTape {
  Masks masks;
  LayerCache e1, e2, d1, d2;
  Eigen::MatrixXd mean_std, logvar_std;  // F x 2
};

Eigen::MatrixXd standardize(const ModelParams& params, const Eigen::MatrixXd& raw) {
  Eigen::MatrixXd out = raw;
  for (int j = 0; j < raw.cols(); ++j) {
    out.col(j) = (raw.col(j).array() - params.feat_mean(j)) / params.feat_std(j);
  }
  return out;
}

// Teacher-forced or closed-loop encoder-decoder pass in standardized space.
void forward_model(const ModelParams& params, const Eigen::MatrixXd& past,
                   const ForwardOptions& opts, ModelTape& tape) {
  const auto& cfg = params.cfg;
  if (past.rows() != cfg.past_len || past.cols() != 4) {
    throw ShapeMismatch("past must be " + std::to_string(cfg.past_len) + " x 4");
  }
  if (opts.teacher &&
      (opts.teacher->rows() != cfg.future_len || opts.teacher->cols() != 2)) {
    throw ShapeMismatch("teacher targets must be future_len x 2");
  }

  tape.masks = make_masks(cfg.hidden, cfg.dropout, opts.dropout_seed);
  const Eigen::MatrixXd xs = standardize(params, past);

  std::vector<Eigen::VectorXd> enc_inputs(cfg.past_len);
  for (int t = 0; t < cfg.past_len; ++t) {
    enc_inputs[t] = xs.row(t).head(cfg.input_features).transpose();
  }

  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(cfg.hidden);
  forward_layer(params.w.enc1, enc_inputs, tape.masks.e1, zero, zero, tape.e1);
  forward_layer(params.w.enc2, tape.e1.h, tape.masks.e2, zero, zero, tape.e2);

  Eigen::MatrixXd teacher_std;
  if (opts.teacher) {
    Eigen::MatrixXd t4(cfg.future_len, 2);
    t4.col(0) = (opts.teacher->col(0).array() - params.feat_mean(0)) / params.feat_std(0);
    t4.col(1) = (opts.teacher->col(1).array() - params.feat_mean(1)) / params.feat_std(1);
    teacher_std = t4;
  }

  // Decoder seeded by the final encoder state, fed with the previous position.
  Eigen::VectorXd h1 = tape.e1.h.back(), c1 = tape.e1.c.back();
  Eigen::VectorXd h2 = tape.e2.h.back(), c2 = tape.e2.c.back();
  tape.d1.h0 = h1;
  tape.d1.c0 = c1;
  tape.d2.h0 = h2;
  tape.d2.c0 = c2;
  tape.mean_std.resize(cfg.future_len, 2);
  tape.logvar_std.resize(cfg.future_len, 2);

  Eigen::VectorXd d_in = xs.row(cfg.past_len - 1).head(2).transpose();
  const int hidden = cfg.hidden;
  for (int k = 0; k < cfg.future_len; ++k) {
    // dec1 step
    {
      const Eigen::VectorXd hm = h1.cwiseProduct(tape.masks.d1);
      const Eigen::VectorXd z =
          params.w.dec1.w_in * d_in + params.w.dec1.w_rec * hm + params.w.dec1.bias.col(0);
      const Eigen::VectorXd gi = sigmoid(z.head(hidden));
      const Eigen::VectorXd gf = sigmoid(z.segment(hidden, hidden));
      const Eigen::VectorXd gg = z.segment(2 * hidden, hidden).array().tanh();
      const Eigen::VectorXd go = sigmoid(z.tail(hidden));
      const Eigen::VectorXd c_new = gf.cwiseProduct(c1) + gi.cwiseProduct(gg);
      const Eigen::VectorXd tc = c_new.array().tanh();
      const Eigen::VectorXd h_new = go.cwiseProduct(tc);
      tape.d1.x.push_back(d_in);
      tape.d1.hm.push_back(hm);
      tape.d1.gi.push_back(gi);
      tape.d1.gf.push_back(gf);
      tape.d1.gg.push_back(gg);
      tape.d1.go.push_back(go);
      tape.d1.c.push_back(c_new);
      tape.d1.tc.push_back(tc);
      tape.d1.h.push_back(h_new);
      h1 = h_new;
      c1 = c_new;
    }
    // dec2 step
    {
      const Eigen::VectorXd hm = h2.cwiseProduct(tape.masks.d2);
      const Eigen::VectorXd z =
          params.w.dec2.w_in * h1 + params.w.dec2.w_rec * hm + params.w.dec2.bias.col(0);
      const Eigen::VectorXd gi = sigmoid(z.head(hidden));
      const Eigen::VectorXd gf = sigmoid(z.segment(hidden, hidden));
      const Eigen::VectorXd gg = z.segment(2 * hidden, hidden).array().tanh();
      const Eigen::VectorXd go = sigmoid(z.tail(hidden));
      const Eigen::VectorXd c_new = gf.cwiseProduct(c2) + gi.cwiseProduct(gg);
      const Eigen::VectorXd tc = c_new.array().tanh();
      const Eigen::VectorXd h_new = go.cwiseProduct(tc);
      tape.d2.x.push_back(h1);
      tape.d2.hm.push_back(hm);
      tape.d2.gi.push_back(gi);
      tape.d2.gf.push_back(gf);
      tape.d2.gg.push_back(gg);
      tape.d2.go.push_back(go);
      tape.d2.c.push_back(c_new);
      tape.d2.tc.push_back(tc);
      tape.d2.h.push_back(h_new);
      h2 = h_new;
      c2 = c_new;
    }
    const Eigen::VectorXd out = params.w.head_w * h2 + params.w.head_b.col(0);
    tape.mean_std.row(k) = out.head(2).transpose();
    tape.logvar_std.row(k) = out.tail(2).transpose();

    if (k + 1 < cfg.future_len) {
      d_in = opts.teacher ? teacher_std.row(k).transpose()
                          : Eigen::VectorXd(out.head(2));
    }
  }
}

double clamped_var(double log_var) { return std::max(std::exp(log_var), kVarFloor); }

}  // namespace

Eigen::MatrixXd Trajectory::as_window() const {
  Eigen::MatrixXd w(static_cast<int>(samples.size()), 4);
  for (int i = 0; i < w.rows(); ++i) {
    w.row(i) << samples[i].x, samples[i].y, samples[i].u, samples[i].v;
  }
  return w;
}

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  if (cfg.hidden < 1) throw Error("hidden size must be positive");
  if (cfg.input_features != 2 && cfg.input_features != 4) {
    throw Error("input_features must be 2 or 4");
  }
  if (cfg.dropout < 0.0 || cfg.dropout >= 1.0) throw Error("dropout must be in [0, 1)");

  ModelParams params;
  params.cfg = cfg;
  const int h = cfg.hidden;
  auto layer = [&](int in_dim) {
    LstmLayer l;
    l.w_in.resize(4 * h, in_dim);
    l.w_rec.resize(4 * h, h);
    l.bias = Eigen::MatrixXd::Zero(4 * h, 1);
    return l;
  };
  params.w.enc1 = layer(cfg.input_features);
  params.w.enc2 = layer(h);
  params.w.dec1 = layer(2);
  params.w.dec2 = layer(h);
  params.w.head_w.resize(4, h);
  params.w.head_b = Eigen::MatrixXd::Zero(4, 1);

  Rng rng(Rng::derive(seed, "init"));
  const double bound = 1.0 / std::sqrt(static_cast<double>(h));
  params.w.visit([&](Eigen::MatrixXd& m) {
    for (int c = 0; c < m.cols(); ++c) {
      for (int r = 0; r < m.rows(); ++r) m(r, c) = rng.uniform(-bound, bound);
    }
  });
  // Forget-gate bias 1, zero head bias (initial predicted variance = 1).
  for (LstmLayer* l : {&params.w.enc1, &params.w.enc2, &params.w.dec1, &params.w.dec2}) {
    l->bias = Eigen::MatrixXd::Zero(4 * h, 1);
    l->bias.block(h, 0, h, 1).setConstant(1.0);
  }
  params.w.head_b.setZero();
  return params;
}

StdForecast forward(const ModelParams& params, const Eigen::MatrixXd& past,
                    const ForwardOptions& opts) {
  ModelTape tape;
  forward_model(params, past, opts, tape);
  return {tape.mean_std, tape.logvar_std};
}

Eigen::MatrixXd positions_from_std(const ModelParams& params, const Eigen::MatrixXd& mean_std) {
  Eigen::MatrixXd out = mean_std;
  out.col(0) = mean_std.col(0).array() * params.feat_std(0) + params.feat_mean(0);
  out.col(1) = mean_std.col(1).array() * params.feat_std(1) + params.feat_mean(1);
  return out;
}

Eigen::MatrixXd aleatoric_from_std(const ModelParams& params, const Eigen::MatrixXd& log_var) {
  Eigen::MatrixXd out(log_var.rows(), 2);
  for (int k = 0; k < log_var.rows(); ++k) {
    out(k, 0) = clamped_var(log_var(k, 0)) * params.feat_std(0) * params.feat_std(0);
    out(k, 1) = clamped_var(log_var(k, 1)) * params.feat_std(1) * params.feat_std(1);
  }
  return out;
}

double nll_loss(const Eigen::MatrixXd& pred_means, const Eigen::MatrixXd& pred_log_vars,
                const Eigen::MatrixXd& targets) {
  if (pred_means.rows() != targets.rows() || pred_means.cols() != targets.cols() ||
      pred_log_vars.rows() != pred_means.rows() || pred_log_vars.cols() != pred_means.cols()) {
    throw ShapeMismatch("nll_loss operands must have equal shapes");
  }
  double sum = 0.0;
  for (int k = 0; k < pred_means.rows(); ++k) {
    for (int c = 0; c < pred_means.cols(); ++c) {
      const double err = pred_means(k, c) - targets(k, c);
      const double var = clamped_var(pred_log_vars(k, c));
      sum += err * err / var + pred_log_vars(k, c) / 2.0;
    }
  }
  return sum / static_cast<double>(pred_means.rows() * pred_means.cols());
}

double training_loss(const ModelParams& params, const Window& window,
                     std::optional<std::uint64_t> dropout_seed) {
  const auto& cfg = params.cfg;
  if (window.rows() != cfg.past_len + cfg.future_len || window.cols() != 4) {
    throw ShapeMismatch("window must be (past+future) x 4");
  }
  const Eigen::MatrixXd past = window.topRows(cfg.past_len);
  const Eigen::MatrixXd targets = window.bottomRows(cfg.future_len).leftCols(2);

  ForwardOptions opts;
  opts.dropout_seed = dropout_seed;
  opts.teacher = targets;
  ModelTape tape;
  forward_model(params, past, opts, tape);

  Eigen::MatrixXd targets_std(cfg.future_len, 2);
  targets_std.col(0) = (targets.col(0).array() - params.feat_mean(0)) / params.feat_std(0);
  targets_std.col(1) = (targets.col(1).array() - params.feat_mean(1)) / params.feat_std(1);
  return nll_loss(tape.mean_std, tape.logvar_std, targets_std);
}

ParamTensors training_gradients(const ModelParams& params, const Window& window,
                                std::optional<std::uint64_t> dropout_seed, double* loss_out) {
  const auto& cfg = params.cfg;
  if (window.rows() != cfg.past_len + cfg.future_len || window.cols() != 4) {
    throw ShapeMismatch("window must be (past+future) x 4");
  }
  const Eigen::MatrixXd past = window.topRows(cfg.past_len);
  const Eigen::MatrixXd targets = window.bottomRows(cfg.future_len).leftCols(2);

  ForwardOptions opts;
  opts.dropout_seed = dropout_seed;
  opts.teacher = targets;
  ModelTape tape;
  forward_model(params, past, opts, tape);

  Eigen::MatrixXd targets_std(cfg.future_len, 2);
  targets_std.col(0) = (targets.col(0).array() - params.feat_mean(0)) / params.feat_std(0);
  targets_std.col(1) = (targets.col(1).array() - params.feat_mean(1)) / params.feat_std(1);

  if (loss_out) *loss_out = nll_loss(tape.mean_std, tape.logvar_std, targets_std);

  ParamTensors grads = zeros_like(params.w);
  const int f_steps = cfg.future_len;
  const double norm = 1.0 / static_cast<double>(2 * f_steps);

  std::vector<Eigen::VectorXd> dh2(f_steps);
  for (int k = 0; k < f_steps; ++k) {
    Eigen::VectorXd dout = Eigen::VectorXd::Zero(4);
    for (int c = 0; c < 2; ++c) {
      const double err = tape.mean_std(k, c) - targets_std(k, c);
      const double lv = tape.logvar_std(k, c);
      const double var = clamped_var(lv);
      dout(c) = 2.0 * err / var * norm;
      const bool clamped = std::exp(lv) < kVarFloor;
      dout(2 + c) = ((clamped ? 0.0 : -err * err / var) + 0.5) * norm;
    }
    grads.head_w.noalias() += dout * tape.d2.h[k].transpose();
    grads.head_b.col(0) += dout;
    dh2[k] = params.w.head_w.transpose() * dout;
  }

  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(cfg.hidden);
  std::vector<Eigen::VectorXd> dx_d2, dx_e2;
  Eigen::VectorXd dh0_d2, dc0_d2, dh0_d1, dc0_d1;
  backward_layer(params.w.dec2, tape.d2, tape.masks.d2, dh2, zero, zero, grads.dec2, &dx_d2,
                 &dh0_d2, &dc0_d2);
  backward_layer(params.w.dec1, tape.d1, tape.masks.d1, dx_d2, zero, zero, grads.dec1, nullptr,
                 &dh0_d1, &dc0_d1);

  std::vector<Eigen::VectorXd> zero_ext(cfg.past_len, zero);
  backward_layer(params.w.enc2, tape.e2, tape.masks.e2, zero_ext, dh0_d2, dc0_d2, grads.enc2,
                 &dx_e2, nullptr, nullptr);
  backward_layer(params.w.enc1, tape.e1, tape.masks.e1, dx_e2, dh0_d1, dc0_d1, grads.enc1, nullptr,
                 nullptr, nullptr);
  return grads;
}

TrainResult train(const Dataset& dataset, const ModelConfig& cfg, const TrainOptions& opts) {
  if (dataset.empty()) throw Error("training dataset is empty");
  for (const auto& w : dataset) {
    if (w.rows() != cfg.past_len + cfg.future_len || w.cols() != 4) {
      throw ShapeMismatch("every training window must be (past+future) x 4");
    }
  }

  ModelParams params = init_params(cfg, Rng::derive(opts.seed, "init"));

  // Standardization stats over every sample of the training set.
  Eigen::Vector4d mean = Eigen::Vector4d::Zero();
  Eigen::Vector4d sq = Eigen::Vector4d::Zero();
  long count = 0;
  for (const auto& w : dataset) {
    for (int r = 0; r < w.rows(); ++r) {
      for (int j = 0; j < 4; ++j) {
        mean(j) += w(r, j);
        sq(j) += w(r, j) * w(r, j);
      }
    }
    count += w.rows();
  }
  mean /= static_cast<double>(count);
  for (int j = 0; j < 4; ++j) {
    const double var = sq(j) / static_cast<double>(count) - mean(j) * mean(j);
    params.feat_std(j) = std::max(std::sqrt(std::max(var, 0.0)), 1e-8);
  }
  params.feat_mean = mean;

  Eigen::VectorXd theta = flatten(params.w);
  Eigen::VectorXd adam_m = Eigen::VectorXd::Zero(theta.size());
  Eigen::VectorXd adam_v = Eigen::VectorXd::Zero(theta.size());
  long step = 0;

  const int n = static_cast<int>(dataset.size());
  std::vector<int> order(n);
  TrainResult result;
  result.epoch_loss.reserve(opts.epochs);

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    for (int i = 0; i < n; ++i) order[i] = i;
    Rng shuffle_rng(Rng::derive(Rng::derive(opts.seed, "shuffle"), static_cast<std::uint64_t>(epoch)));
    for (int i = n - 1; i > 0; --i) std::swap(order[i], order[shuffle_rng.uniform_int(i + 1)]);

    double epoch_loss_sum = 0.0;
    int batch_index = 0;
    for (int start = 0; start < n; start += opts.batch, ++batch_index) {
      const int bsz = std::min(opts.batch, n - start);
      ParamTensors grads = zeros_like(params.w);
      double batch_loss = 0.0;
      for (int b = 0; b < bsz; ++b) {
        const int widx = order[start + b];
        std::optional<std::uint64_t> mask_seed;
        if (cfg.dropout > 0.0) {
          mask_seed = Rng::derive(Rng::derive(opts.seed, "mask"),
                                  static_cast<std::uint64_t>(epoch) * 1000003ULL +
                                      static_cast<std::uint64_t>(widx));
        }
        double loss = 0.0;
        ParamTensors g = training_gradients(params, dataset[widx], mask_seed, &loss);
        batch_loss += loss;
        Eigen::MatrixXd* dst[14];
        int gi = 0;
        grads.visit([&](Eigen::MatrixXd& m) { dst[gi++] = &m; });
        int si = 0;
        g.visit([&](Eigen::MatrixXd& m) { *dst[si++] += m; });
      }
      batch_loss /= bsz;
      if (!std::isfinite(batch_loss)) {
        throw NonFiniteLoss("non-finite training loss in epoch " + std::to_string(epoch) +
                                ", batch " + std::to_string(batch_index),
                            batch_index);
      }
      epoch_loss_sum += batch_loss * bsz;

      Eigen::VectorXd g_flat = flatten(grads) / static_cast<double>(bsz);
      ++step;
      adam_m = opts.beta1 * adam_m + (1.0 - opts.beta1) * g_flat;
      adam_v = opts.beta2 * adam_v.array().matrix() +
               (1.0 - opts.beta2) * g_flat.cwiseProduct(g_flat);
      const double bc1 = 1.0 - std::pow(opts.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(opts.beta2, static_cast<double>(step));
      theta -= (opts.lr * (adam_m / bc1).array() /
                ((adam_v / bc2).array().sqrt() + opts.eps))
                   .matrix();
      unflatten(theta, params.w);
    }
    result.epoch_loss.push_back(epoch_loss_sum / n);
  }

  result.params = std::move(params);
  return result;
}

ForecastDistribution mc_dropout_infer(const ModelParams& params, const Eigen::MatrixXd& past, int n,
                                      std::uint64_t seed) {
  if (n < 2) throw DegenerateN("MC dropout needs N >= 2 passes");
  const int f_steps = params.cfg.future_len;

  ForecastDistribution dist;
  dist.n_passes = n;

  if (params.cfg.dropout <= 0.0) {
    // All passes are identical: epistemic covariance is exactly zero.
    const StdForecast fc = forward(params, past);
    const Eigen::MatrixXd mu = positions_from_std(params, fc.mean);
    const Eigen::MatrixXd al = aleatoric_from_std(params, fc.log_var);
    for (int k = 0; k < f_steps; ++k) {
      dist.mean.emplace_back(mu(k, 0), mu(k, 1));
      Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
      cov(0, 0) = al(k, 0);
      cov(1, 1) = al(k, 1);
      dist.cov.push_back(cov);
    }
    return dist;
  }

  std::vector<Eigen::MatrixXd> positions;
  positions.reserve(n);
  Eigen::MatrixXd aleatoric_sum = Eigen::MatrixXd::Zero(f_steps, 2);
  for (int i = 0; i < n; ++i) {
    ForwardOptions opts;
    opts.dropout_seed = Rng::derive(seed, static_cast<std::uint64_t>(i));
    const StdForecast fc = forward(params, past, opts);
    positions.push_back(positions_from_std(params, fc.mean));
    aleatoric_sum += aleatoric_from_std(params, fc.log_var);
  }

  for (int k = 0; k < f_steps; ++k) {
    Eigen::Vector2d mu = Eigen::Vector2d::Zero();
    for (const auto& p : positions) mu += p.row(k).transpose();
    mu /= static_cast<double>(n);
    Eigen::Matrix2d epistemic = Eigen::Matrix2d::Zero();
    for (const auto& p : positions) {
      const Eigen::Vector2d d = p.row(k).transpose() - mu;
      epistemic += d * d.transpose();
    }
    epistemic /= static_cast<double>(n);  // population form
    Eigen::Matrix2d cov = 0.5 * (epistemic + epistemic.transpose());
    cov(0, 0) += aleatoric_sum(k, 0) / n;
    cov(1, 1) += aleatoric_sum(k, 1) / n;
    dist.mean.push_back(mu);
    dist.cov.push_back(cov);
  }
  return dist;
}

int tensor_count(const ParamTensors& t) {
  int size = 0;
  t.visit([&](const Eigen::MatrixXd& m) { size += static_cast<int>(m.size()); });
  return size;
}

Eigen::VectorXd flatten(const ParamTensors& t) {
  Eigen::VectorXd v(tensor_count(t));
  int at = 0;
  t.visit([&](const Eigen::MatrixXd& m) {
    v.segment(at, m.size()) = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
    at += static_cast<int>(m.size());
  });
  return v;
}

void unflatten(const Eigen::VectorXd& v, ParamTensors& t) {
  int at = 0;
  t.visit([&](Eigen::MatrixXd& m) {
    Eigen::Map<Eigen::VectorXd>(m.data(), m.size()) = v.segment(at, m.size());
    at += static_cast<int>(m.size());
  });
}

ParamTensors zeros_like(const ParamTensors& t) {
  ParamTensors z = t;
  z.visit([](Eigen::MatrixXd& m) { m.setZero(); });
  return z;
}

}  // namespace coopcast::forecaster
