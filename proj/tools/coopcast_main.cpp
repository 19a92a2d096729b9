// coopcast: cooperative occlusion-aware pedestrian forecasting CLI.
//
// Exit codes: 0 success, 2 input error, 3 invariant violation, 4 numeric
// failure. Every command writes a JSON run manifest next to its outputs,
// on success and on failure.

#include <chrono>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "coopcast/data.hpp"
#include "coopcast/forecaster.hpp"
#include "coopcast/geometry.hpp"
#include "coopcast/io.hpp"
#include "coopcast/metrics.hpp"
#include "coopcast/rng.hpp"
#include "coopcast/scenarios.hpp"
#include "coopcast/scene.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace coopcast;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Manifest {
  json j;
  std::string path;
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

  Manifest(const std::string& command, const std::string& out_dir) {
    j["command"] = command;
    j["library_version"] = kVersion;
    j["inputs"] = json::object();
    j["outputs"] = json::array();
    path = (fs::path(out_dir) / (command + "_manifest.json")).string();
  }

  void config(const std::string& key, const json& value) { j["config"][key] = value; }
  void input(const std::string& file) {
    j["inputs"][file] = io::file_checksum(file);
  }
  void output(const std::string& file) { j["outputs"].push_back(file); }

  void finish(int exit_code, const std::string& error = "") {
    j["exit_code"] = exit_code;
    if (!error.empty()) j["error"] = error;
    j["wall_ms"] =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    try {
      io::atomic_write(path, j.dump(2) + "\n");
    } catch (const std::exception& e) {
      std::cerr << "warning: could not write manifest: " << e.what() << "\n";
    }
  }
};

int classify(const std::exception& e) {
  if (dynamic_cast<const NonFiniteLoss*>(&e)) return 4;
  if (dynamic_cast<const ParseError*>(&e) || dynamic_cast<const EmptyFile*>(&e) ||
      dynamic_cast<const IoError*>(&e)) {
    return 2;
  }
  if (dynamic_cast<const Error*>(&e)) return 3;
  return 3;
}

scene::CameraRig load_rig(const std::string& rig_path, Manifest& man) {
  if (rig_path.empty()) return scene::reference_rig();
  man.input(rig_path);
  return io::rig_from_json(io::read_file(rig_path));
}

forecaster::ModelParams load_model(const std::string& ckpt_path, Manifest& man) {
  man.input(ckpt_path);
  return io::load_checkpoint(ckpt_path);
}

json pose_report(const scenarios::PoseRecovery& rec) {
  return json{
      {"truth_rpy_deg", {rec.truth_rpy_deg(0), rec.truth_rpy_deg(1), rec.truth_rpy_deg(2)}},
      {"est_rpy_deg", {rec.est_rpy_deg(0), rec.est_rpy_deg(1), rec.est_rpy_deg(2)}},
      {"rpy_err_deg", {rec.rpy_err_deg(0), rec.rpy_err_deg(1), rec.rpy_err_deg(2)}},
      {"t_hat_err", rec.t_hat_err},
      {"n_matches", rec.n_matches},
      {"n_inliers", rec.n_inliers},
      {"inlier_recall", rec.inlier_recall},
      {"outlier_admitted", rec.outlier_admitted}};
}

// --- prepare -------------------------------------------------------------

struct PrepareArgs {
  std::vector<std::string> inputs;
  std::string out = "windows.cache";
  double dt = 0.4;
  int past = 8, future = 12, stride = 1;
  double frame_dt = 0.04;
};

int cmd_prepare(const PrepareArgs& a) {
  Manifest man("prepare", fs::path(a.out).parent_path().string());
  for (const auto& [k, v] : std::initializer_list<std::pair<std::string, json>>{
           {"inputs", a.inputs}, {"out", a.out},     {"dt", a.dt},
           {"past", a.past},     {"future", a.future}, {"stride", a.stride},
           {"frame_dt", a.frame_dt}}) {
    man.config(k, v);
  }
  try {
    std::vector<data::RawRecord> records;
    std::string source;
    for (const auto& file : a.inputs) {
      man.input(file);
      auto loaded = data::load_raw(file);
      records.insert(records.end(), loaded.records.begin(), loaded.records.end());
      if (!source.empty()) source += ";";
      source += fs::path(file).filename().string();
    }
    data::WindowOptions opts;
    opts.dt = a.dt;
    opts.past = a.past;
    opts.future = a.future;
    opts.stride = a.stride;
    opts.frame_dt = a.frame_dt;
    auto ds = data::window(records, opts);
    ds.source = source;
    data::save_cache(ds, a.out);
    man.output(a.out);
    std::cout << "windows: " << ds.size() << "  pedestrians skipped: " << ds.skipped_tracks
              << "  cache: " << a.out << "\n";
    man.finish(0);
    return 0;
  } catch (const std::exception& e) {
    const int code = classify(e);
    std::cerr << "error: " << e.what() << "\n";
    man.finish(code, e.what());
    return code;
  }
}

// --- train ---------------------------------------------------------------

struct TrainArgs {
  std::string cache;
  int synthetic = 0;
  std::string out = "model.json";
  int epochs = 150, batch = 32, hidden = 32, input_features = 4;
  double lr = 1e-3, dropout = 0.1;
  std::uint64_t seed = 0;
};

int cmd_train(const TrainArgs& a) {
  Manifest man("train", fs::path(a.out).parent_path().string());
  man.config("cache", a.cache);
  man.config("synthetic", a.synthetic);
  man.config("out", a.out);
  man.config("epochs", a.epochs);
  man.config("batch", a.batch);
  man.config("lr", a.lr);
  man.config("hidden", a.hidden);
  man.config("dropout", a.dropout);
  man.config("input_features", a.input_features);
  man.config("seed", a.seed);
  try {
    forecaster::Dataset dataset;
    if (!a.cache.empty()) {
      man.input(a.cache);
      dataset = data::load_cache(a.cache).windows;
    } else {
      dataset = scenarios::synthetic_dataset(a.synthetic, Rng::derive(a.seed, "data"));
    }
    forecaster::ModelConfig cfg;
    cfg.hidden = a.hidden;
    cfg.dropout = a.dropout;
    cfg.input_features = a.input_features;
    forecaster::TrainOptions topts;
    topts.epochs = a.epochs;
    topts.batch = a.batch;
    topts.lr = a.lr;
    topts.seed = a.seed;
    const auto result = forecaster::train(dataset, cfg, topts);
    io::save_checkpoint(result.params, a.out);
    man.output(a.out);
    if (!result.epoch_loss.empty()) {
      std::cout << "epochs: " << result.epoch_loss.size()
                << "  final loss: " << result.epoch_loss.back() << "\n";
    }
    std::cout << "checkpoint: " << a.out << "\n";
    man.finish(0);
    return 0;
  } catch (const std::exception& e) {
    const int code = classify(e);
    std::cerr << "error: " << e.what() << "\n";
    man.finish(code, e.what());
    return code;
  }
}

// --- pose ----------------------------------------------------------------

struct PoseArgs {
  std::string rig;
  std::string out = "pose.json";
  double pixel_noise = 0.5, outliers = 0.2, threshold = 1.0;
  int points = 200;
  std::uint64_t seed = 0;
};

int cmd_pose(const PoseArgs& a) {
  Manifest man("pose", fs::path(a.out).parent_path().string());
  man.config("rig", a.rig);
  man.config("pixel_noise", a.pixel_noise);
  man.config("outliers", a.outliers);
  man.config("points", a.points);
  man.config("threshold", a.threshold);
  man.config("seed", a.seed);
  try {
    const auto rig = load_rig(a.rig, man);
    scenarios::PipelineConfig cfg;
    cfg.n_points = a.points;
    cfg.sigma_px = a.pixel_noise;
    cfg.outlier_fraction = a.outliers;
    cfg.ransac_threshold_px = a.threshold;
    const auto rec = scenarios::recover_pose(rig, cfg, a.seed);

    json report = pose_report(rec);
    report["pose"] = json::parse(io::pose_to_json(rec.estimated));
    io::atomic_write(a.out, report.dump(2) + "\n");
    man.output(a.out);
    std::cout << report.dump(2) << "\n";
    man.finish(0);
    return 0;
  } catch (const std::exception& e) {
    const int code = classify(e);
    std::cerr << "error: " << e.what() << "\n";
    man.finish(code, e.what());
    return code;
  }
}

// --- forecast ------------------------------------------------------------

struct ForecastArgs {
  std::string checkpoint;
  std::string rig;
  std::string out_dir = ".";
  int passes = 50;
  std::uint64_t seed = 0;
};

int cmd_forecast(const ForecastArgs& a) {
  Manifest man("forecast", a.out_dir);
  man.config("checkpoint", a.checkpoint);
  man.config("rig", a.rig);
  man.config("out_dir", a.out_dir);
  man.config("passes", a.passes);
  man.config("seed", a.seed);
  try {
    const auto rig = load_rig(a.rig, man);
    const auto model = load_model(a.checkpoint, man);
    const auto walk = scene::synth_walk({});
    const auto report = scenarios::run_cooperative(rig, walk, model, a.passes, a.seed);

    const auto write = [&](const std::string& name, const std::string& content) {
      const std::string p = (fs::path(a.out_dir) / name).string();
      io::atomic_write(p, content);
      man.output(p);
    };
    write("forecast_transformed.csv", io::forecast_to_csv(report.forecast_transformed));
    write("forecast_native.csv", io::forecast_to_csv(report.forecast_native));
    write("trace.csv", io::trace_to_csv(report.trace));
    json summary = {{"transform_ade", report.transform_ade},
                    {"forecast_ade_transformed", report.forecast_ade_transformed},
                    {"forecast_ade_native", report.forecast_ade_native},
                    {"runtime_ms", report.runtime_ms},
                    {"pose", pose_report(report.pose)}};
    write("forecast_summary.json", summary.dump(2) + "\n");
    std::cout << summary.dump(2) << "\n";
    man.finish(0);
    return 0;
  } catch (const std::exception& e) {
    const int code = classify(e);
    std::cerr << "error: " << e.what() << "\n";
    man.finish(code, e.what());
    return code;
  }
}

// --- sweep ---------------------------------------------------------------

struct SweepArgs {
  std::string rig;
  std::string out = "sensitivity.csv";
  int samples = 20;
  bool no_translation = false;
  std::uint64_t seed = 0;
};

int cmd_sweep(const SweepArgs& a) {
  Manifest man("sweep", fs::path(a.out).parent_path().string());
  man.config("rig", a.rig);
  man.config("out", a.out);
  man.config("samples", a.samples);
  man.config("perturb_translation", !a.no_translation);
  man.config("seed", a.seed);
  try {
    const auto rig = load_rig(a.rig, man);
    const auto walk = scene::synth_walk({});
    scenarios::SensitivityConfig cfg;
    cfg.samples_per_sigma = a.samples;
    cfg.perturb_translation = !a.no_translation;
    cfg.seed = a.seed;
    const auto rows = scenarios::run_sensitivity(cfg, rig, walk, rig.pose);
    io::atomic_write(a.out, io::sensitivity_to_csv(rows));
    man.output(a.out);
    for (const auto& row : rows) {
      std::cout << "sigma " << row.sigma_fraction << "  ade " << row.ade_mean << " +- "
                << row.ade_std << "\n";
    }
    // harness invariant: mean ADE monotone within pooled std
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const double pooled = rows[i - 1].ade_std + rows[i].ade_std;
      if (rows[i].ade_mean + pooled < rows[i - 1].ade_mean) {
        throw Error("sensitivity: mean ADE not monotone within pooled std at sigma " +
                    std::to_string(rows[i].sigma_fraction));
      }
    }
    man.finish(0);
    return 0;
  } catch (const std::exception& e) {
    const int code = classify(e);
    std::cerr << "error: " << e.what() << "\n";
    man.finish(code, e.what());
    return code;
  }
}

// --- occlusion -----------------------------------------------------------

struct OcclusionArgs {
  std::string checkpoint;
  std::string rig;
  std::string kind = "intermittent";
  std::string out_dir = ".";
  int passes = 50;
  std::uint64_t seed = 0;
};

int cmd_occlusion(const OcclusionArgs& a) {
  Manifest man("occlusion", a.out_dir);
  man.config("checkpoint", a.checkpoint);
  man.config("rig", a.rig);
  man.config("kind", a.kind);
  man.config("out_dir", a.out_dir);
  man.config("passes", a.passes);
  man.config("seed", a.seed);
  try {
    const auto rig = load_rig(a.rig, man);
    const auto model = load_model(a.checkpoint, man);
    const auto kind =
        a.kind == "partial" ? scene::OcclusionKind::partial : scene::OcclusionKind::intermittent;
    const auto walk = scene::synth_walk({});
    const auto report = scenarios::run_occlusion(kind, rig, walk, model, a.passes, a.seed);

    const auto write = [&](const std::string& name, const std::string& content) {
      const std::string p = (fs::path(a.out_dir) / name).string();
      io::atomic_write(p, content);
      man.output(p);
    };
    write("occlusion_forecast.csv", io::forecast_to_csv(report.forecast_transformed));
    write("occlusion_reference.csv", io::forecast_to_csv(report.forecast_native));
    write("occlusion_trace.csv", io::trace_to_csv(report.trace));
    json summary = {{"kind", a.kind},
                    {"masked_past_steps", report.masked_past_steps},
                    {"fill_ade", report.fill_ade},
                    {"containment", report.containment},
                    {"chi2_bound", report.chi2_bound},
                    {"forecast_ade", report.forecast_ade_transformed},
                    {"transform_ade", report.transform_ade}};
    write("occlusion_summary.json", summary.dump(2) + "\n");
    std::cout << summary.dump(2) << "\n";
    man.finish(0);
    return 0;
  } catch (const std::exception& e) {
    const int code = classify(e);
    std::cerr << "error: " << e.what() << "\n";
    man.finish(code, e.what());
    return code;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cooperative occlusion-aware pedestrian forecasting"};
  app.require_subcommand(1);

  PrepareArgs pa;
  auto* prepare = app.add_subcommand("prepare", "Window ETH/UCY-format files into a cache");
  prepare->add_option("--input", pa.inputs, "Annotation files (frame id x y)")->required();
  prepare->add_option("--out", pa.out, "Cache file path");
  prepare->add_option("--dt", pa.dt, "Resampling grid step, seconds");
  prepare->add_option("--past", pa.past, "Past steps per window");
  prepare->add_option("--future", pa.future, "Future steps per window");
  prepare->add_option("--stride", pa.stride, "Window stride");
  prepare->add_option("--frame-dt", pa.frame_dt, "Seconds per frame unit");

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train the LSTM encoder-decoder");
  train->add_option("--cache", ta.cache, "Window cache from `prepare`");
  train->add_option("--synthetic", ta.synthetic, "Train on N synthetic walks instead of a cache");
  train->add_option("--out", ta.out, "Checkpoint path");
  train->add_option("--epochs", ta.epochs);
  train->add_option("--batch", ta.batch);
  train->add_option("--lr", ta.lr);
  train->add_option("--hidden", ta.hidden);
  train->add_option("--dropout", ta.dropout);
  train->add_option("--input-features", ta.input_features, "4 = (x,y,u,v), 2 = positions only");
  train->add_option("--seed", ta.seed);

  PoseArgs poa;
  auto* pose = app.add_subcommand("pose", "Recover the relative pose on a synthetic scene");
  pose->add_option("--rig", poa.rig, "Rig JSON (default: the hardware-experiment rig)");
  pose->add_option("--out", poa.out, "Report JSON path");
  pose->add_option("--pixel-noise", poa.pixel_noise, "Gaussian pixel noise sigma");
  pose->add_option("--outliers", poa.outliers, "Outlier fraction");
  pose->add_option("--points", poa.points, "Feature-cloud size");
  pose->add_option("--threshold", poa.threshold, "RANSAC Sampson threshold, px");
  pose->add_option("--seed", poa.seed);

  ForecastArgs fa;
  auto* forecast = app.add_subcommand("forecast", "Cooperative forecast with MC dropout");
  forecast->add_option("--checkpoint", fa.checkpoint, "Model checkpoint")->required();
  forecast->add_option("--rig", fa.rig, "Rig JSON (default: the hardware-experiment rig)");
  forecast->add_option("--out-dir", fa.out_dir, "Output directory");
  forecast->add_option("--passes", fa.passes, "MC dropout passes");
  forecast->add_option("--seed", fa.seed);

  SweepArgs sa;
  auto* sweep = app.add_subcommand("sweep", "Pose-noise sensitivity sweep");
  sweep->add_option("--rig", sa.rig, "Rig JSON (default: the hardware-experiment rig)");
  sweep->add_option("--out", sa.out, "CSV path");
  sweep->add_option("--samples", sa.samples, "Draws per sigma");
  sweep->add_flag("--no-translation", sa.no_translation, "Perturb only the rotation");
  sweep->add_option("--seed", sa.seed);

  OcclusionArgs oa;
  auto* occl = app.add_subcommand("occlusion", "Occlusion scenario with cooperative fill");
  occl->add_option("--checkpoint", oa.checkpoint, "Model checkpoint")->required();
  occl->add_option("--rig", oa.rig, "Rig JSON (default: the hardware-experiment rig)");
  occl->add_option("--kind", oa.kind, "intermittent | partial")
      ->check(CLI::IsMember({"intermittent", "partial"}));
  occl->add_option("--out-dir", oa.out_dir, "Output directory");
  occl->add_option("--passes", oa.passes, "MC dropout passes");
  occl->add_option("--seed", oa.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (prepare->parsed()) return cmd_prepare(pa);
  if (train->parsed()) return cmd_train(ta);
  if (pose->parsed()) return cmd_pose(poa);
  if (forecast->parsed()) return cmd_forecast(fa);
  if (sweep->parsed()) return cmd_sweep(sa);
  if (occl->parsed()) return cmd_occlusion(oa);
  return 2;
}
