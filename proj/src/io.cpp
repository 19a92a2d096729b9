#include "coopcast/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace coopcast::io {

using nlohmann::json;

void atomic_write(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.parent_path() / (target.filename().string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  fs::rename(tmp, target);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::uint64_t file_checksum(const std::string& path) {
  const std::string bytes = read_file(path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

json pose_json(const geometry::RelativePose& pose) {
  std::vector<double> r;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) r.push_back(pose.R(i, j));
  }
  const auto euler = geometry::rotation_to_euler(pose.R);
  return json{{"R", r},
              {"t_hat", {pose.t_hat.x(), pose.t_hat.y(), pose.t_hat.z()}},
              {"scale", pose.scale},
              {"euler_deg", {euler.roll_deg, euler.pitch_deg, euler.yaw_deg}}};
}

geometry::RelativePose pose_from(const json& j) {
  geometry::RelativePose pose;
  const auto r = j.at("R").get<std::vector<double>>();
  if (r.size() != 9) throw IoError("pose JSON: R must have 9 entries");
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < 3; ++k) pose.R(i, k) = r[i * 3 + k];
  }
  const auto t = j.at("t_hat").get<std::vector<double>>();
  if (t.size() != 3) throw IoError("pose JSON: t_hat must have 3 entries");
  pose.t_hat = Eigen::Vector3d(t[0], t[1], t[2]);
  pose.scale = j.at("scale").get<double>();
  geometry::check_rotation(pose.R, 1e-6);
  return pose;
}

json matrix_json(const Eigen::MatrixXd& m) {
  std::vector<double> v(m.size());
  Eigen::Map<Eigen::MatrixXd>(v.data(), m.rows(), m.cols()) = m;
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", v}};
}

Eigen::MatrixXd matrix_from(const json& j) {
  const int rows = j.at("rows").get<int>();
  const int cols = j.at("cols").get<int>();
  const auto v = j.at("data").get<std::vector<double>>();
  if (static_cast<int>(v.size()) != rows * cols) throw IoError("matrix JSON size mismatch");
  Eigen::MatrixXd m(rows, cols);
  Eigen::Map<const Eigen::MatrixXd> map(v.data(), rows, cols);
  m = map;
  return m;
}

}  // namespace

std::string pose_to_json(const geometry::RelativePose& pose) { return pose_json(pose).dump(2); }

geometry::RelativePose pose_from_json(const std::string& json_text) {
  try {
    return pose_from(json::parse(json_text));
  } catch (const json::exception& e) {
    throw IoError(std::string("pose JSON: ") + e.what());
  }
}

std::string rig_to_json(const scene::CameraRig& rig) {
  json j;
  j["pose"] = pose_json(rig.pose);
  j["k1"] = {{"fx", rig.k1.fx}, {"fy", rig.k1.fy}, {"cx", rig.k1.cx}, {"cy", rig.k1.cy}};
  j["k2"] = {{"fx", rig.k2.fx}, {"fy", rig.k2.fy}, {"cx", rig.k2.cx}, {"cy", rig.k2.cy}};
  j["width"] = rig.width;
  j["height"] = rig.height;
  return j.dump(2);
}

scene::CameraRig rig_from_json(const std::string& json_text) {
  try {
    const json j = json::parse(json_text);
    scene::CameraRig rig;
    rig.pose = pose_from(j.at("pose"));
    auto intr = [](const json& k) {
      return geometry::CameraIntrinsics(k.at("fx").get<double>(), k.at("fy").get<double>(),
                                        k.at("cx").get<double>(), k.at("cy").get<double>());
    };
    rig.k1 = intr(j.at("k1"));
    rig.k2 = intr(j.at("k2"));
    rig.width = j.at("width").get<int>();
    rig.height = j.at("height").get<int>();
    return rig;
  } catch (const json::exception& e) {
    throw IoError(std::string("rig JSON: ") + e.what());
  }
}

std::string correspondences_to_csv(const std::vector<geometry::Correspondence>& matches) {
  std::ostringstream ss;
  ss.precision(17);
  ss << "ax,ay,bx,by\n";
  for (const auto& m : matches) {
    ss << m.a.x() << "," << m.a.y() << "," << m.b.x() << "," << m.b.y() << "\n";
  }
  return ss.str();
}

std::vector<geometry::Correspondence> correspondences_from_csv(const std::string& csv_text) {
  std::istringstream in(csv_text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("ax,ay,bx,by", 0) != 0) {
    throw ParseError("correspondence CSV must start with header ax,ay,bx,by", 1);
  }
  std::vector<geometry::Correspondence> matches;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n,") == std::string::npos) continue;
    double ax, ay, bx, by;
    char c1, c2, c3;
    std::istringstream ss(line);
    if (!(ss >> ax >> c1 >> ay >> c2 >> bx >> c3 >> by) || c1 != ',' || c2 != ',' || c3 != ',') {
      throw ParseError("correspondence CSV line " + std::to_string(line_no), line_no);
    }
    matches.emplace_back(Eigen::Vector2d(ax, ay), Eigen::Vector2d(bx, by));
  }
  return matches;
}

std::string walk_to_csv(const scene::GroundTruthWalk& walk) {
  std::ostringstream ss;
  ss.precision(17);
  ss << "t,x,y,z,u,v,occluded_cam1,occluded_cam2\n";
  for (int k = 0; k < walk.size(); ++k) {
    ss << walk.t[k] << "," << walk.pos[k].x() << "," << walk.pos[k].y() << "," << walk.pos[k].z()
       << "," << walk.vel[k].x() << "," << walk.vel[k].y() << "," << (walk.occluded_cam1[k] ? 1 : 0)
       << "," << (walk.occluded_cam2[k] ? 1 : 0) << "\n";
  }
  return ss.str();
}

scene::GroundTruthWalk walk_from_csv(const std::string& csv_text) {
  std::istringstream in(csv_text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("t,x,y,z,u,v", 0) != 0) {
    throw ParseError("walk CSV header mismatch", 1);
  }
  scene::GroundTruthWalk walk;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n,") == std::string::npos) continue;
    std::istringstream ss(line);
    double t, x, y, z, u, v;
    int o1, o2;
    char c;
    if (!(ss >> t >> c >> x >> c >> y >> c >> z >> c >> u >> c >> v >> c >> o1 >> c >> o2)) {
      throw ParseError("walk CSV line " + std::to_string(line_no), line_no);
    }
    walk.t.push_back(t);
    walk.pos.emplace_back(x, y, z);
    walk.vel.emplace_back(u, v, 0.0);
    walk.occluded_cam1.push_back(o1 != 0);
    walk.occluded_cam2.push_back(o2 != 0);
  }
  if (walk.size() == 0) throw EmptyFile("walk CSV has no samples");
  if (walk.size() >= 2) walk.dt = walk.t[1] - walk.t[0];
  return walk;
}

std::string forecast_to_csv(const forecaster::ForecastDistribution& dist) {
  std::ostringstream ss;
  ss.precision(17);
  ss << "step,mu_x,mu_y,s_xx,s_xy,s_yy\n";
  for (int k = 0; k < dist.horizon(); ++k) {
    ss << (k + 1) << "," << dist.mean[k].x() << "," << dist.mean[k].y() << ","
       << dist.cov[k](0, 0) << "," << dist.cov[k](0, 1) << "," << dist.cov[k](1, 1) << "\n";
  }
  return ss.str();
}

std::string trace_to_csv(const std::vector<metrics::TraceRow>& trace) {
  std::ostringstream ss;
  ss.precision(17);
  ss << "step,kl_nats,entropy_nats,ratio\n";
  for (const auto& row : trace) {
    ss << row.step << "," << row.kl_nats << "," << row.entropy_nats << "," << row.ratio << "\n";
  }
  return ss.str();
}

std::string sensitivity_to_csv(const std::vector<scenarios::SensitivityRow>& rows) {
  std::ostringstream ss;
  ss.precision(17);
  ss << "sigma_fraction,ade_mean,ade_std\n";
  for (const auto& row : rows) {
    ss << row.sigma_fraction << "," << row.ade_mean << "," << row.ade_std << "\n";
  }
  return ss.str();
}

std::string checkpoint_to_json(const forecaster::ModelParams& params) {
  json j;
  j["format"] = "coopcast-checkpoint";
  j["version"] = 1;
  j["hidden"] = params.cfg.hidden;
  j["input_features"] = params.cfg.input_features;
  j["dropout"] = params.cfg.dropout;
  j["past_len"] = params.cfg.past_len;
  j["future_len"] = params.cfg.future_len;
  j["feat_mean"] = {params.feat_mean(0), params.feat_mean(1), params.feat_mean(2),
                    params.feat_mean(3)};
  j["feat_std"] = {params.feat_std(0), params.feat_std(1), params.feat_std(2), params.feat_std(3)};
  const char* names[] = {"enc1", "enc2", "dec1", "dec2"};
  const forecaster::LstmLayer* layers[] = {&params.w.enc1, &params.w.enc2, &params.w.dec1,
                                           &params.w.dec2};
  for (int i = 0; i < 4; ++i) {
    j[names[i]] = {{"w_in", matrix_json(layers[i]->w_in)},
                   {"w_rec", matrix_json(layers[i]->w_rec)},
                   {"bias", matrix_json(layers[i]->bias)}};
  }
  j["head_w"] = matrix_json(params.w.head_w);
  j["head_b"] = matrix_json(params.w.head_b);
  return j.dump();
}

forecaster::ModelParams checkpoint_from_json(const std::string& json_text) {
  try {
    const json j = json::parse(json_text);
    if (j.value("format", "") != "coopcast-checkpoint" || j.value("version", 0) != 1) {
      throw IoError("not a version-1 coopcast checkpoint");
    }
    forecaster::ModelConfig cfg;
    cfg.hidden = j.at("hidden").get<int>();
    cfg.input_features = j.at("input_features").get<int>();
    cfg.dropout = j.at("dropout").get<double>();
    cfg.past_len = j.at("past_len").get<int>();
    cfg.future_len = j.at("future_len").get<int>();
    forecaster::ModelParams params = forecaster::init_params(cfg, 0);
    const auto mean = j.at("feat_mean").get<std::vector<double>>();
    const auto stdv = j.at("feat_std").get<std::vector<double>>();
    for (int i = 0; i < 4; ++i) {
      params.feat_mean(i) = mean.at(i);
      params.feat_std(i) = stdv.at(i);
    }
    const char* names[] = {"enc1", "enc2", "dec1", "dec2"};
    forecaster::LstmLayer* layers[] = {&params.w.enc1, &params.w.enc2, &params.w.dec1,
                                       &params.w.dec2};
    for (int i = 0; i < 4; ++i) {
      layers[i]->w_in = matrix_from(j.at(names[i]).at("w_in"));
      layers[i]->w_rec = matrix_from(j.at(names[i]).at("w_rec"));
      layers[i]->bias = matrix_from(j.at(names[i]).at("bias"));
    }
    params.w.head_w = matrix_from(j.at("head_w"));
    params.w.head_b = matrix_from(j.at("head_b"));
    return params;
  } catch (const json::exception& e) {
    throw IoError(std::string("checkpoint JSON: ") + e.what());
  }
}

void save_checkpoint(const forecaster::ModelParams& params, const std::string& path) {
  atomic_write(path, checkpoint_to_json(params));
}

forecaster::ModelParams load_checkpoint(const std::string& path) {
  return checkpoint_from_json(read_file(path));
}

}  // namespace coopcast::io
