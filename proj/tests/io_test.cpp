#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <string>

#include "coopcast/forecaster.hpp"
#include "coopcast/io.hpp"
#include "coopcast/rng.hpp"
#include "coopcast/scenarios.hpp"
#include "coopcast/scene.hpp"

using namespace coopcast;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("coopcast_io_test_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string at(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("atomic_write + read_file round trip, no temp files left behind") {
  TempDir tmp;
  const std::string p = tmp.at("sub/dir/file.txt");
  io::atomic_write(p, "hello\nworld\n");
  CHECK(io::read_file(p) == "hello\nworld\n");
  io::atomic_write(p, "replaced");
  CHECK(io::read_file(p) == "replaced");
  int entries = 0;
  for (const auto& _ : std::filesystem::directory_iterator(tmp.at("sub/dir"))) {
    (void)_;
    ++entries;
  }
  CHECK(entries == 1);
  CHECK_THROWS_AS(io::read_file(tmp.at("absent")), IoError);
}

TEST_CASE("file_checksum is content-deterministic") {
  TempDir tmp;
  io::atomic_write(tmp.at("a"), "same bytes");
  io::atomic_write(tmp.at("b"), "same bytes");
  io::atomic_write(tmp.at("c"), "other bytes");
  CHECK(io::file_checksum(tmp.at("a")) == io::file_checksum(tmp.at("b")));
  CHECK(io::file_checksum(tmp.at("a")) != io::file_checksum(tmp.at("c")));
}

TEST_CASE("pose JSON round trip") {
  const auto rig = scene::reference_rig();
  const std::string j = io::pose_to_json(rig.pose);
  const auto back = io::pose_from_json(j);
  CHECK((back.R - rig.pose.R).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((back.t_hat - rig.pose.t_hat).norm() < 1e-15);
  CHECK(back.scale == doctest::Approx(rig.pose.scale));
  CHECK_THROWS_AS(io::pose_from_json("{not json"), IoError);
  CHECK_THROWS_AS(io::pose_from_json("{}"), IoError);
}

TEST_CASE("rig JSON round trip") {
  const auto rig = scene::reference_rig();
  const auto back = io::rig_from_json(io::rig_to_json(rig));
  CHECK((back.pose.R - rig.pose.R).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(back.k1.fx == rig.k1.fx);
  CHECK(back.k2.cy == rig.k2.cy);
  CHECK(back.width == rig.width);
  CHECK(back.height == rig.height);
  CHECK_THROWS_AS(io::rig_from_json("[]"), IoError);
}

TEST_CASE("correspondence CSV round trip") {
  Rng rng(5);
  std::vector<geometry::Correspondence> ms;
  for (int i = 0; i < 20; ++i) {
    ms.emplace_back(Eigen::Vector2d(rng.uniform(0.0, 640.0), rng.uniform(0.0, 480.0)),
                    Eigen::Vector2d(rng.uniform(0.0, 640.0), rng.uniform(0.0, 480.0)));
  }
  const std::string csv = io::correspondences_to_csv(ms);
  CHECK(csv.rfind("ax,ay,bx,by\n", 0) == 0);
  const auto back = io::correspondences_from_csv(csv);
  REQUIRE(back.size() == ms.size());
  for (std::size_t i = 0; i < ms.size(); ++i) {
    CHECK((back[i].a - ms[i].a).norm() == 0.0);  // full double precision
    CHECK((back[i].b - ms[i].b).norm() == 0.0);
  }
  CHECK_THROWS_AS(io::correspondences_from_csv("wrong,header\n1,2,3,4\n"), ParseError);
  CHECK_THROWS_AS(io::correspondences_from_csv("ax,ay,bx,by\n1,2,3\n"), ParseError);
}

TEST_CASE("walk CSV round trip keeps positions, velocities and masks") {
  scene::WalkOptions opts;
  opts.kind = scene::WalkKind::s_curve;
  auto walk = scene::synth_walk(opts);
  scene::apply_occlusion(walk, scene::OcclusionKind::intermittent);
  const auto back = io::walk_from_csv(io::walk_to_csv(walk));
  REQUIRE(back.size() == walk.size());
  CHECK(back.dt == doctest::Approx(walk.dt));
  for (int k = 0; k < walk.size(); ++k) {
    CHECK((back.pos[k] - walk.pos[k]).norm() == 0.0);
    CHECK(back.vel[k].x() == walk.vel[k].x());
    CHECK(back.occluded_cam2[k] == walk.occluded_cam2[k]);
    CHECK(back.occluded_cam1[k] == walk.occluded_cam1[k]);
  }
  CHECK_THROWS_AS(io::walk_from_csv("bad\n"), ParseError);
  CHECK_THROWS_AS(io::walk_from_csv("t,x,y,z,u,v,occluded_cam1,occluded_cam2\n"), EmptyFile);
}

TEST_CASE("forecast, trace and sensitivity CSV formats") {
  forecaster::ForecastDistribution dist;
  dist.mean = {{1.0, 2.0}, {3.0, 4.0}};
  dist.cov = {Eigen::Matrix2d::Identity(), 2.0 * Eigen::Matrix2d::Identity()};
  const std::string f = io::forecast_to_csv(dist);
  CHECK(f.rfind("step,mu_x,mu_y,s_xx,s_xy,s_yy\n", 0) == 0);
  CHECK(f.find("\n1,1,2,1,0,1\n") != std::string::npos);
  CHECK(f.find("\n2,3,4,2,0,2\n") != std::string::npos);

  std::vector<metrics::TraceRow> trace{{1, 0.5, 2.0, 0.25, false}};
  const std::string t = io::trace_to_csv(trace);
  CHECK(t == "step,kl_nats,entropy_nats,ratio\n1,0.5,2,0.25\n");

  std::vector<scenarios::SensitivityRow> rows{{0.5, 0.25, 0.125}};
  const std::string s = io::sensitivity_to_csv(rows);
  CHECK(s == "sigma_fraction,ade_mean,ade_std\n0.5,0.25,0.125\n");
}

TEST_CASE("checkpoint round trip reproduces the model bit for bit") {
  TempDir tmp;
  forecaster::ModelConfig cfg;
  cfg.hidden = 6;
  cfg.input_features = 2;
  cfg.dropout = 0.15;
  auto params = forecaster::init_params(cfg, 77);
  params.feat_mean << 0.4, -0.7, 0.1, 0.2;
  params.feat_std << 1.1, 2.2, 3.3, 4.4;

  const std::string p = tmp.at("model.json");
  io::save_checkpoint(params, p);
  const auto back = io::load_checkpoint(p);
  CHECK(back.cfg.hidden == 6);
  CHECK(back.cfg.input_features == 2);
  CHECK(back.cfg.dropout == 0.15);
  CHECK(back.cfg.past_len == cfg.past_len);
  CHECK(back.cfg.future_len == cfg.future_len);
  CHECK((flatten(back.w) - flatten(params.w)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.feat_mean - params.feat_mean).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.feat_std - params.feat_std).cwiseAbs().maxCoeff() == 0.0);

  // identical forward outputs after the round trip
  Eigen::MatrixXd past = Eigen::MatrixXd::Random(cfg.past_len, 4);
  const auto a = forecaster::forward(params, past);
  const auto b = forecaster::forward(back, past);
  CHECK((a.mean - b.mean).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.log_var - b.log_var).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(io::checkpoint_from_json("{}"), IoError);
  CHECK_THROWS_AS(io::checkpoint_from_json("{\"format\":\"other\",\"version\":1}"), IoError);
}
