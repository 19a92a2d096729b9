#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "coopcast/data.hpp"
#include "coopcast/io.hpp"

using namespace coopcast;
using namespace coopcast::data;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("coopcast_data_test_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name, const std::string& content) const {
    const std::string p = (path / name).string();
    std::ofstream out(p);
    out << content;
    return p;
  }
};

// One pedestrian walking linearly: frame spacing 10 (0.4 s at frame_dt 0.04).
std::string linear_track(long ped, int n, double x0 = 0.0, double vx = 1.0, double vy = 0.5) {
  std::string s;
  for (int k = 0; k < n; ++k) {
    const double t = 0.4 * k;
    s += std::to_string(k * 10) + " " + std::to_string(ped) + " " +
         std::to_string(x0 + vx * t) + " " + std::to_string(vy * t) + "\n";
  }
  return s;
}

}  // namespace

TEST_CASE("load_raw parses, sorts, and groups") {
  TempDir tmp;
  const std::string p = tmp.file("a.txt",
                                 "20 2 1.0 2.0\n"
                                 "0 1 0.0 0.0\n"
                                 "10 1 0.5 0.5\n"
                                 "\n"
                                 "0 2 0.9 1.9\n");
  const auto r = load_raw(p);
  REQUIRE(r.records.size() == 4);
  CHECK(r.duplicates == 0);
  // sorted by pedestrian, then frame
  CHECK(r.records[0].ped == 1);
  CHECK(r.records[0].frame == 0.0);
  CHECK(r.records[1].frame == 10.0);
  CHECK(r.records[2].ped == 2);
  CHECK(r.records[2].frame == 0.0);
  CHECK(r.records[3].frame == 20.0);
  CHECK(r.records[1].x == doctest::Approx(0.5));
}

TEST_CASE("load_raw duplicate (frame, ped) rows: last occurrence wins") {
  TempDir tmp;
  const std::string p = tmp.file("dup.txt",
                                 "0 1 1.0 1.0\n"
                                 "10 1 2.0 2.0\n"
                                 "0 1 9.0 9.0\n");
  const auto r = load_raw(p);
  REQUIRE(r.records.size() == 2);
  CHECK(r.duplicates == 1);
  CHECK(r.records[0].x == doctest::Approx(9.0));
}

TEST_CASE("load_raw error cases") {
  TempDir tmp;
  CHECK_THROWS_AS(load_raw((tmp.path / "missing.txt").string()), EmptyFile);
  CHECK_THROWS_AS(load_raw(tmp.file("empty.txt", "")), EmptyFile);
  CHECK_THROWS_AS(load_raw(tmp.file("blank.txt", "\n  \n")), EmptyFile);
  try {
    load_raw(tmp.file("bad.txt", "0 1 0.0 0.0\n10 1 abc 0.0\n"));
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line == 2);
  }
  CHECK_THROWS_AS(load_raw(tmp.file("neg.txt", "-5 1 0.0 0.0\n")), ParseError);
}

TEST_CASE("window resamples linear motion exactly") {
  TempDir tmp;
  const auto r = load_raw(tmp.file("lin.txt", linear_track(1, 25)));
  WindowOptions opts;  // dt 0.4, past 8, future 12
  const auto ds = window(r.records, opts);
  // 25 grid samples, window length 20, stride 1 -> 6 windows
  REQUIRE(ds.size() == 6);
  CHECK(ds.skipped_tracks == 0);
  for (const auto& w : ds.windows) {
    REQUIRE(w.rows() == 20);
    REQUIRE(w.cols() == 4);
    for (int k = 0; k < w.rows(); ++k) {
      // on a linear track the interpolation and central differences are exact
      CHECK(w(k, 2) == doctest::Approx(1.0).epsilon(1e-9));
      CHECK(w(k, 3) == doctest::Approx(0.5).epsilon(1e-9));
      if (k > 0) CHECK(w(k, 0) - w(k - 1, 0) == doctest::Approx(0.4).epsilon(1e-9));
    }
  }
  CHECK(ds.feat_std.minCoeff() > 0.0);
}

TEST_CASE("window: off-grid frames are linearly interpolated") {
  TempDir tmp;
  // frame spacing 4 (0.16 s): grid points at 0.4 s fall between samples
  std::string s;
  for (int k = 0; k < 130; ++k) {
    const double t = 0.16 * k;
    s += std::to_string(k * 4) + " 7 " + std::to_string(2.0 * t) + " " +
         std::to_string(-1.0 * t) + "\n";
  }
  const auto r = load_raw(tmp.file("offgrid.txt", s));
  const auto ds = window(r.records, {});
  REQUIRE(ds.size() > 0);
  const auto& w = ds.windows.front();
  for (int k = 1; k < w.rows(); ++k) {
    CHECK(w(k, 0) - w(k - 1, 0) == doctest::Approx(0.8).epsilon(1e-9));   // 2.0 m/s * 0.4 s
    CHECK(w(k, 1) - w(k - 1, 1) == doctest::Approx(-0.4).epsilon(1e-9));
  }
}

TEST_CASE("window skips short tracks and counts them") {
  TempDir tmp;
  const auto r =
      load_raw(tmp.file("mix.txt", linear_track(1, 25) + linear_track(2, 5, 10.0)));
  const auto ds = window(r.records, {});
  CHECK(ds.size() == 6);  // only pedestrian 1 contributes
  CHECK(ds.skipped_tracks == 1);
  for (long ped : ds.ped_ids) CHECK(ped == 1);
}

TEST_CASE("window rejects non-increasing frames") {
  TempDir tmp;
  const auto r = load_raw(tmp.file("nonmono.txt", "0 1 0 0\n10 1 1 0\n10 1 2 0\n"));
  // duplicates collapse, so craft a real regression: same pedestrian, frame
  // sequence with a repeat is already collapsed by load_raw. Use raw records.
  std::vector<RawRecord> recs{{0, 1, 0, 0}, {10, 1, 1, 0}, {5, 1, 2, 0}};
  CHECK_THROWS_AS(window(recs, {}), ParseError);
  (void)r;
}

TEST_CASE("split partitions pedestrians disjointly and deterministically") {
  TempDir tmp;
  std::string s;
  for (long ped = 1; ped <= 6; ++ped) s += linear_track(ped, 25, ped * 30.0);
  const auto ds = window(load_raw(tmp.file("multi.txt", s)).records, {});
  REQUIRE(ds.size() == 36);

  const auto [train, test] = split(ds, 0.3, 11);
  CHECK(train.size() + test.size() == ds.size());
  std::set<long> train_ids(train.ped_ids.begin(), train.ped_ids.end());
  std::set<long> test_ids(test.ped_ids.begin(), test.ped_ids.end());
  CHECK(test_ids.size() == 2);  // round(0.3 * 6)
  for (long ped : test_ids) CHECK(train_ids.count(ped) == 0);

  const auto [train2, test2] = split(ds, 0.3, 11);
  CHECK(test2.ped_ids == test.ped_ids);
  const auto [train3, test3] = split(ds, 0.3, 12);
  (void)train2;
  (void)train3;

  CHECK_THROWS_AS(split(ds, 0.0, 1), Error);
  CHECK_THROWS_AS(split(ds, 1.0, 1), Error);
}

TEST_CASE("cache round trip preserves everything; reruns are byte-identical") {
  TempDir tmp;
  auto ds = window(load_raw(tmp.file("t.txt", linear_track(3, 30))).records, {});
  ds.source = "t.txt";
  const std::string c1 = (tmp.path / "a.cache").string();
  const std::string c2 = (tmp.path / "b.cache").string();
  save_cache(ds, c1);
  save_cache(ds, c2);
  CHECK(io::file_checksum(c1) == io::file_checksum(c2));
  CHECK(io::read_file(c1) == io::read_file(c2));

  const auto back = load_cache(c1);
  CHECK(back.size() == ds.size());
  CHECK(back.source == "t.txt");
  CHECK(back.options.dt == ds.options.dt);
  CHECK(back.options.past == ds.options.past);
  CHECK(back.skipped_tracks == ds.skipped_tracks);
  CHECK(back.ped_ids == ds.ped_ids);
  CHECK((back.feat_mean - ds.feat_mean).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.feat_std - ds.feat_std).cwiseAbs().maxCoeff() == 0.0);
  for (int i = 0; i < ds.size(); ++i) {
    CHECK((back.windows[i] - ds.windows[i]).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("cache integrity failures are detected") {
  TempDir tmp;
  auto ds = window(load_raw(tmp.file("t.txt", linear_track(3, 25))).records, {});
  const std::string c = (tmp.path / "x.cache").string();
  save_cache(ds, c);

  // flip one payload byte
  std::string bytes = io::read_file(c);
  bytes[bytes.size() / 2] ^= 0x5a;
  io::atomic_write(c, bytes);
  CHECK_THROWS_AS(load_cache(c), IoError);

  // wrong magic
  io::atomic_write(c, "NOPE" + bytes.substr(4));
  CHECK_THROWS_AS(load_cache(c), IoError);

  // truncated
  io::atomic_write(c, bytes.substr(0, 6));
  CHECK_THROWS_AS(load_cache(c), IoError);

  CHECK_THROWS_AS(load_cache((tmp.path / "absent.cache").string()), IoError);
}
