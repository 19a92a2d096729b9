#include "coopcast/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "coopcast/rng.hpp"

namespace coopcast::data {

namespace {

std::uint64_t fnv1a(const char* bytes, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i]));
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct Track {
  std::vector<double> t;  // seconds
  std::vector<double> x, y;
};

double interp(const std::vector<double>& ts, const std::vector<double>& vs, double t) {
  if (t <= ts.front()) return vs.front();
  if (t >= ts.back()) return vs.back();
  const auto it = std::upper_bound(ts.begin(), ts.end(), t);
  const std::size_t i = static_cast<std::size_t>(it - ts.begin());
  const double w = (t - ts[i - 1]) / (ts[i] - ts[i - 1]);
  return vs[i - 1] + w * (vs[i] - vs[i - 1]);
}

}  // namespace

LoadResult load_raw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw EmptyFile("cannot open " + path);

  LoadResult result;
  // (ped, frame) -> record index, to apply the last-row-wins policy.
  std::map<std::pair<long, long>, std::size_t> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    double frame, ped, x, y;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    if (!(ss >> frame >> ped >> x >> y)) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected 4 numeric columns",
                       line_no);
    }
    if (frame < 0) throw ParseError(path + ":" + std::to_string(line_no) + ": negative frame id",
                                    line_no);
    RawRecord rec{frame, static_cast<long>(std::llround(ped)), x, y};
    const auto key = std::make_pair(rec.ped, static_cast<long>(std::llround(frame)));
    if (auto it = seen.find(key); it != seen.end()) {
      result.records[it->second] = rec;
      ++result.duplicates;
    } else {
      seen.emplace(key, result.records.size());
      result.records.push_back(rec);
    }
  }
  if (result.records.empty()) throw EmptyFile(path + " has no records");
  if (result.duplicates > 0) {
    std::cerr << "warning: " << result.duplicates << " duplicate (frame, ped) rows in " << path
              << ", last occurrence kept\n";
  }
  std::stable_sort(result.records.begin(), result.records.end(),
                   [](const RawRecord& a, const RawRecord& b) {
                     return a.ped != b.ped ? a.ped < b.ped : a.frame < b.frame;
                   });
  return result;
}

WindowedDataset window(const std::vector<RawRecord>& records, const WindowOptions& opts) {
  WindowedDataset ds;
  ds.options = opts;
  const int win_len = opts.past + opts.future;

  std::map<long, Track> tracks;
  for (const auto& r : records) {
    Track& tr = tracks[r.ped];
    tr.t.push_back(r.frame * opts.frame_dt);
    tr.x.push_back(r.x);
    tr.y.push_back(r.y);
  }

  for (auto& [ped, tr] : tracks) {
    // per-pedestrian frames must be strictly increasing
    for (std::size_t i = 1; i < tr.t.size(); ++i) {
      if (tr.t[i] <= tr.t[i - 1]) {
        throw ParseError("pedestrian " + std::to_string(ped) + " has non-increasing frames", 0);
      }
    }
    // resample onto the uniform grid
    const int n_grid =
        tr.t.size() < 2 ? 1
                        : static_cast<int>(std::floor((tr.t.back() - tr.t.front()) / opts.dt +
                                                      1e-9)) +
                              1;
    if (n_grid < win_len) {
      ++ds.skipped_tracks;
      continue;
    }
    std::vector<double> gx(n_grid), gy(n_grid);
    for (int k = 0; k < n_grid; ++k) {
      const double t = tr.t.front() + k * opts.dt;
      gx[k] = interp(tr.t, tr.x, t);
      gy[k] = interp(tr.t, tr.y, t);
    }
    // central differences, one-sided at the ends
    std::vector<double> gu(n_grid), gv(n_grid);
    for (int k = 0; k < n_grid; ++k) {
      const int lo = std::max(k - 1, 0);
      const int hi = std::min(k + 1, n_grid - 1);
      gu[k] = (gx[hi] - gx[lo]) / ((hi - lo) * opts.dt);
      gv[k] = (gy[hi] - gy[lo]) / ((hi - lo) * opts.dt);
    }
    for (int start = 0; start + win_len <= n_grid; start += opts.stride) {
      forecaster::Window w(win_len, 4);
      for (int k = 0; k < win_len; ++k) {
        w.row(k) << gx[start + k], gy[start + k], gu[start + k], gv[start + k];
      }
      ds.windows.push_back(std::move(w));
      ds.ped_ids.push_back(ped);
    }
  }

  // standardization stats over all samples
  if (!ds.windows.empty()) {
    Eigen::Vector4d mean = Eigen::Vector4d::Zero(), sq = Eigen::Vector4d::Zero();
    long count = 0;
    for (const auto& w : ds.windows) {
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
      ds.feat_std(j) = std::max(std::sqrt(std::max(var, 0.0)), 1e-8);
    }
    ds.feat_mean = mean;
  }
  return ds;
}

std::pair<WindowedDataset, WindowedDataset> split(const WindowedDataset& dataset,
                                                  double test_fraction, std::uint64_t seed) {
  if (test_fraction <= 0.0 || test_fraction >= 1.0) throw Error("test fraction must be in (0,1)");

  std::vector<long> ids;
  for (long p : dataset.ped_ids) {
    if (std::find(ids.begin(), ids.end(), p) == ids.end()) ids.push_back(p);
  }
  std::sort(ids.begin(), ids.end());
  Rng rng(Rng::derive(seed, "split"));
  for (int i = static_cast<int>(ids.size()) - 1; i > 0; --i) {
    std::swap(ids[i], ids[rng.uniform_int(i + 1)]);
  }
  const int n_test = std::max(
      1, static_cast<int>(std::llround(test_fraction * static_cast<double>(ids.size()))));
  std::vector<long> test_ids(ids.begin(), ids.begin() + std::min<std::size_t>(n_test, ids.size()));

  WindowedDataset train, test;
  train.options = test.options = dataset.options;
  train.source = test.source = dataset.source;
  for (int i = 0; i < dataset.size(); ++i) {
    const bool is_test =
        std::find(test_ids.begin(), test_ids.end(), dataset.ped_ids[i]) != test_ids.end();
    WindowedDataset& dst = is_test ? test : train;
    dst.windows.push_back(dataset.windows[i]);
    dst.ped_ids.push_back(dataset.ped_ids[i]);
  }
  train.feat_mean = test.feat_mean = dataset.feat_mean;
  train.feat_std = test.feat_std = dataset.feat_std;
  return {std::move(train), std::move(test)};
}

namespace {
constexpr char kMagic[4] = {'C', 'P', 'W', 'D'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::string& buf, const T& v) {
  buf.append(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T get(const std::string& buf, std::size_t& at) {
  if (at + sizeof(T) > buf.size()) throw IoError("truncated cache file");
  T v;
  std::memcpy(&v, buf.data() + at, sizeof(T));
  at += sizeof(T);
  return v;
}
}  // namespace

void save_cache(const WindowedDataset& dataset, const std::string& path) {
  std::string payload;
  put(payload, kVersion);
  put(payload, dataset.options.dt);
  put(payload, static_cast<std::int32_t>(dataset.options.past));
  put(payload, static_cast<std::int32_t>(dataset.options.future));
  put(payload, static_cast<std::int32_t>(dataset.options.stride));
  put(payload, dataset.options.frame_dt);
  put(payload, static_cast<std::int32_t>(dataset.skipped_tracks));
  put(payload, static_cast<std::uint32_t>(dataset.source.size()));
  payload.append(dataset.source);
  for (int j = 0; j < 4; ++j) put(payload, dataset.feat_mean(j));
  for (int j = 0; j < 4; ++j) put(payload, dataset.feat_std(j));
  put(payload, static_cast<std::uint32_t>(dataset.size()));
  for (int i = 0; i < dataset.size(); ++i) {
    put(payload, static_cast<std::int64_t>(dataset.ped_ids[i]));
    const auto& w = dataset.windows[i];
    for (int r = 0; r < w.rows(); ++r) {
      for (int c = 0; c < 4; ++c) put(payload, w(r, c));
    }
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(kMagic, 4);
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  const std::uint64_t checksum = fnv1a(payload.data(), payload.size());
  out.write(reinterpret_cast<const char*>(&checksum), sizeof(checksum));
  if (!out) throw IoError("short write to " + path);
}

WindowedDataset load_cache(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (all.size() < 4 + sizeof(std::uint64_t) || std::memcmp(all.data(), kMagic, 4) != 0) {
    throw IoError(path + " is not a window cache");
  }
  const std::string payload = all.substr(4, all.size() - 4 - sizeof(std::uint64_t));
  std::uint64_t stored;
  std::memcpy(&stored, all.data() + all.size() - sizeof(stored), sizeof(stored));
  if (fnv1a(payload.data(), payload.size()) != stored) {
    throw IoError(path + " failed its checksum");
  }

  std::size_t at = 0;
  if (get<std::uint32_t>(payload, at) != kVersion) throw IoError("unsupported cache version");
  WindowedDataset ds;
  ds.options.dt = get<double>(payload, at);
  ds.options.past = get<std::int32_t>(payload, at);
  ds.options.future = get<std::int32_t>(payload, at);
  ds.options.stride = get<std::int32_t>(payload, at);
  ds.options.frame_dt = get<double>(payload, at);
  ds.skipped_tracks = get<std::int32_t>(payload, at);
  const std::uint32_t src_len = get<std::uint32_t>(payload, at);
  if (at + src_len > payload.size()) throw IoError("truncated cache file");
  ds.source = payload.substr(at, src_len);
  at += src_len;
  for (int j = 0; j < 4; ++j) ds.feat_mean(j) = get<double>(payload, at);
  for (int j = 0; j < 4; ++j) ds.feat_std(j) = get<double>(payload, at);
  const std::uint32_t count = get<std::uint32_t>(payload, at);
  const int win_len = ds.options.past + ds.options.future;
  for (std::uint32_t i = 0; i < count; ++i) {
    ds.ped_ids.push_back(static_cast<long>(get<std::int64_t>(payload, at)));
    forecaster::Window w(win_len, 4);
    for (int r = 0; r < win_len; ++r) {
      for (int c = 0; c < 4; ++c) w(r, c) = get<double>(payload, at);
    }
    ds.windows.push_back(std::move(w));
  }
  return ds;
}

}  // namespace coopcast::data
