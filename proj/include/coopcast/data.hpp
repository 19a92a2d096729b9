#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "coopcast/forecaster.hpp"

namespace coopcast::data {

/// One annotation row of an ETH/UCY-format file: frame, pedestrian id, x, y.
struct RawRecord {
  double frame = 0;
  long ped = 0;
  double x = 0;
  double y = 0;
};

struct LoadResult {
  std::vector<RawRecord> records;  // grouped per pedestrian, sorted by frame
  int duplicates = 0;              // (frame, ped) collisions, last row wins
};

/// Whitespace-delimited table with columns frame, id, x, y. Throws ParseError
/// (with line number) and EmptyFile.
LoadResult load_raw(const std::string& path);

struct WindowOptions {
  double dt = 0.4;        // resampling grid spacing, seconds
  int past = 8;
  int future = 12;
  int stride = 1;
  double frame_dt = 0.04;  // seconds per frame unit (25 fps video)
};

struct WindowedDataset {
  std::vector<forecaster::Window> windows;  // (past+future) x 4 each
  std::vector<long> ped_ids;                // pedestrian of each window
  std::string source;
  WindowOptions options;
  int skipped_tracks = 0;  // shorter than one window after resampling
  Eigen::Vector4d feat_mean = Eigen::Vector4d::Zero();
  Eigen::Vector4d feat_std = Eigen::Vector4d::Ones();

  int size() const { return static_cast<int>(windows.size()); }
};

/// Resamples each pedestrian track onto the uniform dt grid (linear
/// interpolation; velocities by central differences, one-sided at the ends)
/// and slides past+future windows by `stride`. Short tracks are skipped and
/// counted.
WindowedDataset window(const std::vector<RawRecord>& records, const WindowOptions& opts);

/// Deterministic split by pedestrian id: no pedestrian contributes windows to
/// both partitions.
std::pair<WindowedDataset, WindowedDataset> split(const WindowedDataset& dataset,
                                                  double test_fraction, std::uint64_t seed);

/// Versioned binary cache with an FNV-1a checksum over the payload.
void save_cache(const WindowedDataset& dataset, const std::string& path);
WindowedDataset load_cache(const std::string& path);

}  // namespace coopcast::data
