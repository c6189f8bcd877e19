#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>

#include "emsrisk/ingest.hpp"

namespace emsrisk::testing {

class TempDir {
public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("emsrisk-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
  std::filesystem::path path_;
};

inline std::string write_text(const std::string& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
  return path;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline Polygon square(double x0, double y0, double side = 1.0) {
  return {{{x0, y0}, {x0 + side, y0}, {x0 + side, y0 + side}, {x0, y0 + side}, {x0, y0}}};
}

inline CallEvent call(HourStamp t, const std::string& region, int code) { return {t, region, NatureCode{code}}; }

/// Regions laid out as unit squares along the x axis: id i at [i, i+1].
inline Dataset strip_dataset(int n_regions) {
  Dataset ds;
  for (int i = 0; i < n_regions; ++i) {
    std::string id = "R" + std::to_string(i);
    ds.regions[id] = Region{id, square(i, 0), 1500.0 + i, 1000.0, 10.0 * i};
  }
  return ds;
}

/// Adds a venue at the centre of region `region_index`'s square.
inline void add_venue(Dataset& ds, const std::string& id, const std::string& category, int region_index) {
  ds.venues[id] = Venue{id, category, Point{region_index + 0.5, 0.5}, "R" + std::to_string(region_index)};
}

}  // namespace emsrisk::testing
