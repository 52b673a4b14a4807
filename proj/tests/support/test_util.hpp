#pragma once

#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "scanstat/region_model.hpp"

namespace testutil {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("scanstat-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

inline double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

inline std::vector<scanstat::Region> grid_regions(std::size_t m) {
  std::vector<scanstat::Region> r;
  for (std::size_t i = 0; i < m; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "R%02zu", i);
    r.push_back({id, static_cast<double>(i % 6) * 10.0, static_cast<double>(i / 6) * 10.0});
  }
  return r;
}

}  // namespace testutil
