#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "aggrl/env.hpp"
#include "aggrl/sim.hpp"

namespace aggrl::testing {

/// Payload at `center` with `n` robots evenly spaced on the rim, all facing `heading`.
inline WorldState ring_world(int n, Vec2 center = {}, double heading = 0.0, double payload_heading = 0.0) {
  WorldState w;
  w.payload_pose = {center, payload_heading};
  w.goal = {8.0, 0.0};
  std::vector<double> headings(static_cast<std::size_t>(n), heading);
  attach_uniformly(w, n, headings);
  return w;
}

inline void set_wheels(WorldState& w, double left, double right) {
  for (auto& r : w.robots) {
    r.wheel_left = left;
    r.wheel_right = right;
  }
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("aggrl-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace aggrl::testing
