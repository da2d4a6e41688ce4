#pragma once

#include <string>
#include <vector>

#include "aggrl/trajectory.hpp"

namespace aggrl {

struct PlotPath {
  std::vector<Vec2> points;
  std::string color = "#1f4fd1";
  std::string label;
};

/// Fixed 600x600 viewport mapped from the arena square. Obstacles gray,
/// payload paths as polylines, goal as a green disc.
std::string render_svg(const TrajectoryLog& layout, const std::vector<PlotPath>& paths);

/// Single-trajectory rendering used by `aggrl replay`.
std::string render_trajectory_svg(const TrajectoryLog& log);

}  // namespace aggrl
