#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "aggrl/env.hpp"

namespace aggrl {

// Line-delimited JSON. The first line describes the scenario:
//   {"type":"scenario","arena_half_extent":..,"goal":[x,y],"goal_threshold":..,
//    "payload_radius":..,"robot_radius":..,"obstacles":[...]}
// and every following line is one tick:
//   {"type":"tick","tick":t,"payload":[x,y,heading],
//    "robots":[[x,y,heading,failed],...],"reward":r,"terminal":"running"}
// where reward is the mean over robots that acted during that tick.

struct TrajectoryTick {
  std::int64_t tick = 0;
  Pose payload;
  std::vector<Pose> robots;
  std::vector<bool> failed;
  double reward = 0.0;
  Terminal terminal = Terminal::running;
};

struct TrajectoryLog {
  double arena_half_extent = 10.0;
  Vec2 goal;
  double goal_threshold = 0.5;
  double payload_radius = 0.5;
  double robot_radius = 0.17;
  std::vector<Obstacle> obstacles;
  std::vector<TrajectoryTick> ticks;
};

class TrajectoryWriter {
 public:
  explicit TrajectoryWriter(std::ostream& out) : out_(out) {}
  void scenario(const EpisodeState& episode);
  void tick(const EpisodeState& episode, double mean_reward);

 private:
  std::ostream& out_;
};

/// Throws ConfigError on malformed records (with the line number).
TrajectoryLog read_trajectory(std::istream& in);

}  // namespace aggrl
