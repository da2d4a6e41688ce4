#include "aggrl/trajectory.hpp"

#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "aggrl/errors.hpp"

namespace aggrl {
namespace {

using json = nlohmann::ordered_json;

json obstacle_json(const Obstacle& o) {
  if (const auto* c = std::get_if<CylinderObstacle>(&o))
    return json{{"kind", "cylinder"}, {"center", {c->center.x, c->center.y}}, {"radius", c->radius}};
  const auto& w = std::get<WallObstacle>(o);
  return json{{"kind", "wall"}, {"a", {w.a.x, w.a.y}}, {"b", {w.b.x, w.b.y}}, {"thickness", w.thickness}};
}

Vec2 vec(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

Obstacle obstacle_from(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "cylinder") return CylinderObstacle{vec(j.at("center")), j.at("radius").get<double>()};
  if (kind == "wall") return WallObstacle{vec(j.at("a")), vec(j.at("b")), j.at("thickness").get<double>()};
  throw ConfigError("unknown obstacle kind '" + kind + "'");
}

Terminal terminal_from(const std::string& s) {
  if (s == "running") return Terminal::running;
  if (s == "success") return Terminal::success;
  if (s == "timeout") return Terminal::timeout;
  throw ConfigError("unknown terminal '" + s + "'");
}

}  // namespace

void TrajectoryWriter::scenario(const EpisodeState& ep) {
  json obstacles = json::array();
  for (const auto& o : ep.world.obstacles) obstacles.push_back(obstacle_json(o));
  json j{{"type", "scenario"},
         {"arena_half_extent", ep.world.arena_half_extent},
         {"goal", {ep.world.goal.x, ep.world.goal.y}},
         {"goal_threshold", ep.goal_threshold},
         {"payload_radius", ep.world.geometry.payload_radius},
         {"robot_radius", ep.world.geometry.robot_radius},
         {"obstacles", obstacles}};
  out_ << j.dump() << '\n';
}

void TrajectoryWriter::tick(const EpisodeState& ep, double mean_reward) {
  const auto& w = ep.world;
  json robots = json::array();
  for (const auto& r : w.robots) robots.push_back({r.position.x, r.position.y, r.base_heading, r.failed});
  json j{{"type", "tick"},
         {"tick", w.tick},
         {"payload", {w.payload_pose.position.x, w.payload_pose.position.y, w.payload_pose.heading}},
         {"robots", robots},
         {"reward", mean_reward},
         {"terminal", to_string(ep.terminal)}};
  out_ << j.dump() << '\n';
}

TrajectoryLog read_trajectory(std::istream& in) {
  TrajectoryLog log;
  std::string line;
  int line_no = 0;
  bool have_scenario = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      const std::string type = j.at("type").get<std::string>();
      if (type == "scenario") {
        log.arena_half_extent = j.at("arena_half_extent").get<double>();
        log.goal = vec(j.at("goal"));
        log.goal_threshold = j.at("goal_threshold").get<double>();
        log.payload_radius = j.at("payload_radius").get<double>();
        log.robot_radius = j.at("robot_radius").get<double>();
        for (const auto& o : j.at("obstacles")) log.obstacles.push_back(obstacle_from(o));
        have_scenario = true;
      } else if (type == "tick") {
        TrajectoryTick t;
        t.tick = j.at("tick").get<std::int64_t>();
        const auto& p = j.at("payload");
        t.payload = Pose{{p.at(0).get<double>(), p.at(1).get<double>()}, p.at(2).get<double>()};
        for (const auto& r : j.at("robots")) {
          t.robots.push_back(Pose{{r.at(0).get<double>(), r.at(1).get<double>()}, r.at(2).get<double>()});
          t.failed.push_back(r.at(3).get<bool>());
        }
        t.reward = j.at("reward").get<double>();
        t.terminal = terminal_from(j.at("terminal").get<std::string>());
        log.ticks.push_back(std::move(t));
      } else {
        throw ConfigError("unknown record type '" + type + "'");
      }
    } catch (const ConfigError& e) {
      throw ConfigError("trajectory line " + std::to_string(line_no) + ": " + e.what());
    } catch (const json::exception& e) {
      throw ConfigError("trajectory line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_scenario) throw ConfigError("trajectory: missing scenario record");
  return log;
}

}  // namespace aggrl
