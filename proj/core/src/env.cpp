#include "aggrl/env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "aggrl/errors.hpp"

namespace aggrl {
namespace {

constexpr double kDegenerateLength = 1e-6;

void require(bool ok, const char* field, const std::string& why) {
  if (!ok) throw ConfigError(std::string("scenario.") + field + ": " + why);
}

}  // namespace

double arena_width(const ScenarioConfig& config) { return 2.0 * config.arena_half_extent; }

double minimum_gate_opening(const ScenarioConfig& config) {
  return 4.0 * 2.0 * config.geometry.payload_radius;
}

double effective_obstacle_radius(const ScenarioConfig& config) {
  return config.obstacle_radius > 0.0 ? config.obstacle_radius : config.geometry.payload_radius;
}

void validate(const ScenarioConfig& c) {
  require(c.robot_count >= 1, "robot_count", "must be >= 1");
  require(c.cylinder_obstacle_count >= 0, "cylinder_obstacle_count", "must be >= 0");
  require(c.max_failure_fraction >= 0.0 && c.max_failure_fraction <= 1.0, "max_failure_fraction",
          "must lie in [0, 1]");
  require(c.time_limit >= 1, "time_limit", "must be >= 1");
  require(c.arena_half_extent > 0.0 && std::isfinite(c.arena_half_extent), "arena_half_extent",
          "must be positive");
  require(c.geometry.payload_radius > 0.0, "payload_radius", "must be positive");
  require(c.geometry.robot_radius >= 0.0, "robot_radius", "must be >= 0");
  require(c.geometry.axle_length > 0.0, "axle_length", "must be positive");
  require(c.goal_threshold > 0.0, "goal_threshold", "must be positive");
  require(c.dt > 0.0, "dt", "must be positive");
  require(c.spawn_fraction > 0.0 && c.spawn_fraction < 0.5, "spawn_fraction", "must lie in (0, 0.5)");
  require(c.gate_thickness > 0.0, "gate_thickness", "must be positive");
  require(c.placement_attempts >= 1, "placement_attempts", "must be >= 1");
  if (c.gate_enabled) {
    require(c.gate_opening >= minimum_gate_opening(c) - 1e-9, "gate_opening",
            "must be at least four payload diameters");
  }
  const double envelope = c.geometry.payload_radius + c.geometry.robot_radius;
  require(c.arena_half_extent * 2.0 * c.spawn_fraction > 2.0 * envelope, "arena_half_extent",
          "spawn region too small for the payload");
}

const char* to_string(Terminal t) {
  switch (t) {
    case Terminal::running: return "running";
    case Terminal::success: return "success";
    case Terminal::timeout: return "timeout";
  }
  return "unknown";
}

EpisodeState make_episode(WorldState world, std::int64_t time_limit, double goal_threshold, double dt) {
  EpisodeState ep;
  ep.world = std::move(world);
  ep.time_limit = time_limit;
  ep.goal_threshold = goal_threshold;
  ep.dt = dt;
  ep.cumulative_rewards.assign(ep.world.robots.size(), 0.0);
  ep.observations.assign(ep.world.robots.size(), Observation{});
  for (int i : active_robot_indices(ep.world))
    ep.observations[static_cast<std::size_t>(i)] = build_observation(ep.world, i);
  return ep;
}

EpisodeState generate_scenario(const ScenarioConfig& config) {
  Rng rng(config.seed);
  return generate_scenario(config, rng);
}

EpisodeState generate_scenario(const ScenarioConfig& config, Rng& rng) {
  validate(config);
  const double h = config.arena_half_extent;
  const double envelope = config.geometry.payload_radius + config.geometry.robot_radius;
  const double band = 2.0 * h * config.spawn_fraction;
  const double left_edge = -h + band;   // start region: x in [-h, left_edge]
  const double right_edge = h - band;   // goal region:  x in [right_edge, h]

  WorldState world;
  world.geometry = config.geometry;
  world.arena_half_extent = h;
  world.payload_pose.position = {uniform(rng, -h + envelope, left_edge - envelope),
                                 uniform(rng, -h + envelope, h - envelope)};
  world.payload_pose.heading = uniform(rng, -kPi, kPi);
  world.goal = {uniform(rng, right_edge + envelope, h - envelope), uniform(rng, -h + envelope, h - envelope)};

  std::vector<double> headings(static_cast<std::size_t>(config.robot_count));
  for (auto& heading : headings) heading = uniform(rng, -kPi, kPi);
  attach_uniformly(world, config.robot_count, headings);

  const double r = effective_obstacle_radius(config);
  for (int k = 0; k < config.cylinder_obstacle_count; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < config.placement_attempts && !placed; ++attempt) {
      const Vec2 c{uniform(rng, left_edge, right_edge), uniform(rng, -h + r, h - r)};
      if ((c - world.payload_pose.position).norm() < envelope + r) continue;
      if ((c - world.goal).norm() < envelope + r) continue;
      world.obstacles.push_back(CylinderObstacle{c, r});
      placed = true;
    }
    if (!placed) throw ScenarioError("generate_scenario: could not place cylinder obstacle " + std::to_string(k));
  }

  if (config.gate_enabled) {
    const double half_t = 0.5 * config.gate_thickness;
    const double opening = std::min(config.gate_opening, 2.0 * h);
    const double x = uniform(rng, left_edge + half_t, right_edge - half_t);
    const double center = opening >= 2.0 * h ? 0.0 : uniform(rng, -h + 0.5 * opening, h - 0.5 * opening);
    const double low = center - 0.5 * opening;
    const double high = center + 0.5 * opening;
    if (low > -h) world.obstacles.push_back(WallObstacle{{x, -h}, {x, low}, config.gate_thickness});
    if (high < h) world.obstacles.push_back(WallObstacle{{x, high}, {x, h}, config.gate_thickness});
  }

  EpisodeState ep = make_episode(std::move(world), config.time_limit, config.goal_threshold, config.dt);

  const int max_failures =
      static_cast<int>(std::floor(config.max_failure_fraction * config.robot_count + 1e-9));
  const int failures = uniform_int(rng, 0, max_failures);
  if (failures > 0) {
    std::vector<int> order(static_cast<std::size_t>(config.robot_count));
    std::iota(order.begin(), order.end(), 0);
    // Partial Fisher-Yates: the first `failures` entries are a uniform draw
    // without replacement.
    for (int i = 0; i < failures; ++i) {
      const int j = uniform_int(rng, i, config.robot_count - 1);
      std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }
    for (int i = 0; i < failures; ++i) {
      const auto tick = static_cast<std::int64_t>(
          std::uniform_int_distribution<std::int64_t>(0, config.time_limit)(rng));
      ep.failure_schedule.push_back({order[static_cast<std::size_t>(i)], tick});
    }
  }
  return ep;
}

double reward(Vec2 prev_payload_center, Vec2 payload_center, Vec2 cg_direction,
              std::span<const double> proximities) {
  const Vec2 displacement = payload_center - prev_payload_center;
  const double dn = displacement.norm();
  const double gn = cg_direction.norm();
  double cosine = 0.0;
  if (dn >= kDegenerateLength && gn >= kDegenerateLength)
    cosine = std::clamp(dot(cg_direction, displacement) / (gn * dn), -1.0, 1.0);
  double mean_proximity = 0.0;
  if (!proximities.empty())
    mean_proximity = std::accumulate(proximities.begin(), proximities.end(), 0.0) /
                     static_cast<double>(proximities.size());
  return -2.0 + cosine - mean_proximity;
}

std::vector<int> acting_robots(const EpisodeState& episode) { return active_robot_indices(episode.world); }

StepResult env_step(EpisodeState& ep, std::span<const Action> joint_action) {
  if (ep.terminal != Terminal::running) throw UsageError("env_step: episode already finished");
  const std::vector<int> acting = acting_robots(ep);
  if (joint_action.size() != acting.size())
    throw ConfigError("env_step: got " + std::to_string(joint_action.size()) + " actions for " +
                      std::to_string(acting.size()) + " acting robots");

  for (const auto& event : ep.failure_schedule)
    if (event.tick == ep.world.tick && !ep.world.robots[static_cast<std::size_t>(event.robot_index)].failed)
      fail_robot_in_place(ep.world, event.robot_index);

  std::vector<WheelDelta> deltas;
  std::vector<std::size_t> action_slot;
  for (std::size_t k = 0; k < acting.size(); ++k) {
    if (ep.world.robots[static_cast<std::size_t>(acting[k])].failed) continue;
    deltas.push_back(to_wheel_delta(joint_action[k]));
    action_slot.push_back(k);
  }

  const Vec2 prev_center = ep.world.payload_pose.position;
  const Vec2 cg_direction = ep.world.goal - prev_center;
  apply_actions_in_place(ep.world, deltas);
  step_in_place(ep.world, ep.dt);

  if (goal_reached(ep.world, ep.goal_threshold))
    ep.terminal = Terminal::success;
  else if (ep.world.tick >= ep.time_limit)
    ep.terminal = Terminal::timeout;
  const bool done = ep.terminal != Terminal::running;

  StepResult result;
  result.robots.reserve(action_slot.size());
  result.experiences.reserve(action_slot.size());
  for (std::size_t slot : action_slot) {
    const int i = acting[slot];
    const auto ui = static_cast<std::size_t>(i);
    Observation next = build_observation(ep.world, i);
    const double r = reward(prev_center, ep.world.payload_pose.position, cg_direction, proximity_of(next));
    ep.cumulative_rewards[ui] += r;
    result.robots.push_back(i);
    result.experiences.push_back(Experience{ep.observations[ui], joint_action[slot], r, next, done});
    ep.observations[ui] = next;
  }
  return result;
}

CurriculumSchedule default_curriculum(const ScenarioConfig& config, int completion_episode) {
  return {arena_width(config), minimum_gate_opening(config), completion_episode};
}

double curriculum_advance(const CurriculumSchedule& s, int episode_index) {
  if (s.completion_episode <= 0 || episode_index >= s.completion_episode) return s.minimum_opening;
  if (episode_index <= 0) return s.start_opening;
  const double f = static_cast<double>(episode_index) / s.completion_episode;
  return s.start_opening + (s.minimum_opening - s.start_opening) * f;
}

}  // namespace aggrl
