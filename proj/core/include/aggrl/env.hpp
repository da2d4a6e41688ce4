#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "aggrl/experience.hpp"
#include "aggrl/rng.hpp"
#include "aggrl/sensing.hpp"
#include "aggrl/sim.hpp"

namespace aggrl {

/// Parameters of an episode distribution.
struct ScenarioConfig {
  int robot_count = 4;
  int cylinder_obstacle_count = 0;
  bool gate_enabled = false;
  double gate_opening = 20.0;  // m; ignored unless gate_enabled
  double max_failure_fraction = 0.0;
  std::int64_t time_limit = 4500;  // ticks
  double arena_half_extent = 10.0;
  std::uint64_t seed = 0;

  BodyGeometry geometry;
  double goal_threshold = 0.5;     // m
  double dt = kDefaultDt;          // s
  double spawn_fraction = 1.0 / 3.0;  // width share of the start and goal regions
  double gate_thickness = 0.2;     // m
  double obstacle_radius = 0.0;    // m; 0 means "same as the payload"
  int placement_attempts = 1000;

  bool operator==(const ScenarioConfig&) const = default;
};

double arena_width(const ScenarioConfig& config);
/// Narrowest gate opening: four payload diameters.
double minimum_gate_opening(const ScenarioConfig& config);
double effective_obstacle_radius(const ScenarioConfig& config);

/// Throws ConfigError naming the first offending field.
void validate(const ScenarioConfig& config);

enum class Terminal : std::uint8_t { running = 0, success = 1, timeout = 2 };

const char* to_string(Terminal t);

struct FailureEvent {
  int robot_index = 0;
  std::int64_t tick = 0;
  bool operator==(const FailureEvent&) const = default;
};

struct EpisodeState {
  WorldState world;
  std::vector<FailureEvent> failure_schedule;
  std::vector<double> cumulative_rewards;
  Terminal terminal = Terminal::running;

  std::int64_t time_limit = 4500;
  double goal_threshold = 0.5;
  double dt = kDefaultDt;

  /// Observation of every robot at the current tick (stale for failed robots).
  std::vector<Observation> observations;

  bool operator==(const EpisodeState&) const = default;
};

/// Samples a fresh episode. The placement is a pure function of (config,
/// rng state). Throws ScenarioError when rejection sampling gives up.
EpisodeState generate_scenario(const ScenarioConfig& config, Rng& rng);

/// Convenience overload seeding the stream from config.seed.
EpisodeState generate_scenario(const ScenarioConfig& config);

/// Initializes an episode around an explicit world (tests, replays).
EpisodeState make_episode(WorldState world, std::int64_t time_limit, double goal_threshold,
                          double dt = kDefaultDt);

/// Rewards displacement toward the goal, penalizes proximity and elapsed time:
///   -2 + cos(cg_direction, displacement) - mean(proximities)
/// The cosine term is 0 when either vector is shorter than 1e-6 m.
double reward(Vec2 prev_payload_center, Vec2 payload_center, Vec2 cg_direction,
              std::span<const double> proximities);

struct StepResult {
  std::vector<int> robots;  // index of the robot that produced each experience
  std::vector<Experience> experiences;
};

/// Robots that must act at the current tick, in index order.
std::vector<int> acting_robots(const EpisodeState& episode);

/// Advances one tick. `joint_action` holds one action per acting robot (see
/// acting_robots), in index order. Throws UsageError on a finished episode and
/// ConfigError on an action-count mismatch.
StepResult env_step(EpisodeState& episode, std::span<const Action> joint_action);

struct CurriculumSchedule {
  double start_opening = 20.0;  // m, typically the arena width
  double minimum_opening = 4.0;  // m
  int completion_episode = 500;
};

CurriculumSchedule default_curriculum(const ScenarioConfig& config, int completion_episode = 500);

/// Gate opening for `episode_index`: linear from start to minimum, constant
/// after completion.
double curriculum_advance(const CurriculumSchedule& schedule, int episode_index);

}  // namespace aggrl
