#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "aggrl/geometry.hpp"

namespace aggrl {

/// Wheel speed limit in cm/s. The admissible range is the open interval
/// (-kMaxWheelSpeed, kMaxWheelSpeed), realized as a clamp to the limit minus
/// kWheelClampEpsilon.
inline constexpr double kMaxWheelSpeed = 10.0;
inline constexpr double kWheelClampEpsilon = 1e-6;
inline constexpr double kWheelClamp = kMaxWheelSpeed - kWheelClampEpsilon;

/// Largest per-tick wheel-speed increment (cm/s).
inline constexpr double kMaxWheelDelta = 0.1;

inline constexpr double kDefaultDt = 0.1;

struct BodyGeometry {
  double payload_radius = 0.5;   // m
  double robot_radius = 0.17;    // m
  double axle_length = 0.14;     // m
  bool operator==(const BodyGeometry&) const = default;
};

struct RobotState {
  double attachment_angle = 0.0;  // payload frame, rad
  double base_heading = 0.0;      // world frame, rad
  double wheel_left = 0.0;        // cm/s
  double wheel_right = 0.0;       // cm/s
  bool attached = true;
  bool failed = false;
  Vec2 position;  // derived from the payload pose while attached

  bool active() const { return !failed; }
  bool operator==(const RobotState&) const = default;
};

struct CylinderObstacle {
  Vec2 center;
  double radius = 0.5;
  bool operator==(const CylinderObstacle&) const = default;
};

/// Wall with rounded ends: all points within thickness/2 of segment [a, b].
struct WallObstacle {
  Vec2 a;
  Vec2 b;
  double thickness = 0.2;
  bool operator==(const WallObstacle&) const = default;
};

using Obstacle = std::variant<CylinderObstacle, WallObstacle>;

struct WheelDelta {
  double left = 0.0;   // cm/s
  double right = 0.0;  // cm/s
  bool operator==(const WheelDelta&) const = default;
};

struct WorldState {
  Pose payload_pose;
  BodyGeometry geometry;
  std::vector<RobotState> robots;
  std::vector<Obstacle> obstacles;
  Vec2 goal;
  double arena_half_extent = 10.0;
  std::int64_t tick = 0;

  // Velocity applied during the most recent step, after collision projection.
  Vec2 payload_velocity;
  double payload_angular_velocity = 0.0;

  double payload_radius() const { return geometry.payload_radius; }
  bool operator==(const WorldState&) const = default;
};

/// Places robots at uniform angular spacing on the payload rim.
void attach_uniformly(WorldState& world, int robot_count, std::span<const double> base_headings);

/// Recomputes the world position of every attached robot from the payload pose.
void reposition_attached(WorldState& world);

Vec2 rim_position(const WorldState& world, const RobotState& robot);

int active_robot_count(const WorldState& world);
std::vector<int> active_robot_indices(const WorldState& world);

/// Increments wheel speeds of every non-failed robot (in index order) and
/// clamps into the open speed interval. Throws ConfigError on count mismatch.
WorldState apply_actions(const WorldState& world, std::span<const WheelDelta> deltas);
void apply_actions_in_place(WorldState& world, std::span<const WheelDelta> deltas);

/// Advances one quasi-static tick; see docs/physics.md.
WorldState step(const WorldState& world, double dt = kDefaultDt);
void step_in_place(WorldState& world, double dt = kDefaultDt);

/// Detaches and despawns robot `index`. Throws ConfigError on an invalid or
/// already-failed index.
WorldState fail_robot(const WorldState& world, int index);
void fail_robot_in_place(WorldState& world, int index);

bool goal_reached(const WorldState& world, double threshold);

/// Radius of the disc used for payload collision: the payload plus the ring of
/// robot bodies gripping it.
double collision_radius(const WorldState& world);

/// Signed clearance between the payload surface and the nearest obstacle or
/// arena wall (negative means interpenetration).
double payload_separation(const WorldState& world);

/// Signed clearance of the collision disc against all constraints.
double collision_clearance(const WorldState& world);

}  // namespace aggrl
