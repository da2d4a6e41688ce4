#include "aggrl/sim.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <string>

#include "aggrl/errors.hpp"

namespace aggrl {
namespace {

// A configuration is "in contact" with a constraint when its clearance is
// below this value; motion into the constraint is then projected away.
constexpr double kContactTolerance = 1e-7;
constexpr int kProjectionPasses = 8;
constexpr int kSweepIterations = 4;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct Contact {
  double clearance;
  Vec2 normal;  // unit, pointing from the obstacle toward the disc center
};

Contact point_contact(Vec2 center, Vec2 p, double reach) {
  const Vec2 d = center - p;
  const double dist = d.norm();
  const Vec2 n = dist > 0.0 ? d / dist : Vec2{1.0, 0.0};
  return {dist - reach, n};
}

// Contacts for one configuration, arena walls first, then obstacles.
template <typename Fn>
void for_each_contact(const WorldState& world, Vec2 center, double radius, Fn&& fn) {
  const double h = world.arena_half_extent;
  fn(Contact{h - center.x - radius, {-1.0, 0.0}});
  fn(Contact{center.x + h - radius, {1.0, 0.0}});
  fn(Contact{h - center.y - radius, {0.0, -1.0}});
  fn(Contact{center.y + h - radius, {0.0, 1.0}});
  for (const auto& obstacle : world.obstacles) {
    if (const auto* c = std::get_if<CylinderObstacle>(&obstacle)) {
      fn(point_contact(center, c->center, radius + c->radius));
    } else {
      const auto& w = std::get<WallObstacle>(obstacle);
      const Vec2 q = closest_point_on_segment(center, w.a, w.b);
      fn(point_contact(center, q, radius + 0.5 * w.thickness));
    }
  }
}

double min_clearance(const WorldState& world, Vec2 center, double radius) {
  double best = kInf;
  for_each_contact(world, center, radius, [&](const Contact& c) { best = std::min(best, c.clearance); });
  return best;
}

// Earliest s in [0, 1] at which a disc at origin + s*motion reaches distance
// `reach` from point p, or +inf.
double point_time_of_impact(Vec2 origin, Vec2 motion, Vec2 p, double reach) {
  const Vec2 rel = origin - p;
  const double a = motion.squared_norm();
  const double b = 2.0 * dot(motion, rel);
  const double c = rel.squared_norm() - reach * reach;
  if (a == 0.0 || c <= 0.0 || b >= 0.0) return kInf;
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return kInf;
  const double s = (-b - std::sqrt(disc)) / (2.0 * a);
  return s >= 0.0 ? s : kInf;
}

double wall_time_of_impact(Vec2 origin, Vec2 motion, const WallObstacle& w, double reach) {
  double best = std::min(point_time_of_impact(origin, motion, w.a, reach),
                         point_time_of_impact(origin, motion, w.b, reach));
  const Vec2 ab = w.b - w.a;
  const double len = ab.norm();
  if (len == 0.0) return best;
  const Vec2 u = ab / len;
  const Vec2 n = perp(u);
  const double offset = dot(origin - w.a, n);
  const double rate = dot(motion, n);
  double s = kInf;
  if (offset > reach && rate < 0.0) s = (offset - reach) / -rate;
  if (offset < -reach && rate > 0.0) s = (-reach - offset) / rate;
  if (s <= 1.0) {
    const double along = dot(origin + motion * s - w.a, u);
    if (along >= 0.0 && along <= len) best = std::min(best, s);
  }
  return best;
}

double time_of_impact(const WorldState& world, Vec2 origin, Vec2 motion, double radius) {
  const double h = world.arena_half_extent;
  double best = kInf;
  auto plane = [&](double gap, double rate) {
    if (gap > 0.0 && rate > 0.0) best = std::min(best, gap / rate);
  };
  plane(h - radius - origin.x, motion.x);
  plane(origin.x + h - radius, -motion.x);
  plane(h - radius - origin.y, motion.y);
  plane(origin.y + h - radius, -motion.y);
  for (const auto& obstacle : world.obstacles) {
    if (const auto* c = std::get_if<CylinderObstacle>(&obstacle)) {
      best = std::min(best, point_time_of_impact(origin, motion, c->center, radius + c->radius));
    } else {
      const auto& w = std::get<WallObstacle>(obstacle);
      best = std::min(best, wall_time_of_impact(origin, motion, w, radius + 0.5 * w.thickness));
    }
  }
  return best;
}

// Removes the velocity component pointing into every active contact. A
// velocity that cannot satisfy all contacts at once (a wedge) becomes zero.
Vec2 project_velocity(const WorldState& world, Vec2 center, double radius, Vec2 v) {
  for (int pass = 0; pass < kProjectionPasses; ++pass) {
    bool changed = false;
    for_each_contact(world, center, radius, [&](const Contact& c) {
      if (c.clearance > kContactTolerance) return;
      const double into = dot(v, c.normal);
      if (into < 0.0) {
        v -= c.normal * into;
        changed = true;
      }
    });
    if (!changed) return v;
  }
  bool violated = false;
  for_each_contact(world, center, radius, [&](const Contact& c) {
    if (c.clearance <= kContactTolerance && dot(v, c.normal) < -1e-12) violated = true;
  });
  return violated ? Vec2{} : v;
}

double clamp_wheel(double v) { return std::clamp(v, -kWheelClamp, kWheelClamp); }

}  // namespace

Vec2 rim_position(const WorldState& world, const RobotState& robot) {
  return world.payload_pose.position +
         unit_vector(world.payload_pose.heading + robot.attachment_angle) * world.payload_radius();
}

void reposition_attached(WorldState& world) {
  for (auto& robot : world.robots)
    if (robot.attached) robot.position = rim_position(world, robot);
}

void attach_uniformly(WorldState& world, int robot_count, std::span<const double> base_headings) {
  if (robot_count < 0 || (!base_headings.empty() && base_headings.size() != static_cast<std::size_t>(robot_count)))
    throw ConfigError("attach_uniformly: heading count does not match robot count");
  world.robots.assign(static_cast<std::size_t>(robot_count), RobotState{});
  for (int i = 0; i < robot_count; ++i) {
    auto& r = world.robots[static_cast<std::size_t>(i)];
    r.attachment_angle = wrap_angle(kTwoPi * i / robot_count);
    r.base_heading = base_headings.empty() ? 0.0 : wrap_angle(base_headings[static_cast<std::size_t>(i)]);
  }
  reposition_attached(world);
}

int active_robot_count(const WorldState& world) {
  return static_cast<int>(std::count_if(world.robots.begin(), world.robots.end(),
                                        [](const RobotState& r) { return r.active(); }));
}

std::vector<int> active_robot_indices(const WorldState& world) {
  std::vector<int> out;
  for (std::size_t i = 0; i < world.robots.size(); ++i)
    if (world.robots[i].active()) out.push_back(static_cast<int>(i));
  return out;
}

void apply_actions_in_place(WorldState& world, std::span<const WheelDelta> deltas) {
  const int active = active_robot_count(world);
  if (static_cast<int>(deltas.size()) != active)
    throw ConfigError("apply_actions: got " + std::to_string(deltas.size()) + " deltas for " +
                      std::to_string(active) + " active robots");
  std::size_t k = 0;
  for (auto& robot : world.robots) {
    if (!robot.active()) continue;
    const WheelDelta d = deltas[k++];
    const double limit = kMaxWheelDelta + 1e-12;
    if (!(std::abs(d.left) <= limit && std::abs(d.right) <= limit))
      throw UsageError("apply_actions: wheel delta outside [-0.1, 0.1] cm/s");
    robot.wheel_left = clamp_wheel(robot.wheel_left + d.left);
    robot.wheel_right = clamp_wheel(robot.wheel_right + d.right);
  }
}

WorldState apply_actions(const WorldState& world, std::span<const WheelDelta> deltas) {
  WorldState next = world;
  apply_actions_in_place(next, deltas);
  return next;
}

double collision_radius(const WorldState& world) {
  return world.geometry.payload_radius + world.geometry.robot_radius;
}

double collision_clearance(const WorldState& world) {
  return min_clearance(world, world.payload_pose.position, collision_radius(world));
}

double payload_separation(const WorldState& world) {
  return min_clearance(world, world.payload_pose.position, world.payload_radius());
}

namespace {
constexpr double kCancellationFloor = 32.0 * std::numeric_limits<double>::epsilon();
}  // namespace

void step_in_place(WorldState& world, double dt) {
  if (!(dt > 0.0)) throw ConfigError("step: dt must be positive");

  Vec2 velocity_sum;
  double tangential_sum = 0.0;
  double tangential_magnitude = 0.0;
  int contributors = 0;
  for (const auto& robot : world.robots) {
    if (!robot.attached || robot.failed) continue;
    const double speed = 0.5 * (robot.wheel_left + robot.wheel_right) / 100.0;  // m/s
    const Vec2 contribution = unit_vector(robot.base_heading) * speed;
    const Vec2 tangent = perp(unit_vector(world.payload_pose.heading + robot.attachment_angle));
    velocity_sum += contribution;
    const double t = dot(contribution, tangent);
    tangential_sum += t;
    tangential_magnitude += std::abs(speed);
    ++contributors;
  }
  Vec2 velocity;
  double angular = 0.0;
  if (contributors > 0) {
    velocity = velocity_sum / contributors;
    // Torques that cancel up to rounding (symmetric rings) are exactly zero.
    // Each tangential term carries rounding relative to its robot's speed.
    if (std::abs(tangential_sum) > kCancellationFloor * tangential_magnitude)
      angular = tangential_sum / contributors / world.payload_radius();
  }

  const double radius = collision_radius(world);
  const Vec2 start = world.payload_pose.position;
  const double start_clearance = min_clearance(world, start, radius);

  Vec2 center = start;
  velocity = project_velocity(world, center, radius, velocity);
  double remaining = dt;
  for (int it = 0; it < kSweepIterations && remaining > 0.0; ++it) {
    const Vec2 motion = velocity * remaining;
    if (motion.squared_norm() == 0.0) break;
    const double s = time_of_impact(world, center, motion, radius);
    if (s >= 1.0) {
      center += motion;
      remaining = 0.0;
      break;
    }
    center += motion * s;
    remaining *= (1.0 - s);
    velocity = project_velocity(world, center, radius, velocity);
  }

  if (!is_finite(center) ||
      min_clearance(world, center, radius) < std::min(start_clearance, 0.0) - 1e-12) {
    center = start;
    velocity = Vec2{};
  }

  world.payload_pose.position = center;
  world.payload_pose.heading = wrap_angle(world.payload_pose.heading + angular * dt);
  world.payload_velocity = velocity;
  world.payload_angular_velocity = angular;

  const double axle = world.geometry.axle_length;
  for (auto& robot : world.robots) {
    if (robot.failed) continue;
    const double spin = (robot.wheel_right - robot.wheel_left) / 100.0 / axle;
    robot.base_heading = wrap_angle(robot.base_heading + spin * dt);
  }
  reposition_attached(world);
  ++world.tick;
}

WorldState step(const WorldState& world, double dt) {
  WorldState next = world;
  step_in_place(next, dt);
  return next;
}

void fail_robot_in_place(WorldState& world, int index) {
  if (index < 0 || index >= static_cast<int>(world.robots.size()))
    throw ConfigError("fail_robot: index " + std::to_string(index) + " out of range");
  auto& robot = world.robots[static_cast<std::size_t>(index)];
  if (robot.failed) throw ConfigError("fail_robot: robot " + std::to_string(index) + " already failed");
  robot.failed = true;
  robot.attached = false;
}

WorldState fail_robot(const WorldState& world, int index) {
  WorldState next = world;
  fail_robot_in_place(next, index);
  return next;
}

bool goal_reached(const WorldState& world, double threshold) {
  return (world.payload_pose.position - world.goal).norm() <= threshold;
}

}  // namespace aggrl
