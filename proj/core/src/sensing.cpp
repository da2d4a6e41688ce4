#include "aggrl/sensing.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "aggrl/errors.hpp"

namespace aggrl {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Origins closer than this to a circle are treated as lying on it; the ray
// then hits at distance 0 only if it points inward.
constexpr double kOnSurface = 1e-9;

double ray_circle(Vec2 origin, Vec2 dir, Vec2 center, double radius) {
  const Vec2 rel = origin - center;
  const double b = dot(dir, rel);
  const double dist = rel.norm();
  if (dist < radius - kOnSurface) return 0.0;
  if (dist <= radius + kOnSurface) return b < 0.0 ? 0.0 : kInf;
  if (b >= 0.0) return kInf;
  const double c = rel.squared_norm() - radius * radius;
  const double disc = b * b - c;
  if (disc < 0.0) return kInf;
  return std::max(0.0, -b - std::sqrt(disc));
}

double ray_capsule(Vec2 origin, Vec2 dir, const WallObstacle& w) {
  const double r = 0.5 * w.thickness;
  double best = std::min(ray_circle(origin, dir, w.a, r), ray_circle(origin, dir, w.b, r));
  const Vec2 ab = w.b - w.a;
  const double len = ab.norm();
  if (len == 0.0) return best;
  const Vec2 u = ab / len;
  const Vec2 n = perp(u);
  const double offset = dot(origin - w.a, n);
  const double along0 = dot(origin - w.a, u);
  if (std::abs(offset) <= r && along0 >= 0.0 && along0 <= len) return 0.0;
  const double rate = dot(dir, n);
  double t = kInf;
  if (offset > r && rate < 0.0) t = (offset - r) / -rate;
  if (offset < -r && rate > 0.0) t = (-r - offset) / rate;
  if (t < kInf) {
    const double along = dot(origin + dir * t - w.a, u);
    if (along >= 0.0 && along <= len) best = std::min(best, t);
  }
  return best;
}

double ray_arena(Vec2 origin, Vec2 dir, double h) {
  double best = kInf;
  if (dir.x > 0.0) best = std::min(best, (h - origin.x) / dir.x);
  if (dir.x < 0.0) best = std::min(best, (-h - origin.x) / dir.x);
  if (dir.y > 0.0) best = std::min(best, (h - origin.y) / dir.y);
  if (dir.y < 0.0) best = std::min(best, (-h - origin.y) / dir.y);
  return std::max(0.0, best);
}

const RobotState& checked_robot(const WorldState& world, int robot_index) {
  if (robot_index < 0 || robot_index >= static_cast<int>(world.robots.size()))
    throw UsageError("sensing: robot index " + std::to_string(robot_index) + " out of range");
  const auto& robot = world.robots[static_cast<std::size_t>(robot_index)];
  if (robot.failed) throw UsageError("sensing: robot " + std::to_string(robot_index) + " has failed");
  return robot;
}

double normalized_bearing(Vec2 from, Vec2 to, double heading) {
  const Vec2 d = to - from;
  if (d.x == 0.0 && d.y == 0.0) return 0.0;
  return wrap_angle(std::atan2(d.y, d.x) - heading) / kPi;
}

}  // namespace

double proximity_reading(double distance) {
  if (distance >= kSensorRange) return 0.0;
  return std::exp(-kProximityDecay * std::max(0.0, distance));
}

double cast_ray(const WorldState& world, int robot_index, Vec2 origin, Vec2 direction) {
  double best = ray_arena(origin, direction, world.arena_half_extent);
  best = std::min(best, ray_circle(origin, direction, world.payload_pose.position, world.payload_radius()));
  for (const auto& obstacle : world.obstacles) {
    if (const auto* c = std::get_if<CylinderObstacle>(&obstacle))
      best = std::min(best, ray_circle(origin, direction, c->center, c->radius));
    else
      best = std::min(best, ray_capsule(origin, direction, std::get<WallObstacle>(obstacle)));
  }
  for (std::size_t j = 0; j < world.robots.size(); ++j) {
    if (static_cast<int>(j) == robot_index || world.robots[j].failed) continue;
    best = std::min(best, ray_circle(origin, direction, world.robots[j].position, world.geometry.robot_radius));
  }
  return best;
}

ProximityArray sense_proximity(const WorldState& world, int robot_index) {
  const auto& robot = checked_robot(world, robot_index);
  ProximityArray out{};
  for (int k = 0; k < kProximityRays; ++k) {
    const Vec2 dir = unit_vector(robot.base_heading + kTwoPi * k / kProximityRays);
    const double hit = cast_ray(world, robot_index, robot.position, dir);
    const double surface = std::max(0.0, hit - world.geometry.robot_radius);
    out[static_cast<std::size_t>(k)] = proximity_reading(surface);
  }
  return out;
}

Observation build_observation(const WorldState& world, int robot_index) {
  const auto& robot = checked_robot(world, robot_index);
  const double diagonal = 2.0 * std::sqrt(2.0) * world.arena_half_extent;
  auto norm_dist = [&](Vec2 a, Vec2 b) { return std::clamp((b - a).norm() / diagonal, 0.0, 1.0); };

  const Vec2 payload = world.payload_pose.position;
  Observation o{};
  o[obs::kRgDistance] = norm_dist(robot.position, world.goal);
  o[obs::kRgAngle] = normalized_bearing(robot.position, world.goal, robot.base_heading);
  o[obs::kRcDistance] = norm_dist(robot.position, payload);
  o[obs::kRcAngle] = normalized_bearing(robot.position, payload, robot.base_heading);
  o[obs::kCgDistance] = norm_dist(payload, world.goal);
  o[obs::kWheelLeft] = robot.wheel_left / kMaxWheelSpeed;
  o[obs::kWheelRight] = robot.wheel_right / kMaxWheelSpeed;
  const auto prox = sense_proximity(world, robot_index);
  std::copy(prox.begin(), prox.end(), o.begin() + obs::kProximity);
  return o;
}

}  // namespace aggrl
