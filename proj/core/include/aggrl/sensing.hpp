#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>

#include "aggrl/sim.hpp"

namespace aggrl {

inline constexpr int kProximityRays = 24;
inline constexpr int kObservationSize = 31;
inline constexpr double kSensorRange = 2.0;  // m
/// Decay constant: reading is 0.01 at the edge of the range.
inline const double kProximityDecay = std::log(100.0) / kSensorRange;

/// Version of the flattening order below; bumped whenever it changes. Carried
/// in checkpoints and in the wire HELLO handshake.
inline constexpr std::uint16_t kObservationLayoutVersion = 1;

/// Flattened per-robot observation. Index layout:
///   0 rg_distance   goal distance / arena diagonal, [0, 1]
///   1 rg_angle      goal bearing in the robot base frame / pi, [-1, 1)
///   2 rc_distance   payload-center distance / arena diagonal, [0, 1]
///   3 rc_angle      payload-center bearing in the base frame / pi, [-1, 1)
///   4 cg_distance   payload-to-goal distance / arena diagonal, [0, 1]
///   5 wheel_left    left wheel speed / 10 cm/s, (-1, 1)
///   6 wheel_right   right wheel speed / 10 cm/s, (-1, 1)
///   7..30           proximity rays 0..23, [0, 1]
using Observation = std::array<double, kObservationSize>;

namespace obs {
inline constexpr int kRgDistance = 0;
inline constexpr int kRgAngle = 1;
inline constexpr int kRcDistance = 2;
inline constexpr int kRcAngle = 3;
inline constexpr int kCgDistance = 4;
inline constexpr int kWheelLeft = 5;
inline constexpr int kWheelRight = 6;
inline constexpr int kProximity = 7;
}  // namespace obs

using ProximityArray = std::array<double, kProximityRays>;

/// exp(-decay * distance) inside the sensing range, exactly 0 beyond it.
double proximity_reading(double distance);

/// Distance from `origin` along unit `direction` to the first surface in the
/// world seen by robot `robot_index`, or +inf. Exposed for testing.
double cast_ray(const WorldState& world, int robot_index, Vec2 origin, Vec2 direction);

ProximityArray sense_proximity(const WorldState& world, int robot_index);

Observation build_observation(const WorldState& world, int robot_index);

inline std::span<const double> proximity_of(const Observation& o) {
  return std::span<const double>(o).subspan(obs::kProximity, kProximityRays);
}

}  // namespace aggrl
