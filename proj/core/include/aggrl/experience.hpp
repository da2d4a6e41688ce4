#pragma once

#include <variant>

#include "aggrl/sensing.hpp"
#include "aggrl/sim.hpp"

namespace aggrl {

inline constexpr int kDiscreteActions = 9;

struct DiscreteAction {
  int index = 4;
  bool operator==(const DiscreteAction&) const = default;
};

/// Value-family agents emit a discrete index, policy-family agents a
/// continuous wheel delta in [-0.1, 0.1] cm/s per wheel.
using Action = std::variant<DiscreteAction, WheelDelta>;

/// Row-major over {-0.1, 0, 0.1}^2: index = 3 * i + j, left wheel from i,
/// right wheel from j. Throws UsageError outside 0..8.
WheelDelta decode_discrete_action(int index);

WheelDelta to_wheel_delta(const Action& action);

struct Experience {
  Observation observation{};
  Action action;
  double reward = 0.0;
  Observation next_observation{};
  bool terminal = false;

  bool operator==(const Experience&) const = default;
};

}  // namespace aggrl
