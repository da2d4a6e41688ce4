#include "aggrl/policy.hpp"

#include <algorithm>
#include <cmath>

#include "aggrl/agent.hpp"
#include "aggrl/errors.hpp"

namespace aggrl {

void check_topology(Algorithm algorithm, const Network& acting) {
  const int outputs = is_value_based(algorithm) ? kDiscreteActions : 2;
  if (acting.input_size() != kObservationSize || acting.output_size() != outputs)
    throw ConfigError("model topology does not match algorithm " + std::string(to_string(algorithm)));
}

ModelPolicy::ModelPolicy(Algorithm algorithm, Network network) : algorithm_(algorithm), network_(std::move(network)) {
  check_topology(algorithm_, network_);
}

std::vector<Action> ModelPolicy::act(const std::vector<Observation>& observations) {
  if (observations.empty()) return {};
  return aggrl::act(algorithm_, network_, observation_matrix(observations), 0.0, 0.0, unused_rng_);
}

std::vector<Action> ScriptedPolicy::act(const std::vector<Observation>& observations) {
  constexpr double kTurnGain = 4.0;     // cm/s of wheel differential per radian
  constexpr double kMaxTurn = 6.0;      // cm/s
  constexpr double kCruise = kWheelClamp;
  std::vector<Action> out;
  out.reserve(observations.size());
  for (const auto& o : observations) {
    const Vec2 to_goal = unit_vector(kPi * o[obs::kRgAngle]) * o[obs::kRgDistance];
    const Vec2 to_payload = unit_vector(kPi * o[obs::kRcAngle]) * o[obs::kRcDistance];
    const Vec2 cg = to_goal - to_payload;
    const double error = std::atan2(cg.y, cg.x);
    const double turn = std::clamp(kTurnGain * error, -kMaxTurn, kMaxTurn);
    const double forward = kCruise * std::max(0.0, std::cos(error));
    const double want_left = std::clamp(forward - 0.5 * turn, -kWheelClamp, kWheelClamp);
    const double want_right = std::clamp(forward + 0.5 * turn, -kWheelClamp, kWheelClamp);
    const double left = o[obs::kWheelLeft] * kMaxWheelSpeed;
    const double right = o[obs::kWheelRight] * kMaxWheelSpeed;
    out.emplace_back(WheelDelta{std::clamp(want_left - left, -kMaxWheelDelta, kMaxWheelDelta),
                                std::clamp(want_right - right, -kMaxWheelDelta, kMaxWheelDelta)});
  }
  return out;
}

}  // namespace aggrl
