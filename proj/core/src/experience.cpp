#include "aggrl/experience.hpp"

#include <array>
#include <string>

#include "aggrl/errors.hpp"

namespace aggrl {

WheelDelta decode_discrete_action(int index) {
  if (index < 0 || index >= kDiscreteActions)
    throw UsageError("decode_discrete_action: index " + std::to_string(index) + " outside 0..8");
  static constexpr std::array<double, 3> kLevels{-kMaxWheelDelta, 0.0, kMaxWheelDelta};
  return {kLevels[static_cast<std::size_t>(index / 3)], kLevels[static_cast<std::size_t>(index % 3)]};
}

WheelDelta to_wheel_delta(const Action& action) {
  if (const auto* d = std::get_if<DiscreteAction>(&action)) return decode_discrete_action(d->index);
  return std::get<WheelDelta>(action);
}

}  // namespace aggrl
