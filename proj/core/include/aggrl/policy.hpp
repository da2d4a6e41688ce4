#pragma once

#include <vector>

#include "aggrl/algos.hpp"
#include "aggrl/experience.hpp"
#include "aggrl/nn.hpp"

namespace aggrl {

/// Decentralized controller: maps each robot's own observation to its action.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::vector<Action> act(const std::vector<Observation>& observations) = 0;
};

/// Greedy execution of a trained model (no exploration). Throws ConfigError
/// if the network does not fit the algorithm family.
class ModelPolicy final : public Policy {
 public:
  ModelPolicy(Algorithm algorithm, Network network);
  std::vector<Action> act(const std::vector<Observation>& observations) override;

 private:
  Algorithm algorithm_;
  Network network_;
  Rng unused_rng_{0};
};

/// Hand-written oracle: every robot turns its base toward the payload-to-goal
/// bearing (reconstructed from its RG and RC observations) and drives at full
/// speed once aligned.
class ScriptedPolicy final : public Policy {
 public:
  std::vector<Action> act(const std::vector<Observation>& observations) override;
};

/// Always emits the same wheel delta.
class ConstantPolicy final : public Policy {
 public:
  explicit ConstantPolicy(WheelDelta delta = {}) : delta_(delta) {}
  std::vector<Action> act(const std::vector<Observation>& observations) override {
    return std::vector<Action>(observations.size(), Action{delta_});
  }

 private:
  WheelDelta delta_;
};

void check_topology(Algorithm algorithm, const Network& acting);

}  // namespace aggrl
