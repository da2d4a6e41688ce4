#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "aggrl/algos.hpp"
#include "aggrl/nn.hpp"
#include "aggrl/replay.hpp"

namespace aggrl {

struct LearnReport {
  double loss = 0.0;         // critic / Q mean-squared Bellman error
  double actor_objective = 0.0;  // mean Q of the actor's actions (policy family, when updated)
  bool actor_updated = false;
};

/// The single shared CTDE model: all networks of one algorithm plus the
/// counters that drive exploration and target updates.
class Agent {
 public:
  Agent(Algorithm algorithm, const Hyperparameters& hp, std::uint64_t seed);

  Algorithm algorithm() const { return algorithm_; }
  const Hyperparameters& hyperparameters() const { return hp_; }
  Hyperparameters& hyperparameters() { return hp_; }

  /// Samples a batch and performs one update. nullopt (and no state change)
  /// while the buffer holds fewer than batch_size experiences.
  std::optional<LearnReport> learn_step(const ReplayBuffer& buffer, Rng& rng);

  /// Updates from an explicit batch (exposed for tests).
  LearnReport learn_on_batch(const Batch& batch, Rng& rng);

  double epsilon() const { return epsilon_after(hp_, learn_steps_); }
  std::uint64_t learn_steps() const { return learn_steps_; }
  std::uint64_t critic_updates() const { return critic_updates_; }
  std::uint64_t actor_updates() const { return actor_updates_; }

  /// The network that maps observations to actions: Q for the value
  /// family, the actor for the policy family.
  const Network& acting_network() const;

  Network& q() { return nets_.at(0); }
  Network& q_target() { return nets_.at(1); }
  Network& actor() { return nets_.at(0); }
  Network& actor_target() { return nets_.at(1); }
  Network& critic1() { return nets_.at(2); }
  Network& critic1_target() { return nets_.at(3); }
  Network& critic2() { return nets_.at(4); }
  Network& critic2_target() { return nets_.at(5); }
  const std::vector<Network>& networks() const { return nets_; }
  std::vector<Network>& networks() { return nets_; }

  bool operator==(const Agent&) const = default;

 private:
  friend struct CheckpointAccess;

  LearnReport learn_value(const Batch& batch);
  LearnReport learn_policy(const Batch& batch, Rng& rng);

  Algorithm algorithm_;
  Hyperparameters hp_;
  std::vector<Network> nets_;
  std::uint64_t learn_steps_ = 0;
  std::uint64_t critic_updates_ = 0;
  std::uint64_t actor_updates_ = 0;
};

/// Maps a Q-value or actor output batch to environment actions.
std::vector<Action> act(Algorithm algorithm, const Network& acting, const Eigen::MatrixXd& observations,
                        double epsilon, double exploration_sigma, Rng& rng);

struct Checkpoint {
  Agent agent;
  std::int64_t episode = 0;
  std::map<std::string, double> metrics;
};

inline constexpr std::uint16_t kCheckpointFormatVersion = 1;

std::vector<std::byte> encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(std::span<const std::byte> bytes);

/// Throws std::runtime_error on I/O failure.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace aggrl
