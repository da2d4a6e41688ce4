#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "aggrl/experience.hpp"
#include "aggrl/nn.hpp"
#include "aggrl/replay.hpp"
#include "aggrl/rng.hpp"

namespace aggrl {

enum class Algorithm : std::uint8_t { dqn = 0, ddqn = 1, ddpg = 2, td3 = 3 };

std::string_view to_string(Algorithm a);
/// Throws ConfigError for unknown names.
Algorithm parse_algorithm(std::string_view name);
bool is_value_based(Algorithm a);

struct Hyperparameters {
  double gamma = 0.99997;
  double learning_rate = 1e-4;
  int batch_size = 100;
  std::size_t replay_capacity = 1'000'000;
  double epsilon_start = 1.0;
  double epsilon_decrement = 1e-6;
  double epsilon_min = 0.01;
  int target_update_interval = 1000;  // learn steps between hard copies
  double tau = 0.005;
  int policy_delay = 2;
  double target_noise_sigma = 0.2;  // in units of the maximum wheel delta
  double target_noise_clip = 0.5;   // in units of the maximum wheel delta
  double exploration_noise_sigma = 0.1;  // cm/s

  bool operator==(const Hyperparameters&) const = default;
};

/// Throws ConfigError naming the offending field.
void validate(const Hyperparameters& hp);

/// max(epsilon_min, epsilon_start - epsilon_decrement * learn_steps).
double epsilon_after(const Hyperparameters& hp, std::uint64_t learn_steps);

/// Stacks observations (31 x B) and normalized actions (2 x B, in [-1, 1])
/// into the 33 x B critic input.
Eigen::MatrixXd critic_input(const Eigen::MatrixXd& observations, const Eigen::MatrixXd& normalized_actions);

// Bellman targets. Terminal samples always yield y = r.
Eigen::VectorXd dqn_target(const Batch& batch, const Network& target, double gamma);
Eigen::VectorXd ddqn_target(const Batch& batch, const Network& online, const Network& target, double gamma);
Eigen::VectorXd ddpg_target(const Batch& batch, const Network& target_actor, const Network& target_critic,
                            double gamma);
Eigen::VectorXd td3_target(const Batch& batch, const Network& target_actor, const Network& target_critic_1,
                           const Network& target_critic_2, double gamma, double noise_sigma, double noise_clip,
                           Rng& rng);

/// Index of the largest entry; ties go to the lowest index.
int argmax_lowest(const Eigen::Ref<const Eigen::VectorXd>& values);

int select_action_value(const Network& q, const Observation& observation, double epsilon, Rng& rng);
WheelDelta select_action_policy(const Network& actor, const Observation& observation, double exploration_sigma,
                                Rng& rng);

/// Batched variants over the columns of a 31 x N observation matrix.
std::vector<int> select_actions_value(const Network& q, const Eigen::MatrixXd& observations, double epsilon,
                                      Rng& rng);
std::vector<WheelDelta> select_actions_policy(const Network& actor, const Eigen::MatrixXd& observations,
                                              double exploration_sigma, Rng& rng);

Eigen::MatrixXd observation_matrix(const std::vector<Observation>& observations);

}  // namespace aggrl
