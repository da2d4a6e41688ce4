#include "aggrl/algos.hpp"

#include <algorithm>
#include <cmath>

#include "aggrl/errors.hpp"

namespace aggrl {
namespace {

void require(bool ok, const char* field, const char* why) {
  if (!ok) throw ConfigError(std::string("hyper.") + field + ": " + why);
}

Eigen::VectorXd bootstrap(const Batch& batch, const Eigen::VectorXd& next_values, double gamma) {
  return batch.rewards.array() + gamma * (1.0 - batch.terminal.array()) * next_values.array();
}

}  // namespace

std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::dqn: return "dqn";
    case Algorithm::ddqn: return "ddqn";
    case Algorithm::ddpg: return "ddpg";
    case Algorithm::td3: return "td3";
  }
  return "unknown";
}

Algorithm parse_algorithm(std::string_view name) {
  for (auto a : {Algorithm::dqn, Algorithm::ddqn, Algorithm::ddpg, Algorithm::td3})
    if (to_string(a) == name) return a;
  throw ConfigError("unknown algorithm '" + std::string(name) + "' (expected dqn|ddqn|ddpg|td3)");
}

bool is_value_based(Algorithm a) { return a == Algorithm::dqn || a == Algorithm::ddqn; }

void validate(const Hyperparameters& hp) {
  require(hp.gamma > 0.0 && hp.gamma < 1.0, "gamma", "must lie in (0, 1)");
  require(hp.learning_rate >= 0.0 && std::isfinite(hp.learning_rate), "learning_rate", "must be >= 0");
  require(hp.batch_size >= 1, "batch_size", "must be >= 1");
  require(hp.replay_capacity >= static_cast<std::size_t>(hp.batch_size), "replay_capacity",
          "must be at least batch_size");
  require(hp.epsilon_start >= 0.0 && hp.epsilon_start <= 1.0, "epsilon_start", "must lie in [0, 1]");
  require(hp.epsilon_min >= 0.0 && hp.epsilon_min <= hp.epsilon_start, "epsilon_min",
          "must lie in [0, epsilon_start]");
  require(hp.epsilon_decrement >= 0.0, "epsilon_decrement", "must be >= 0");
  require(hp.target_update_interval >= 1, "target_update_interval", "must be >= 1");
  require(hp.tau >= 0.0 && hp.tau <= 1.0, "tau", "must lie in [0, 1]");
  require(hp.policy_delay >= 1, "policy_delay", "must be >= 1");
  require(hp.target_noise_sigma >= 0.0, "target_noise_sigma", "must be >= 0");
  require(hp.target_noise_clip >= 0.0, "target_noise_clip", "must be >= 0");
  require(hp.exploration_noise_sigma >= 0.0, "exploration_noise_sigma", "must be >= 0");
}

double epsilon_after(const Hyperparameters& hp, std::uint64_t learn_steps) {
  return std::max(hp.epsilon_min, hp.epsilon_start - hp.epsilon_decrement * static_cast<double>(learn_steps));
}

Eigen::MatrixXd critic_input(const Eigen::MatrixXd& observations, const Eigen::MatrixXd& normalized_actions) {
  if (observations.cols() != normalized_actions.cols() || normalized_actions.rows() != 2)
    throw ConfigError("critic_input: observation/action batch mismatch");
  Eigen::MatrixXd x(observations.rows() + 2, observations.cols());
  x.topRows(observations.rows()) = observations;
  x.bottomRows(2) = normalized_actions;
  return x;
}

int argmax_lowest(const Eigen::Ref<const Eigen::VectorXd>& values) {
  int best = 0;
  for (Eigen::Index i = 1; i < values.size(); ++i)
    if (values(i) > values(best)) best = static_cast<int>(i);
  return best;
}

Eigen::VectorXd dqn_target(const Batch& batch, const Network& target, double gamma) {
  const Eigen::MatrixXd q_next = target.forward(batch.next_observations);
  Eigen::VectorXd best(q_next.cols());
  for (Eigen::Index j = 0; j < q_next.cols(); ++j) best(j) = q_next.col(j).maxCoeff();
  return bootstrap(batch, best, gamma);
}

Eigen::VectorXd ddqn_target(const Batch& batch, const Network& online, const Network& target, double gamma) {
  const Eigen::MatrixXd q_online = online.forward(batch.next_observations);
  const Eigen::MatrixXd q_target = target.forward(batch.next_observations);
  Eigen::VectorXd chosen(q_online.cols());
  for (Eigen::Index j = 0; j < q_online.cols(); ++j) chosen(j) = q_target(argmax_lowest(q_online.col(j)), j);
  return bootstrap(batch, chosen, gamma);
}

Eigen::VectorXd ddpg_target(const Batch& batch, const Network& target_actor, const Network& target_critic,
                            double gamma) {
  const Eigen::MatrixXd next_actions = target_actor.forward(batch.next_observations);
  const Eigen::MatrixXd q = target_critic.forward(critic_input(batch.next_observations, next_actions));
  return bootstrap(batch, q.row(0).transpose(), gamma);
}

Eigen::VectorXd td3_target(const Batch& batch, const Network& target_actor, const Network& target_critic_1,
                           const Network& target_critic_2, double gamma, double noise_sigma, double noise_clip,
                           Rng& rng) {
  Eigen::MatrixXd next_actions = target_actor.forward(batch.next_observations);
  if (noise_sigma > 0.0) {
    for (Eigen::Index j = 0; j < next_actions.cols(); ++j)
      for (Eigen::Index i = 0; i < next_actions.rows(); ++i) {
        const double eps = std::clamp(gaussian(rng, noise_sigma), -noise_clip, noise_clip);
        next_actions(i, j) = std::clamp(next_actions(i, j) + eps, -1.0, 1.0);
      }
  }
  const Eigen::MatrixXd x = critic_input(batch.next_observations, next_actions);
  const Eigen::MatrixXd q1 = target_critic_1.forward(x);
  const Eigen::MatrixXd q2 = target_critic_2.forward(x);
  return bootstrap(batch, q1.cwiseMin(q2).row(0).transpose(), gamma);
}

Eigen::MatrixXd observation_matrix(const std::vector<Observation>& observations) {
  Eigen::MatrixXd m(kObservationSize, static_cast<Eigen::Index>(observations.size()));
  for (std::size_t j = 0; j < observations.size(); ++j)
    m.col(static_cast<Eigen::Index>(j)) = Eigen::Map<const Eigen::VectorXd>(observations[j].data(), kObservationSize);
  return m;
}

std::vector<int> select_actions_value(const Network& q, const Eigen::MatrixXd& observations, double epsilon,
                                      Rng& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("select_action_value: epsilon outside [0, 1]");
  const Eigen::MatrixXd values = q.forward(observations);
  std::vector<int> out(static_cast<std::size_t>(values.cols()));
  for (Eigen::Index j = 0; j < values.cols(); ++j) {
    if (epsilon > 0.0 && uniform(rng, 0.0, 1.0) < epsilon)
      out[static_cast<std::size_t>(j)] = uniform_int(rng, 0, kDiscreteActions - 1);
    else
      out[static_cast<std::size_t>(j)] = argmax_lowest(values.col(j));
  }
  return out;
}

std::vector<WheelDelta> select_actions_policy(const Network& actor, const Eigen::MatrixXd& observations,
                                              double exploration_sigma, Rng& rng) {
  const Eigen::MatrixXd a = actor.forward(observations);
  std::vector<WheelDelta> out(static_cast<std::size_t>(a.cols()));
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    double left = kMaxWheelDelta * a(0, j);
    double right = kMaxWheelDelta * a(1, j);
    if (exploration_sigma > 0.0) {
      left += gaussian(rng, exploration_sigma);
      right += gaussian(rng, exploration_sigma);
    }
    out[static_cast<std::size_t>(j)] = {std::clamp(left, -kMaxWheelDelta, kMaxWheelDelta),
                                        std::clamp(right, -kMaxWheelDelta, kMaxWheelDelta)};
  }
  return out;
}

int select_action_value(const Network& q, const Observation& observation, double epsilon, Rng& rng) {
  return select_actions_value(q, observation_matrix({observation}), epsilon, rng).front();
}

WheelDelta select_action_policy(const Network& actor, const Observation& observation, double exploration_sigma,
                                Rng& rng) {
  return select_actions_policy(actor, observation_matrix({observation}), exploration_sigma, rng).front();
}

}  // namespace aggrl
