#include "aggrl/agent.hpp"

#include <array>
#include <fstream>
#include <iterator>

#include "aggrl/bytes.hpp"
#include "aggrl/errors.hpp"

namespace aggrl {

struct CheckpointAccess {
  static void restore_counters(Agent& a, std::uint64_t learn, std::uint64_t critic, std::uint64_t actor) {
    a.learn_steps_ = learn;
    a.critic_updates_ = critic;
    a.actor_updates_ = actor;
  }
};

namespace {

constexpr std::array<std::byte, 4> kMagic{std::byte{'A'}, std::byte{'G'}, std::byte{'R'}, std::byte{'L'}};
constexpr std::array<std::byte, 4> kCheckpointTag{std::byte{'C'}, std::byte{'K'}, std::byte{'P'}, std::byte{'T'}};

std::size_t network_count(Algorithm a) {
  switch (a) {
    case Algorithm::dqn:
    case Algorithm::ddqn: return 2;
    case Algorithm::ddpg: return 4;
    case Algorithm::td3: return 6;
  }
  return 0;
}

Eigen::MatrixXd normalized(const Eigen::MatrixXd& deltas) { return deltas / kMaxWheelDelta; }

void write_hyperparameters(ByteWriter& w, const Hyperparameters& hp) {
  w.f64(hp.gamma);
  w.f64(hp.learning_rate);
  w.u32(static_cast<std::uint32_t>(hp.batch_size));
  w.u64(hp.replay_capacity);
  w.f64(hp.epsilon_start);
  w.f64(hp.epsilon_decrement);
  w.f64(hp.epsilon_min);
  w.u32(static_cast<std::uint32_t>(hp.target_update_interval));
  w.f64(hp.tau);
  w.u32(static_cast<std::uint32_t>(hp.policy_delay));
  w.f64(hp.target_noise_sigma);
  w.f64(hp.target_noise_clip);
  w.f64(hp.exploration_noise_sigma);
}

Hyperparameters read_hyperparameters(ByteReader& r) {
  Hyperparameters hp;
  hp.gamma = r.f64();
  hp.learning_rate = r.f64();
  hp.batch_size = static_cast<int>(r.u32());
  hp.replay_capacity = r.u64();
  hp.epsilon_start = r.f64();
  hp.epsilon_decrement = r.f64();
  hp.epsilon_min = r.f64();
  hp.target_update_interval = static_cast<int>(r.u32());
  hp.tau = r.f64();
  hp.policy_delay = static_cast<int>(r.u32());
  hp.target_noise_sigma = r.f64();
  hp.target_noise_clip = r.f64();
  hp.exploration_noise_sigma = r.f64();
  return hp;
}

}  // namespace

Agent::Agent(Algorithm algorithm, const Hyperparameters& hp, std::uint64_t seed)
    : algorithm_(algorithm), hp_(hp) {
  validate(hp_);
  Rng rng(seed);
  if (is_value_based(algorithm)) {
    Network q = make_value_network(rng);
    nets_ = {q, q};
    return;
  }
  Network actor = make_actor_network(rng);
  Network critic1 = make_critic_network(rng);
  nets_ = {actor, actor, critic1, critic1};
  if (algorithm == Algorithm::td3) {
    Network critic2 = make_critic_network(rng);
    nets_.push_back(critic2);
    nets_.push_back(critic2);
  }
}

const Network& Agent::acting_network() const { return nets_.at(0); }

std::optional<LearnReport> Agent::learn_step(const ReplayBuffer& buffer, Rng& rng) {
  auto batch = buffer.sample_batch(hp_.batch_size, rng);
  if (!batch) return std::nullopt;
  return learn_on_batch(*batch, rng);
}

LearnReport Agent::learn_on_batch(const Batch& batch, Rng& rng) {
  LearnReport report = is_value_based(algorithm_) ? learn_value(batch) : learn_policy(batch, rng);
  ++learn_steps_;
  if (is_value_based(algorithm_) && learn_steps_ % static_cast<std::uint64_t>(hp_.target_update_interval) == 0)
    q_target().soft_update(q(), 1.0);
  return report;
}

LearnReport Agent::learn_value(const Batch& batch) {
  const Eigen::VectorXd y = algorithm_ == Algorithm::ddqn ? ddqn_target(batch, q(), q_target(), hp_.gamma)
                                                          : dqn_target(batch, q_target(), hp_.gamma);
  const ForwardPass pass = q().forward_cached(batch.observations);
  const Eigen::MatrixXd& values = pass.result();
  const double n = batch.size();
  Eigen::MatrixXd upstream = Eigen::MatrixXd::Zero(values.rows(), values.cols());
  double loss = 0.0;
  for (Eigen::Index j = 0; j < values.cols(); ++j) {
    const int a = batch.action_indices[static_cast<std::size_t>(j)];
    if (a < 0 || a >= kDiscreteActions) throw ConfigError("learn_step: value-family batch holds a continuous action");
    const double diff = values(a, j) - y(j);
    loss += diff * diff / n;
    upstream(a, j) = 2.0 * diff / n;
  }
  q().adam_update(q().backward(pass, upstream), hp_.learning_rate);
  ++critic_updates_;
  return {loss, 0.0, false};
}

LearnReport Agent::learn_policy(const Batch& batch, Rng& rng) {
  const bool td3 = algorithm_ == Algorithm::td3;
  const Eigen::VectorXd y =
      td3 ? td3_target(batch, actor_target(), critic1_target(), critic2_target(), hp_.gamma, hp_.target_noise_sigma,
                       hp_.target_noise_clip, rng)
          : ddpg_target(batch, actor_target(), critic1_target(), hp_.gamma);
  const double n = batch.size();
  const Eigen::MatrixXd x = critic_input(batch.observations, normalized(batch.action_deltas));

  auto fit_critic = [&](Network& critic) {
    const ForwardPass pass = critic.forward_cached(x);
    const Eigen::RowVectorXd diff = pass.result().row(0) - y.transpose();
    critic.adam_update(critic.backward(pass, 2.0 * diff / n), hp_.learning_rate);
    return diff.squaredNorm() / n;
  };

  LearnReport report;
  report.loss = fit_critic(critic1());
  if (td3) report.loss = 0.5 * (report.loss + fit_critic(critic2()));
  ++critic_updates_;

  const bool update_actor = !td3 || critic_updates_ % static_cast<std::uint64_t>(hp_.policy_delay) == 0;
  if (update_actor) {
    // Deterministic policy gradient: ascend mean Q(s, mu(s)) through the critic.
    const ForwardPass actor_pass = actor().forward_cached(batch.observations);
    const ForwardPass critic_pass = critic1().forward_cached(critic_input(batch.observations, actor_pass.result()));
    report.actor_objective = critic_pass.result().mean();
    const Eigen::MatrixXd dq = Eigen::MatrixXd::Constant(1, batch.size(), -1.0 / n);
    const Gradients critic_grad = critic1().backward(critic_pass, dq);
    const Eigen::MatrixXd action_grad = critic_grad.input.bottomRows(2);
    actor().adam_update(actor().backward(actor_pass, action_grad), hp_.learning_rate);
    ++actor_updates_;
    report.actor_updated = true;

    actor_target().soft_update(actor(), hp_.tau);
    critic1_target().soft_update(critic1(), hp_.tau);
    if (td3) critic2_target().soft_update(critic2(), hp_.tau);
  }
  return report;
}

std::vector<Action> act(Algorithm algorithm, const Network& acting, const Eigen::MatrixXd& observations,
                        double epsilon, double exploration_sigma, Rng& rng) {
  std::vector<Action> out;
  out.reserve(static_cast<std::size_t>(observations.cols()));
  if (is_value_based(algorithm)) {
    for (int index : select_actions_value(acting, observations, epsilon, rng)) out.emplace_back(DiscreteAction{index});
  } else {
    for (const WheelDelta& d : select_actions_policy(acting, observations, exploration_sigma, rng)) out.emplace_back(d);
  }
  return out;
}

std::vector<std::byte> encode_checkpoint(const Checkpoint& c) {
  ByteWriter w;
  w.bytes(kMagic);
  w.u16(kCheckpointFormatVersion);
  w.bytes(kCheckpointTag);
  w.u16(kObservationLayoutVersion);
  w.u8(static_cast<std::uint8_t>(c.agent.algorithm()));
  w.u64(static_cast<std::uint64_t>(c.episode));
  w.u64(c.agent.learn_steps());
  w.u64(c.agent.critic_updates());
  w.u64(c.agent.actor_updates());
  write_hyperparameters(w, c.agent.hyperparameters());
  w.u32(static_cast<std::uint32_t>(c.metrics.size()));
  for (const auto& [key, value] : c.metrics) {
    w.string(key);
    w.f64(value);
  }
  w.u8(static_cast<std::uint8_t>(c.agent.networks().size()));
  for (const auto& net : c.agent.networks()) write_network(w, net);
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::byte> bytes) {
  ByteReader r(bytes);
  auto magic = r.bytes(4);
  if (!std::equal(magic.begin(), magic.end(), kMagic.begin())) throw ProtocolError("checkpoint: bad magic", 0);
  if (r.u16() != kCheckpointFormatVersion) throw ProtocolError("checkpoint: unsupported version", 4);
  auto tag = r.bytes(4);
  if (!std::equal(tag.begin(), tag.end(), kCheckpointTag.begin()))
    throw ProtocolError("checkpoint: not a checkpoint record", 6);
  const std::size_t layout_at = r.offset();
  if (r.u16() != kObservationLayoutVersion) throw ProtocolError("checkpoint: observation layout mismatch", layout_at);
  const std::size_t algo_at = r.offset();
  const std::uint8_t algo = r.u8();
  if (algo > 3) throw ProtocolError("checkpoint: unknown algorithm", algo_at);
  const auto algorithm = static_cast<Algorithm>(algo);
  const auto episode = static_cast<std::int64_t>(r.u64());
  const std::uint64_t learn = r.u64();
  const std::uint64_t critic = r.u64();
  const std::uint64_t actor = r.u64();
  const Hyperparameters hp = read_hyperparameters(r);
  std::map<std::string, double> metrics;
  const std::uint32_t metric_count = r.u32();
  for (std::uint32_t i = 0; i < metric_count; ++i) {
    std::string key = r.string();
    metrics[std::move(key)] = r.f64();
  }
  const std::size_t count_at = r.offset();
  const std::uint8_t count = r.u8();
  if (count != network_count(algorithm)) throw ProtocolError("checkpoint: wrong network count", count_at);

  Hyperparameters init_hp = hp;
  try {
    validate(init_hp);
  } catch (const ConfigError& e) {
    throw ProtocolError(std::string("checkpoint: ") + e.what(), algo_at);
  }
  Agent agent(algorithm, init_hp, 0);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t at = r.offset();
    Network net = read_network(r);
    if (!net.same_topology(agent.networks()[k])) throw ProtocolError("checkpoint: network topology mismatch", at);
    agent.networks()[k] = std::move(net);
  }
  if (!r.done()) throw ProtocolError("checkpoint: trailing bytes", r.offset());
  CheckpointAccess::restore_counters(agent, learn, critic, actor);
  return Checkpoint{std::move(agent), episode, std::move(metrics)};
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  const auto bytes = encode_checkpoint(checkpoint);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const std::byte*>(raw.data());
  return decode_checkpoint(std::span<const std::byte>(p, raw.size()));
}

}  // namespace aggrl
