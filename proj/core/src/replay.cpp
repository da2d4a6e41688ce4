#include "aggrl/replay.hpp"

#include "aggrl/errors.hpp"

namespace aggrl {

Batch make_batch(const std::vector<const Experience*>& experiences) {
  const auto n = static_cast<Eigen::Index>(experiences.size());
  Batch b;
  b.observations.resize(kObservationSize, n);
  b.next_observations.resize(kObservationSize, n);
  b.action_indices.assign(experiences.size(), -1);
  b.action_deltas = Eigen::MatrixXd::Zero(2, n);
  b.rewards.resize(n);
  b.terminal.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Experience& e = *experiences[static_cast<std::size_t>(j)];
    b.observations.col(j) = Eigen::Map<const Eigen::VectorXd>(e.observation.data(), kObservationSize);
    b.next_observations.col(j) = Eigen::Map<const Eigen::VectorXd>(e.next_observation.data(), kObservationSize);
    if (const auto* d = std::get_if<DiscreteAction>(&e.action)) {
      b.action_indices[static_cast<std::size_t>(j)] = d->index;
      const WheelDelta w = decode_discrete_action(d->index);
      b.action_deltas(0, j) = w.left;
      b.action_deltas(1, j) = w.right;
    } else {
      const auto& w = std::get<WheelDelta>(e.action);
      b.action_deltas(0, j) = w.left;
      b.action_deltas(1, j) = w.right;
    }
    b.rewards(j) = e.reward;
    b.terminal(j) = e.terminal ? 1.0 : 0.0;
  }
  return b;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("ReplayBuffer: capacity must be positive");
}

void ReplayBuffer::push(Experience e) {
  ++inserted_;
  if (storage_.size() < capacity_) {
    storage_.push_back(std::move(e));
    return;
  }
  storage_[cursor_] = std::move(e);
  cursor_ = (cursor_ + 1) % capacity_;
}

const Experience& ReplayBuffer::at(std::size_t i) const {
  if (i >= storage_.size()) throw UsageError("ReplayBuffer::at: index out of range");
  return storage_[(cursor_ + i) % storage_.size()];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(int batch_size, Rng& rng) const {
  std::vector<std::size_t> idx;
  if (!ready(batch_size)) return idx;
  std::uniform_int_distribution<std::size_t> pick(0, storage_.size() - 1);
  idx.reserve(static_cast<std::size_t>(batch_size));
  for (int i = 0; i < batch_size; ++i) idx.push_back(pick(rng));
  return idx;
}

std::optional<Batch> ReplayBuffer::sample_batch(int batch_size, Rng& rng) const {
  if (!ready(batch_size)) return std::nullopt;
  std::vector<const Experience*> picked;
  picked.reserve(static_cast<std::size_t>(batch_size));
  for (std::size_t i : sample_indices(batch_size, rng)) picked.push_back(&storage_[i]);
  return make_batch(picked);
}

}  // namespace aggrl
