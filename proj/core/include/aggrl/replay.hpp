#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "aggrl/experience.hpp"
#include "aggrl/rng.hpp"

namespace aggrl {

/// Column-major mini-batch assembled from sampled experiences.
struct Batch {
  Eigen::MatrixXd observations;       // 31 x B
  Eigen::MatrixXd next_observations;  // 31 x B
  std::vector<int> action_indices;    // discrete actions, -1 for continuous
  Eigen::MatrixXd action_deltas;      // 2 x B, wheel deltas in cm/s
  Eigen::VectorXd rewards;            // B
  Eigen::VectorXd terminal;           // B, 1.0 when terminal

  int size() const { return static_cast<int>(rewards.size()); }
};

Batch make_batch(const std::vector<const Experience*>& experiences);

/// Fixed-capacity ring of experiences; inserting into a full buffer evicts
/// the oldest entry.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 1'000'000);

  void push(Experience e);

  std::size_t size() const { return storage_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool ready(int batch_size) const { return batch_size > 0 && size() >= static_cast<std::size_t>(batch_size); }

  /// i-th oldest stored experience.
  const Experience& at(std::size_t i) const;

  /// Uniform sampling with replacement; nullopt while fewer than
  /// `batch_size` experiences are stored.
  std::optional<Batch> sample_batch(int batch_size, Rng& rng) const;

  /// Slot indices (storage order) that a sample would draw; exposed so
  /// uniformity can be tested without materializing batches.
  std::vector<std::size_t> sample_indices(int batch_size, Rng& rng) const;

  /// Total insertions ever made.
  std::size_t inserted() const { return inserted_; }

 private:
  std::size_t capacity_;
  std::vector<Experience> storage_;
  std::size_t cursor_ = 0;  // next slot to overwrite once full
  std::size_t inserted_ = 0;
};

}  // namespace aggrl
