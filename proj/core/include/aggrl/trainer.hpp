#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "aggrl/agent.hpp"
#include "aggrl/config.hpp"
#include "aggrl/policy.hpp"

namespace aggrl {

struct EpisodeSummary {
  int episode = 0;
  std::int64_t ticks = 0;
  Terminal outcome = Terminal::running;
  double mean_cumulative_reward = 0.0;
  double epsilon = 0.0;
  double mean_loss = 0.0;
  std::uint64_t learn_steps = 0;
  std::size_t experiences = 0;
  double gate_opening = 0.0;
  int failures = 0;
};

struct TrainResult {
  std::filesystem::path run_dir;
  std::vector<EpisodeSummary> episodes;
  std::size_t experiences_inserted = 0;
  int checkpoints_written = 0;  // including final.ckpt
};

/// One metrics.log record (a single JSON object, no trailing newline).
std::string metrics_json(const EpisodeSummary& summary);

using ProgressCallback = std::function<void(const EpisodeSummary&)>;

/// Run directory layout:
///   config.snapshot          resolved configuration
///   metrics.log              one JSON line per episode (see docs/formats.md)
///   checkpoints/ep{N}.ckpt   every checkpoint_interval episodes, N = episodes done
///   checkpoints/final.ckpt
/// Deterministic for a given config when run.workers == 1.
TrainResult train(const RunConfig& config, const std::filesystem::path& run_dir, const ProgressCallback& progress = {});

/// Scenario used for a given training episode (curriculum applied).
ScenarioConfig training_scenario(const RunConfig& config, int episode_index);

/// Generates a scenario from a seed, advancing to derived seeds when
/// placement fails.
EpisodeState generate_with_retry(const ScenarioConfig& scenario, std::uint64_t seed, int max_attempts = 16);

struct TrialResult {
  std::uint64_t seed = 0;
  Terminal outcome = Terminal::running;
  std::int64_t ticks = 0;
  double mean_cumulative_reward = 0.0;
};

struct EvaluationReport {
  int trials = 0;
  int successes = 0;
  // Not applicable (empty) when trials == 0.
  std::optional<double> success_rate;
  std::optional<double> mean_episode_length;
  std::optional<double> mean_cumulative_reward;
  std::vector<TrialResult> per_trial;
};

struct EvaluationOptions {
  int trials = 100;
  std::uint64_t seed = 0;
  /// When set, writes trial_{k}.jsonl trajectory logs for the first
  /// `trajectory_limit` trials into this directory.
  std::optional<std::filesystem::path> trajectory_dir;
  int trajectory_limit = 1 << 30;
};

/// Runs independent scenarios with exploration disabled. Trial k uses the
/// scenario seed mix_seed(options.seed, k).
EvaluationReport evaluate(Policy& policy, const ScenarioConfig& scenario, const EvaluationOptions& options);

/// Convenience overload for a trained model; throws ConfigError on a
/// topology mismatch.
EvaluationReport evaluate(Algorithm algorithm, const Network& acting, const ScenarioConfig& scenario,
                          const EvaluationOptions& options);

/// Runs a single episode with `policy`, optionally logging it.
TrialResult run_episode(Policy& policy, EpisodeState& episode, std::ostream* trajectory = nullptr);

struct CheckpointScore {
  std::filesystem::path path;
  std::int64_t episode = 0;
  double success_rate = 0.0;
  double mean_reward = 0.0;
};

/// Highest success rate; ties broken by higher mean reward, then later episode.
const CheckpointScore& pick_best(const std::vector<CheckpointScore>& scores);

/// Scores every checkpoints/ep*.ckpt of a run on `validation_episodes` fresh
/// scenarios (the run's scenario, final gate opening) and returns the best.
/// Throws UsageError when the run has no checkpoints.
CheckpointScore select_best_checkpoint(const std::filesystem::path& run_dir, int validation_episodes);

std::vector<std::filesystem::path> list_checkpoints(const std::filesystem::path& run_dir);

/// Seed streams derived from the master seed.
namespace seed_stream {
inline constexpr std::uint64_t kAgentInit = 1;
inline constexpr std::uint64_t kLearner = 2;
inline constexpr std::uint64_t kActing = 3;
inline constexpr std::uint64_t kValidation = 4;
inline constexpr std::uint64_t kEvaluation = 5;
inline constexpr std::uint64_t kScenarioBase = 1'000'000;
}  // namespace seed_stream

}  // namespace aggrl
