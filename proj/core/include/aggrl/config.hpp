#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "aggrl/algos.hpp"
#include "aggrl/env.hpp"

namespace aggrl {

struct TrainingConfig {
  Algorithm algorithm = Algorithm::td3;
  std::uint64_t seed = 1;
  int episodes = 1000;
  int checkpoint_interval = 10;
  int validation_episodes = 20;
  int evaluation_trials = 100;
  int workers = 1;
  int snapshot_refresh_ticks = 0;  // 0: refresh the rollout snapshot once per episode
  bool curriculum = true;          // shrink the gate during training (gate scenarios only)
  int curriculum_completion = 500;

  bool operator==(const TrainingConfig&) const = default;
};

/// Everything a run needs; serialized as the run's config.snapshot.
struct RunConfig {
  TrainingConfig run;
  ScenarioConfig scenario;
  Hyperparameters hyper;

  bool operator==(const RunConfig&) const = default;
};

/// Throws ConfigError naming the offending "section.key".
void validate(const RunConfig& config);

/// Parses the sectioned key=value format documented in docs/config.md.
/// Unknown sections or keys and ill-typed values are ConfigErrors; missing
/// keys keep their defaults. The result is validated.
RunConfig parse_run_config(std::istream& in);
RunConfig load_run_config(const std::filesystem::path& path);

/// Writes every field; parse_run_config(write_run_config(c)) == c.
void write_run_config(std::ostream& out, const RunConfig& config);
std::string to_config_text(const RunConfig& config);

}  // namespace aggrl
