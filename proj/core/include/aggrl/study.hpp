#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "aggrl/config.hpp"
#include "aggrl/trainer.hpp"

namespace aggrl {

enum class StudyKind { scalability, resilience, cyl_obstacles, gate };

std::string_view to_string(StudyKind kind);
/// Accepts scalability | resilience | cyl-obstacles | gate; ConfigError otherwise.
StudyKind parse_study_kind(std::string_view name);

/// One evaluated (model, test condition) cell.
struct StudyRow {
  Algorithm algorithm = Algorithm::td3;
  std::string variant;  // model directory suffix, e.g. "r4" or "r8-f50"
  int train_robots = 0;
  double train_failure = 0.0;
  int train_obstacles = 0;
  bool train_curriculum = false;
  int test_robots = 0;
  double test_failure = 0.0;
  int test_obstacles = 0;
  double gate_opening = 0.0;  // 0 when no gate
  int trials = 0;
  int successes = 0;
  double success_rate = 0.0;
  double mean_episode_length = 0.0;
  double mean_cumulative_reward = 0.0;
};

/// A model to train (or reuse) plus the conditions it is tested on.
struct StudyModel {
  std::string variant;
  RunConfig train;
  std::vector<ScenarioConfig> tests;
};

struct StudyOptions {
  std::filesystem::path out_dir;
  std::vector<Algorithm> algorithms{Algorithm::dqn, Algorithm::ddqn, Algorithm::ddpg, Algorithm::td3};
  bool train_missing = false;  // train models whose run directory has no checkpoints
  int trials = 100;
  std::ostream* log = nullptr;
};

/// Model grid of a study, derived from `base` (its training section, seed
/// and hyperparameters are kept).
std::vector<StudyModel> study_models(StudyKind kind, const RunConfig& base);

/// Trains (when allowed) and evaluates every model of the study. Models live
/// in out_dir/models/<algorithm>-<variant>/; results go to
/// out_dir/studies/<kind>.csv and trajectory plots to out_dir/plots/.
/// Throws UsageError when a model is missing and train_missing is false.
std::vector<StudyRow> run_study(StudyKind kind, const RunConfig& base, const StudyOptions& options);

void write_study_csv(std::ostream& out, const std::vector<StudyRow>& rows);
std::string study_csv_header();

}  // namespace aggrl
