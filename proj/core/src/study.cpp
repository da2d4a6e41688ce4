#include "aggrl/study.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "aggrl/errors.hpp"
#include "aggrl/svg.hpp"

namespace aggrl {
namespace fs = std::filesystem;

namespace {

ScenarioConfig with(ScenarioConfig s, int robots, double failure, int obstacles) {
  s.robot_count = robots;
  s.max_failure_fraction = failure;
  s.cylinder_obstacle_count = obstacles;
  return s;
}

std::string percent(double fraction) { return std::to_string(static_cast<int>(fraction * 100.0 + 0.5)); }

std::string condition_label(const ScenarioConfig& s) {
  std::string label = "r" + std::to_string(s.robot_count);
  if (s.max_failure_fraction > 0.0) label += "-f" + percent(s.max_failure_fraction);
  if (s.cylinder_obstacle_count > 0) label += "-o" + std::to_string(s.cylinder_obstacle_count);
  if (s.gate_enabled) label += "-gate";
  return label;
}

const char* kPalette[] = {"#1f4fd1", "#d1541f", "#8a1fd1", "#1f9e4a"};

Network best_model(const fs::path& dir, const StudyModel& model, const StudyOptions& options) {
  if (list_checkpoints(dir).empty()) {
    if (!options.train_missing)
      throw UsageError("missing checkpoints in " + dir.string() + " (run the study with --train to create them)");
    if (options.log) *options.log << "training " << dir.filename().string() << '\n';
    train(model.train, dir, [&](const EpisodeSummary& s) {
      if (options.log && (s.episode + 1) % 10 == 0)
        *options.log << "  episode " << s.episode + 1 << ' ' << to_string(s.outcome) << " ticks=" << s.ticks << '\n';
    });
  }
  const CheckpointScore best = select_best_checkpoint(dir, model.train.run.validation_episodes);
  if (options.log) *options.log << "  best checkpoint " << best.path.filename().string() << '\n';
  return load_checkpoint(best.path).agent.acting_network();
}

std::vector<Vec2> payload_path(const TrajectoryLog& log) {
  std::vector<Vec2> points;
  points.reserve(log.ticks.size());
  for (const auto& t : log.ticks) points.push_back(t.payload.position);
  return points;
}

}  // namespace

std::string_view to_string(StudyKind kind) {
  switch (kind) {
    case StudyKind::scalability: return "scalability";
    case StudyKind::resilience: return "resilience";
    case StudyKind::cyl_obstacles: return "cyl-obstacles";
    case StudyKind::gate: return "gate";
  }
  return "unknown";
}

StudyKind parse_study_kind(std::string_view name) {
  for (auto k : {StudyKind::scalability, StudyKind::resilience, StudyKind::cyl_obstacles, StudyKind::gate})
    if (to_string(k) == name) return k;
  throw ConfigError("unknown study '" + std::string(name) + "' (expected scalability|resilience|cyl-obstacles|gate)");
}

std::vector<StudyModel> study_models(StudyKind kind, const RunConfig& base) {
  std::vector<StudyModel> models;
  ScenarioConfig open = base.scenario;
  open.gate_enabled = false;
  switch (kind) {
    case StudyKind::scalability:
      for (int train_robots : {4, 8}) {
        StudyModel m{"r" + std::to_string(train_robots), base, {}};
        m.train.scenario = with(open, train_robots, 0.0, 0);
        for (int test : {2, 4, 6, 8, 10}) m.tests.push_back(with(open, test, 0.0, 0));
        models.push_back(m);
      }
      break;
    case StudyKind::resilience:
      for (int robots : {4, 8})
        for (double train_fail : {0.0, 0.5}) {
          StudyModel m{"r" + std::to_string(robots) + "-f" + percent(train_fail), base, {}};
          m.train.scenario = with(open, robots, train_fail, 0);
          for (double test_fail : {0.0, 0.25, 0.5, 0.75}) m.tests.push_back(with(open, robots, test_fail, 0));
          models.push_back(m);
        }
      break;
    case StudyKind::cyl_obstacles:
      for (int train_obstacles : {0, 2}) {
        StudyModel m{"o" + std::to_string(train_obstacles), base, {}};
        m.train.scenario = with(open, open.robot_count, 0.0, train_obstacles);
        for (int test : {2, 4}) m.tests.push_back(with(open, open.robot_count, 0.0, test));
        models.push_back(m);
      }
      break;
    case StudyKind::gate:
      for (bool curriculum : {true, false}) {
        StudyModel m{curriculum ? "gate-curriculum" : "gate-fixed", base, {}};
        ScenarioConfig gate = with(base.scenario, base.scenario.robot_count, 0.0, 0);
        gate.gate_enabled = true;
        gate.gate_opening = minimum_gate_opening(gate);
        m.train.scenario = gate;
        m.train.run.curriculum = curriculum;
        m.tests.push_back(gate);
        models.push_back(m);
      }
      break;
  }
  return models;
}

std::vector<StudyRow> run_study(StudyKind kind, const RunConfig& base, const StudyOptions& options) {
  if (options.trials < 0) throw ConfigError("study: trials must be >= 0");
  if (options.out_dir.empty()) throw ConfigError("study: output directory required");
  const auto models = study_models(kind, base);
  const std::string kind_name(to_string(kind));
  fs::create_directories(options.out_dir / "studies");
  fs::create_directories(options.out_dir / "plots");

  std::vector<StudyRow> rows;
  // plot key -> scenario layout of trial 0 and one payload path per algorithm
  std::map<std::string, std::pair<TrajectoryLog, std::vector<PlotPath>>> plots;
  for (std::size_t a = 0; a < options.algorithms.size(); ++a) {
    const Algorithm algorithm = options.algorithms[a];
    for (const auto& model : models) {
      StudyModel m = model;
      m.train.run.algorithm = algorithm;
      validate(m.train);
      const fs::path dir = options.out_dir / "models" / (std::string(to_string(algorithm)) + "-" + m.variant);
      const Network net = best_model(dir, m, options);
      for (const auto& test : m.tests) {
        EvaluationOptions eval;
        eval.trials = options.trials;
        eval.seed = mix_seed(base.run.seed, seed_stream::kEvaluation);
        const EvaluationReport r = evaluate(algorithm, net, test, eval);
        StudyRow row;
        row.algorithm = algorithm;
        row.variant = m.variant;
        row.train_robots = m.train.scenario.robot_count;
        row.train_failure = m.train.scenario.max_failure_fraction;
        row.train_obstacles = m.train.scenario.cylinder_obstacle_count;
        row.train_curriculum = m.train.scenario.gate_enabled && m.train.run.curriculum;
        row.test_robots = test.robot_count;
        row.test_failure = test.max_failure_fraction;
        row.test_obstacles = test.cylinder_obstacle_count;
        row.gate_opening = test.gate_enabled ? test.gate_opening : 0.0;
        row.trials = r.trials;
        row.successes = r.successes;
        row.success_rate = r.success_rate.value_or(0.0);
        row.mean_episode_length = r.mean_episode_length.value_or(0.0);
        row.mean_cumulative_reward = r.mean_cumulative_reward.value_or(0.0);
        rows.push_back(row);
        if (options.log)
          *options.log << kind_name << ' ' << to_string(algorithm) << '-' << m.variant << " on "
                       << condition_label(test) << ": " << r.successes << '/' << r.trials << '\n';

        EpisodeState episode = generate_with_retry(test, mix_seed(eval.seed, 0));
        ModelPolicy policy(algorithm, net);
        std::stringstream log;
        run_episode(policy, episode, &log);
        const TrajectoryLog trajectory = read_trajectory(log);
        auto& plot = plots[m.variant + "_" + condition_label(test)];
        if (plot.second.empty()) plot.first = trajectory;
        plot.second.push_back({payload_path(trajectory), kPalette[a % 4], std::string(to_string(algorithm))});
      }
    }
  }

  std::ofstream csv(options.out_dir / "studies" / (kind_name + ".csv"), std::ios::trunc);
  if (!csv) throw std::runtime_error("cannot write study results in " + options.out_dir.string());
  write_study_csv(csv, rows);
  for (const auto& [key, plot] : plots) {
    std::ofstream svg(options.out_dir / "plots" / (kind_name + "_" + key + ".svg"), std::ios::trunc);
    svg << render_svg(plot.first, plot.second);
  }
  return rows;
}

std::string study_csv_header() {
  return "algorithm,variant,train_robots,train_failure,train_obstacles,train_curriculum,test_robots,test_failure,"
         "test_obstacles,gate_opening,trials,successes,success_rate,mean_episode_length,mean_cumulative_reward";
}

void write_study_csv(std::ostream& out, const std::vector<StudyRow>& rows) {
  out << study_csv_header() << '\n';
  char buf[64];
  auto real = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return std::string(buf);
  };
  for (const auto& r : rows)
    out << to_string(r.algorithm) << ',' << r.variant << ',' << r.train_robots << ',' << real(r.train_failure) << ','
        << r.train_obstacles << ',' << (r.train_curriculum ? 1 : 0) << ',' << r.test_robots << ','
        << real(r.test_failure) << ',' << r.test_obstacles << ',' << real(r.gate_opening) << ',' << r.trials << ','
        << r.successes << ',' << real(r.success_rate) << ',' << real(r.mean_episode_length) << ','
        << real(r.mean_cumulative_reward) << '\n';
}

}  // namespace aggrl
