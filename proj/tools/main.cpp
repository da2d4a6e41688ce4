#include <csignal>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "aggrl/agent.hpp"
#include "aggrl/config.hpp"
#include "aggrl/errors.hpp"
#include "aggrl/session.hpp"
#include "aggrl/study.hpp"
#include "aggrl/svg.hpp"
#include "aggrl/trainer.hpp"
#include "aggrl/trajectory.hpp"

namespace fs = std::filesystem;
using namespace aggrl;

namespace {

volatile std::sig_atomic_t g_interrupted = 0;

RunConfig load_or_default(const std::string& path) {
  return path.empty() ? RunConfig{} : load_run_config(path);
}

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

struct TrainArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string algo;
  std::string out;
  std::optional<int> episodes;
  bool quiet = false;
};

int run_train(const TrainArgs& a) {
  RunConfig config = load_run_config(a.config);
  if (a.seed) config.run.seed = *a.seed;
  if (!a.algo.empty()) config.run.algorithm = parse_algorithm(a.algo);
  if (a.episodes) config.run.episodes = *a.episodes;
  validate(config);
  const fs::path out = a.out.empty() ? fs::path("runs") / (std::string(to_string(config.run.algorithm)) + "-seed" +
                                                           std::to_string(config.run.seed))
                                     : fs::path(a.out);
  const TrainResult result = train(config, out, [&](const EpisodeSummary& s) {
    if (!a.quiet) std::cerr << metrics_json(s) << '\n';
  });
  std::cerr << "wrote " << result.checkpoints_written << " checkpoints to " << (out / "checkpoints").string() << '\n';
  std::cout << out.string() << '\n';
  return 0;
}

struct EvaluateArgs {
  std::string checkpoint;
  std::string config;
  std::optional<int> robots;
  int trials = 100;
  std::optional<double> failures;
  std::optional<int> obstacles;
  bool gate = false;
  std::optional<double> gate_opening;
  std::optional<std::uint64_t> seed;
  std::string trajectories;
};

int run_evaluate(const EvaluateArgs& a) {
  RunConfig config = load_or_default(a.config);
  ScenarioConfig scenario = config.scenario;
  if (a.robots) scenario.robot_count = *a.robots;
  if (a.failures) scenario.max_failure_fraction = *a.failures;
  if (a.obstacles) scenario.cylinder_obstacle_count = *a.obstacles;
  if (a.gate) scenario.gate_enabled = true;
  if (a.gate_opening) scenario.gate_opening = *a.gate_opening;
  if (a.gate && !a.gate_opening) scenario.gate_opening = minimum_gate_opening(scenario);
  validate(scenario);
  if (a.trials < 0) throw ConfigError("--trials must be >= 0");

  EvaluationOptions options;
  options.trials = a.trials;
  options.seed = a.seed ? *a.seed : mix_seed(config.run.seed, seed_stream::kEvaluation);
  if (!a.trajectories.empty()) options.trajectory_dir = a.trajectories;

  EvaluationReport report;
  if (a.trials > 0) {
    const Checkpoint c = load_checkpoint(a.checkpoint);
    report = evaluate(c.agent.algorithm(), c.agent.acting_network(), scenario, options);
  }
  nlohmann::ordered_json j{{"checkpoint", a.checkpoint},
                           {"robots", scenario.robot_count},
                           {"trials", report.trials},
                           {"successes", report.successes},
                           {"success_rate", optional_json(report.success_rate)},
                           {"mean_episode_length", optional_json(report.mean_episode_length)},
                           {"mean_cumulative_reward", optional_json(report.mean_cumulative_reward)}};
  std::cout << j.dump(2) << '\n';
  return 0;
}

struct StudyArgs {
  std::string kind;
  std::string config;
  std::string out = "out";
  bool train = false;
  int trials = 100;
  std::vector<std::string> algos;
};

int run_study_command(const StudyArgs& a) {
  const StudyKind kind = parse_study_kind(a.kind);
  const RunConfig config = load_or_default(a.config);
  StudyOptions options;
  options.out_dir = a.out;
  options.train_missing = a.train;
  options.trials = a.trials;
  options.log = &std::cerr;
  if (!a.algos.empty()) {
    options.algorithms.clear();
    for (const auto& name : a.algos) options.algorithms.push_back(parse_algorithm(name));
  }
  const auto rows = run_study(kind, config, options);
  write_study_csv(std::cout, rows);
  return 0;
}

struct WorkerArgs {
  std::string endpoint;
  std::string config;
  int episodes = 1;
  std::optional<std::uint64_t> seed;
  std::string id = "worker";
  int retries = 5;
};

int run_worker_command(const WorkerArgs& a) {
  const RunConfig config = load_or_default(a.config);
  wire::WorkerOptions options;
  options.episodes = a.episodes;
  options.seed = a.seed ? *a.seed : config.run.seed;
  options.worker_id = a.id;
  options.max_retries = a.retries;
  const auto report = wire::run_worker(wire::parse_endpoint(a.endpoint), config.scenario, options);
  std::cerr << a.id << ": " << report.episodes_completed << " episodes, " << report.experiences_sent
            << " experiences, " << report.reconnects << " reconnects\n";
  return 0;
}

struct ServeArgs {
  std::string config;
  std::string listen = "127.0.0.1:7878";
  std::string out = "runs/serve";
  std::optional<int> episodes;
};

int run_serve(const ServeArgs& a) {
  RunConfig config = load_run_config(a.config);
  if (a.episodes) config.run.episodes = *a.episodes;
  validate(config);
  const fs::path out(a.out);
  fs::create_directories(out / "checkpoints");
  {
    std::ofstream snapshot(out / "config.snapshot", std::ios::trunc);
    write_run_config(snapshot, config);
  }
  std::ofstream metrics(out / "metrics.log", std::ios::trunc);
  if (!metrics) throw std::runtime_error("cannot write " + (out / "metrics.log").string());

  Agent agent(config.run.algorithm, config.hyper, mix_seed(config.run.seed, seed_stream::kAgentInit));
  ReplayBuffer buffer(config.hyper.replay_capacity);
  wire::LearnerOptions options;
  options.endpoint = wire::parse_endpoint(a.listen);
  options.seed = mix_seed(config.run.seed, seed_stream::kActing);
  wire::LearnerServer server(agent, buffer, options);
  int finished = 0;
  server.on_episode([&](const EpisodeSummary& s) {
    metrics << metrics_json(s) << '\n';
    metrics.flush();
    if (++finished % config.run.checkpoint_interval == 0)
      save_checkpoint(out / "checkpoints" / ("ep" + std::to_string(finished) + ".ckpt"), {agent, finished, {}});
  });
  server.start();
  std::cerr << "learner listening on " << options.endpoint.host << ':' << server.port() << '\n';
  std::signal(SIGINT, [](int) { g_interrupted = 1; });
  std::signal(SIGTERM, [](int) { g_interrupted = 1; });
  while (!g_interrupted && !server.wait_for_episodes(config.run.episodes, std::chrono::milliseconds(200))) {
  }
  server.stop();
  save_checkpoint(out / "checkpoints" / "final.ckpt", {agent, finished, {}});
  const auto stats = server.stats();
  std::cerr << "sessions: " << stats.sessions_accepted << " accepted, " << stats.sessions_refused << " refused, "
            << stats.sessions_dropped << " dropped; experiences inserted: " << stats.experiences_inserted << '\n';
  return 0;
}

int run_replay(const std::string& log_path, const std::string& out_path) {
  std::ifstream in(log_path);
  if (!in) throw ConfigError("cannot open trajectory log " + log_path);
  const TrajectoryLog log = read_trajectory(in);
  std::ofstream out(out_path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + out_path);
  out << render_trajectory_svg(log);
  return 0;
}

int run_best(const std::string& run_dir, std::optional<int> validation) {
  const RunConfig config = load_run_config(fs::path(run_dir) / "config.snapshot");
  const CheckpointScore best =
      select_best_checkpoint(run_dir, validation ? *validation : config.run.validation_episodes);
  nlohmann::ordered_json j{{"checkpoint", best.path.string()},
                           {"episode", best.episode},
                           {"success_rate", best.success_rate},
                           {"mean_reward", best.mean_reward}};
  std::cout << j.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-robot collective transport: simulation, training and evaluation"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write a run directory");
  train_cmd->add_option("--config", train_args.config, "Run configuration file")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--seed", train_args.seed, "Override the master seed");
  train_cmd->add_option("--algo", train_args.algo, "Override the algorithm")
      ->check(CLI::IsMember({"dqn", "ddqn", "ddpg", "td3"}));
  train_cmd->add_option("--out", train_args.out, "Run directory (default runs/<algo>-seed<N>)");
  train_cmd->add_option("--episodes", train_args.episodes, "Override the episode count");
  train_cmd->add_flag("--quiet", train_args.quiet, "Do not print per-episode metrics");

  EvaluateArgs eval_args;
  auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate a checkpoint without exploration");
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--config", eval_args.config, "Scenario configuration (defaults otherwise)");
  eval_cmd->add_option("--robots", eval_args.robots, "Robot count");
  eval_cmd->add_option("--trials", eval_args.trials, "Number of trials")->capture_default_str();
  eval_cmd->add_option("--failures", eval_args.failures, "Maximum failure fraction");
  eval_cmd->add_option("--obstacles", eval_args.obstacles, "Cylinder obstacle count");
  eval_cmd->add_flag("--gate", eval_args.gate, "Add the gate wall (minimum opening unless --gate-opening)");
  eval_cmd->add_option("--gate-opening", eval_args.gate_opening, "Gate opening in metres");
  eval_cmd->add_option("--seed", eval_args.seed, "Evaluation seed");
  eval_cmd->add_option("--trajectories", eval_args.trajectories, "Directory for per-trial trajectory logs");

  StudyArgs study_args;
  auto* study_cmd = app.add_subcommand("study", "Run an evaluation campaign");
  study_cmd->add_option("--kind", study_args.kind, "Study kind")
      ->required()
      ->check(CLI::IsMember({"scalability", "resilience", "cyl-obstacles", "gate"}));
  study_cmd->add_option("--config", study_args.config, "Base run configuration");
  study_cmd->add_option("--out", study_args.out, "Output directory")->capture_default_str();
  study_cmd->add_flag("--train", study_args.train, "Train models that have no checkpoints yet");
  study_cmd->add_option("--trials", study_args.trials, "Evaluation trials per cell")->capture_default_str();
  study_cmd->add_option("--algo", study_args.algos, "Restrict to these algorithms (repeatable)")
      ->check(CLI::IsMember({"dqn", "ddqn", "ddpg", "td3"}));

  WorkerArgs worker_args;
  auto* worker_cmd = app.add_subcommand("worker", "Run rollouts against a learner");
  worker_cmd->add_option("--endpoint", worker_args.endpoint, "Learner host:port")->required();
  worker_cmd->add_option("--config", worker_args.config, "Scenario configuration");
  worker_cmd->add_option("--episodes", worker_args.episodes, "Episodes to run")->capture_default_str();
  worker_cmd->add_option("--seed", worker_args.seed, "Scenario seed");
  worker_cmd->add_option("--id", worker_args.id, "Worker name sent in HELLO");
  worker_cmd->add_option("--retries", worker_args.retries, "Reconnect attempts")->capture_default_str();

  ServeArgs serve_args;
  auto* serve_cmd = app.add_subcommand("serve", "Run a learner that accepts worker sessions");
  serve_cmd->add_option("--config", serve_args.config, "Run configuration file")->required()->check(CLI::ExistingFile);
  serve_cmd->add_option("--listen", serve_args.listen, "host:port to listen on")->capture_default_str();
  serve_cmd->add_option("--out", serve_args.out, "Run directory")->capture_default_str();
  serve_cmd->add_option("--episodes", serve_args.episodes, "Stop after this many worker episodes");

  std::string replay_log, replay_out;
  auto* replay_cmd = app.add_subcommand("replay", "Render a trajectory log to SVG");
  replay_cmd->add_option("--log", replay_log, "Trajectory log (JSON lines)")->required();
  replay_cmd->add_option("--out", replay_out, "SVG output path")->required();

  std::string validate_path;
  auto* validate_cmd = app.add_subcommand("validate-config", "Check a run configuration file");
  validate_cmd->add_option("config,--config", validate_path, "Run configuration file")->required();

  std::string best_run;
  std::optional<int> best_validation;
  auto* best_cmd = app.add_subcommand("best", "Select the best checkpoint of a run");
  best_cmd->add_option("--run", best_run, "Run directory")->required();
  best_cmd->add_option("--validation-episodes", best_validation, "Scenarios per checkpoint");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*train_cmd) return run_train(train_args);
    if (*eval_cmd) return run_evaluate(eval_args);
    if (*study_cmd) return run_study_command(study_args);
    if (*worker_cmd) return run_worker_command(worker_args);
    if (*serve_cmd) return run_serve(serve_args);
    if (*replay_cmd) return run_replay(replay_log, replay_out);
    if (*best_cmd) return run_best(best_run, best_validation);
    if (*validate_cmd) {
      load_run_config(validate_path);
      std::cout << validate_path << ": ok\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
