#include "aggrl/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <memory>
#include <mutex>
#include <regex>
#include <thread>

#include <nlohmann/json.hpp>

#include "aggrl/errors.hpp"
#include "aggrl/queue.hpp"
#include "aggrl/trajectory.hpp"

namespace aggrl {
namespace fs = std::filesystem;

namespace {

using json = nlohmann::ordered_json;

}  // namespace

std::string metrics_json(const EpisodeSummary& s) {
  json j{{"episode", s.episode},
         {"ticks", s.ticks},
         {"outcome", to_string(s.outcome)},
         {"mean_reward", s.mean_cumulative_reward},
         {"epsilon", s.epsilon},
         {"mean_loss", s.mean_loss},
         {"learn_steps", s.learn_steps},
         {"experiences", s.experiences},
         {"gate_opening", s.gate_opening},
         {"failures", s.failures}};
  return j.dump();
}

namespace {

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double sum = 0.0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

std::vector<Observation> gather_observations(const EpisodeState& ep, const std::vector<int>& robots) {
  std::vector<Observation> out;
  out.reserve(robots.size());
  for (int i : robots) out.push_back(ep.observations[static_cast<std::size_t>(i)]);
  return out;
}

class RunWriter {
 public:
  RunWriter(const RunConfig& config, const fs::path& run_dir) : dir_(run_dir) {
    std::error_code ec;
    fs::create_directories(dir_ / "checkpoints", ec);
    if (ec) throw std::runtime_error("cannot create run directory " + dir_.string() + ": " + ec.message());
    std::ofstream snapshot(dir_ / "config.snapshot", std::ios::trunc);
    if (!snapshot) throw std::runtime_error("cannot write " + (dir_ / "config.snapshot").string());
    write_run_config(snapshot, config);
    metrics_.open(dir_ / "metrics.log", std::ios::trunc);
    if (!metrics_) throw std::runtime_error("cannot write " + (dir_ / "metrics.log").string());
  }

  void episode(const EpisodeSummary& s) {
    metrics_ << metrics_json(s) << '\n';
    metrics_.flush();
  }

  void checkpoint(const Agent& agent, const EpisodeSummary& s, const std::string& name) {
    Checkpoint c{agent, s.episode + 1,
                 {{"epsilon", s.epsilon},
                  {"mean_reward", s.mean_cumulative_reward},
                  {"mean_loss", s.mean_loss},
                  {"ticks", static_cast<double>(s.ticks)},
                  {"success", s.outcome == Terminal::success ? 1.0 : 0.0}}};
    save_checkpoint(dir_ / "checkpoints" / name, c);
    ++written_;
  }

  int written() const { return written_; }

 private:
  fs::path dir_;
  std::ofstream metrics_;
  int written_ = 0;
};

TrainResult train_single(const RunConfig& config, RunWriter& writer, const ProgressCallback& progress) {
  const auto& hp = config.hyper;
  const std::uint64_t seed = config.run.seed;
  Agent agent(config.run.algorithm, hp, mix_seed(seed, seed_stream::kAgentInit));
  ReplayBuffer buffer(hp.replay_capacity);
  Rng learn_rng(mix_seed(seed, seed_stream::kLearner));
  Rng act_rng(mix_seed(seed, seed_stream::kActing));

  TrainResult result;
  EpisodeSummary last;
  for (int ep = 0; ep < config.run.episodes; ++ep) {
    const ScenarioConfig scenario = training_scenario(config, ep);
    EpisodeState state = generate_with_retry(scenario, mix_seed(seed, seed_stream::kScenarioBase + ep));
    Network snapshot = agent.acting_network();
    std::vector<double> losses;
    std::size_t experiences = 0;
    while (state.terminal == Terminal::running) {
      if (config.run.snapshot_refresh_ticks > 0 && state.world.tick > 0 &&
          state.world.tick % config.run.snapshot_refresh_ticks == 0)
        snapshot = agent.acting_network();
      const std::vector<int> robots = acting_robots(state);
      const auto observations = gather_observations(state, robots);
      std::vector<Action> actions;
      if (!robots.empty())
        actions = act(config.run.algorithm, snapshot, observation_matrix(observations), agent.epsilon(),
                      hp.exploration_noise_sigma, act_rng);
      StepResult step = env_step(state, actions);
      for (auto& e : step.experiences) buffer.push(std::move(e));
      experiences += step.experiences.size();
      if (auto report = agent.learn_step(buffer, learn_rng)) losses.push_back(report->loss);
    }
    EpisodeSummary s;
    s.episode = ep;
    s.ticks = state.world.tick;
    s.outcome = state.terminal;
    s.mean_cumulative_reward = mean_of(state.cumulative_rewards);
    s.epsilon = agent.epsilon();
    s.mean_loss = mean_of(losses);
    s.learn_steps = agent.learn_steps();
    s.experiences = experiences;
    s.gate_opening = scenario.gate_enabled ? scenario.gate_opening : 0.0;
    s.failures = static_cast<int>(state.failure_schedule.size());
    writer.episode(s);
    result.episodes.push_back(s);
    result.experiences_inserted += experiences;
    if ((ep + 1) % config.run.checkpoint_interval == 0) writer.checkpoint(agent, s, "ep" + std::to_string(ep + 1) + ".ckpt");
    if (progress) progress(s);
    last = s;
  }
  writer.checkpoint(agent, last, "final.ckpt");
  return result;
}

// K rollout workers feed one learner through a bounded queue. Workers act with
// a snapshot refreshed whenever an episode completes; arrival order (and so
// the learning trajectory) depends on thread scheduling.
TrainResult train_parallel(const RunConfig& config, RunWriter& writer, const ProgressCallback& progress) {
  const auto& hp = config.hyper;
  const std::uint64_t seed = config.run.seed;
  Agent agent(config.run.algorithm, hp, mix_seed(seed, seed_stream::kAgentInit));
  ReplayBuffer buffer(hp.replay_capacity);
  Rng learn_rng(mix_seed(seed, seed_stream::kLearner));

  struct Message {
    std::vector<Experience> experiences;
    std::optional<EpisodeSummary> finished;
  };
  BlockingQueue<Message> queue(64);
  std::mutex snapshot_mutex;
  auto snapshot = std::make_shared<const Network>(agent.acting_network());
  std::atomic<double> epsilon{agent.epsilon()};
  std::atomic<int> next_episode{0};
  std::atomic<int> live_workers{config.run.workers};

  auto worker = [&](int w) {
    Rng act_rng(mix_seed(seed, seed_stream::kActing * 1000 + static_cast<std::uint64_t>(w)));
    for (int ep = next_episode++; ep < config.run.episodes; ep = next_episode++) {
      const ScenarioConfig scenario = training_scenario(config, ep);
      EpisodeState state = generate_with_retry(scenario, mix_seed(seed, seed_stream::kScenarioBase + ep));
      std::shared_ptr<const Network> net;
      {
        std::lock_guard lock(snapshot_mutex);
        net = snapshot;
      }
      std::size_t experiences = 0;
      while (state.terminal == Terminal::running) {
        const std::vector<int> robots = acting_robots(state);
        std::vector<Action> actions;
        if (!robots.empty())
          actions = act(config.run.algorithm, *net, observation_matrix(gather_observations(state, robots)),
                        epsilon.load(), hp.exploration_noise_sigma, act_rng);
        StepResult step = env_step(state, actions);
        experiences += step.experiences.size();
        if (!queue.push(Message{std::move(step.experiences), std::nullopt})) return;
      }
      EpisodeSummary s;
      s.episode = ep;
      s.ticks = state.world.tick;
      s.outcome = state.terminal;
      s.mean_cumulative_reward = mean_of(state.cumulative_rewards);
      s.experiences = experiences;
      s.gate_opening = scenario.gate_enabled ? scenario.gate_opening : 0.0;
      s.failures = static_cast<int>(state.failure_schedule.size());
      if (!queue.push(Message{{}, s})) return;
    }
    if (--live_workers == 0) queue.close();
  };

  std::vector<std::jthread> threads;
  for (int w = 0; w < config.run.workers; ++w) threads.emplace_back(worker, w);

  TrainResult result;
  std::vector<double> losses;
  int completed = 0;
  EpisodeSummary last;
  while (auto msg = queue.pop()) {
    if (msg->finished) {
      EpisodeSummary s = *msg->finished;
      s.epsilon = agent.epsilon();
      s.mean_loss = mean_of(losses);
      s.learn_steps = agent.learn_steps();
      losses.clear();
      writer.episode(s);
      result.episodes.push_back(s);
      ++completed;
      {
        std::lock_guard lock(snapshot_mutex);
        snapshot = std::make_shared<const Network>(agent.acting_network());
      }
      if (completed % config.run.checkpoint_interval == 0) {
        EpisodeSummary tagged = s;
        tagged.episode = completed - 1;
        writer.checkpoint(agent, tagged, "ep" + std::to_string(completed) + ".ckpt");
      }
      if (progress) progress(s);
      last = s;
      last.episode = completed - 1;
      continue;
    }
    result.experiences_inserted += msg->experiences.size();
    for (auto& e : msg->experiences) buffer.push(std::move(e));
    if (auto report = agent.learn_step(buffer, learn_rng)) losses.push_back(report->loss);
    epsilon.store(agent.epsilon());
  }
  threads.clear();
  writer.checkpoint(agent, last, "final.ckpt");
  return result;
}

}  // namespace

ScenarioConfig training_scenario(const RunConfig& config, int episode_index) {
  ScenarioConfig s = config.scenario;
  if (s.gate_enabled && config.run.curriculum)
    s.gate_opening = curriculum_advance(default_curriculum(s, config.run.curriculum_completion), episode_index);
  return s;
}

EpisodeState generate_with_retry(const ScenarioConfig& scenario, std::uint64_t seed, int max_attempts) {
  for (int attempt = 0;; ++attempt) {
    Rng rng(attempt == 0 ? seed : mix_seed(seed, static_cast<std::uint64_t>(attempt)));
    try {
      return generate_scenario(scenario, rng);
    } catch (const ScenarioError&) {
      if (attempt + 1 >= max_attempts) throw;
    }
  }
}

TrainResult train(const RunConfig& config, const fs::path& run_dir, const ProgressCallback& progress) {
  validate(config);
  RunWriter writer(config, run_dir);
  TrainResult result =
      config.run.workers == 1 ? train_single(config, writer, progress) : train_parallel(config, writer, progress);
  result.run_dir = run_dir;
  result.checkpoints_written = writer.written();
  return result;
}

TrialResult run_episode(Policy& policy, EpisodeState& episode, std::ostream* trajectory) {
  std::optional<TrajectoryWriter> log;
  if (trajectory) {
    log.emplace(*trajectory);
    log->scenario(episode);
    log->tick(episode, 0.0);
  }
  while (episode.terminal == Terminal::running) {
    const std::vector<int> robots = acting_robots(episode);
    std::vector<Action> actions;
    if (!robots.empty()) actions = policy.act(gather_observations(episode, robots));
    const StepResult step = env_step(episode, actions);
    if (log) {
      double sum = 0.0;
      for (const auto& e : step.experiences) sum += e.reward;
      log->tick(episode, step.experiences.empty() ? 0.0 : sum / static_cast<double>(step.experiences.size()));
    }
  }
  TrialResult r;
  r.outcome = episode.terminal;
  r.ticks = episode.world.tick;
  r.mean_cumulative_reward = mean_of(episode.cumulative_rewards);
  return r;
}

EvaluationReport evaluate(Policy& policy, const ScenarioConfig& scenario, const EvaluationOptions& options) {
  if (options.trials < 0) throw ConfigError("evaluate: trials must be >= 0");
  EvaluationReport report;
  report.trials = options.trials;
  if (options.trajectory_dir) fs::create_directories(*options.trajectory_dir);
  double length_sum = 0.0;
  double reward_sum = 0.0;
  for (int k = 0; k < options.trials; ++k) {
    const std::uint64_t seed = mix_seed(options.seed, static_cast<std::uint64_t>(k));
    EpisodeState episode = generate_with_retry(scenario, seed);
    std::ofstream log_file;
    if (options.trajectory_dir && k < options.trajectory_limit) {
      log_file.open(*options.trajectory_dir / ("trial_" + std::to_string(k) + ".jsonl"), std::ios::trunc);
      if (!log_file) throw std::runtime_error("cannot write trajectory log in " + options.trajectory_dir->string());
    }
    TrialResult trial = run_episode(policy, episode, log_file.is_open() ? &log_file : nullptr);
    trial.seed = seed;
    if (trial.outcome == Terminal::success) ++report.successes;
    length_sum += static_cast<double>(trial.ticks);
    reward_sum += trial.mean_cumulative_reward;
    report.per_trial.push_back(trial);
  }
  if (options.trials > 0) {
    report.success_rate = static_cast<double>(report.successes) / options.trials;
    report.mean_episode_length = length_sum / options.trials;
    report.mean_cumulative_reward = reward_sum / options.trials;
  }
  return report;
}

EvaluationReport evaluate(Algorithm algorithm, const Network& acting, const ScenarioConfig& scenario,
                          const EvaluationOptions& options) {
  ModelPolicy policy(algorithm, acting);
  return evaluate(policy, scenario, options);
}

const CheckpointScore& pick_best(const std::vector<CheckpointScore>& scores) {
  if (scores.empty()) throw UsageError("pick_best: no checkpoints");
  const CheckpointScore* best = &scores.front();
  for (const auto& s : scores) {
    const bool better =
        s.success_rate > best->success_rate ||
        (s.success_rate == best->success_rate &&
         (s.mean_reward > best->mean_reward || (s.mean_reward == best->mean_reward && s.episode > best->episode)));
    if (better) best = &s;
  }
  return *best;
}

std::vector<fs::path> list_checkpoints(const fs::path& run_dir) {
  std::vector<std::pair<long, fs::path>> found;
  const fs::path dir = run_dir / "checkpoints";
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) return {};
  static const std::regex pattern(R"(ep(\d+)\.ckpt)");
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern)) found.emplace_back(std::stol(m[1].str()), entry.path());
  }
  std::sort(found.begin(), found.end());
  std::vector<fs::path> out;
  for (auto& [n, p] : found) out.push_back(p);
  return out;
}

CheckpointScore select_best_checkpoint(const fs::path& run_dir, int validation_episodes) {
  const auto paths = list_checkpoints(run_dir);
  if (paths.empty()) throw UsageError("select_best_checkpoint: no checkpoints in " + run_dir.string());
  const RunConfig config = load_run_config(run_dir / "config.snapshot");
  const ScenarioConfig scenario = training_scenario(config, std::max(0, config.run.episodes - 1));
  std::vector<CheckpointScore> scores;
  for (const auto& path : paths) {
    const Checkpoint c = load_checkpoint(path);
    EvaluationOptions options;
    options.trials = validation_episodes;
    options.seed = mix_seed(config.run.seed, seed_stream::kValidation);
    const EvaluationReport r = evaluate(c.agent.algorithm(), c.agent.acting_network(), scenario, options);
    scores.push_back({path, c.episode, r.success_rate.value_or(0.0), r.mean_cumulative_reward.value_or(0.0)});
  }
  return pick_best(scores);
}

}  // namespace aggrl
