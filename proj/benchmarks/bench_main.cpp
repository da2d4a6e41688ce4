#include <benchmark/benchmark.h>

#include "aggrl/agent.hpp"
#include "aggrl/env.hpp"
#include "aggrl/sensing.hpp"

using namespace aggrl;

namespace {

EpisodeState episode_with(int robots, int obstacles) {
  ScenarioConfig s;
  s.robot_count = robots;
  s.cylinder_obstacle_count = obstacles;
  Rng rng(7);
  return generate_scenario(s, rng);
}

void BM_EnvStep(benchmark::State& state) {
  const EpisodeState start = episode_with(static_cast<int>(state.range(0)), 4);
  EpisodeState ep = start;
  const std::vector<Action> actions(static_cast<std::size_t>(state.range(0)), Action{WheelDelta{0.1, 0.08}});
  for (auto _ : state) {
    if (ep.terminal != Terminal::running) ep = start;
    benchmark::DoNotOptimize(env_step(ep, actions));
  }
}
BENCHMARK(BM_EnvStep)->Arg(4)->Arg(10);

void BM_SenseProximity(benchmark::State& state) {
  const EpisodeState ep = episode_with(8, 4);
  for (auto _ : state) benchmark::DoNotOptimize(sense_proximity(ep.world, 0));
}
BENCHMARK(BM_SenseProximity);

void BM_ForwardActor(benchmark::State& state) {
  Rng rng(1);
  const Network actor = make_actor_network(rng);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(kObservationSize, state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(actor.forward(x));
}
BENCHMARK(BM_ForwardActor)->Arg(1)->Arg(100);

Batch random_batch(int size, bool discrete, Rng& rng) {
  std::vector<Experience> xs;
  for (int i = 0; i < size; ++i) {
    Experience e;
    for (auto& v : e.observation) v = uniform(rng, -1.0, 1.0);
    for (auto& v : e.next_observation) v = uniform(rng, -1.0, 1.0);
    e.action = discrete ? Action{DiscreteAction{uniform_int(rng, 0, 8)}}
                        : Action{WheelDelta{uniform(rng, -0.1, 0.1), uniform(rng, -0.1, 0.1)}};
    e.reward = uniform(rng, -4.0, -1.0);
    xs.push_back(e);
  }
  std::vector<const Experience*> ptrs;
  for (const auto& e : xs) ptrs.push_back(&e);
  return make_batch(ptrs);
}

void BM_LearnStep(benchmark::State& state) {
  const auto algorithm = static_cast<Algorithm>(state.range(0));
  Agent agent(algorithm, Hyperparameters{}, 3);
  Rng rng(4);
  const Batch batch = random_batch(100, is_value_based(algorithm), rng);
  for (auto _ : state) benchmark::DoNotOptimize(agent.learn_on_batch(batch, rng));
  state.SetLabel(std::string(to_string(algorithm)));
}
BENCHMARK(BM_LearnStep)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
