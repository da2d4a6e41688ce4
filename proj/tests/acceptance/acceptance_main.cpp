// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
//   acceptance [--work-dir DIR] [--learning | --learning-only] [--only N,...]
//
// Criteria 1-7 and the scripted oracle run in a few minutes. The learning
// criteria (8-11) train full-size models and take hours; they only run with
// --learning or --learning-only.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "aggrl/agent.hpp"
#include "aggrl/bytes.hpp"
#include "aggrl/env.hpp"
#include "aggrl/errors.hpp"
#include "aggrl/policy.hpp"
#include "aggrl/session.hpp"
#include "aggrl/trainer.hpp"
#include "aggrl/wire.hpp"

using namespace aggrl;
using Eigen::MatrixXd;
using Eigen::VectorXd;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string id;
  std::string name;
  bool learning = false;
  std::function<Verdict(const fs::path& work)> run;
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

// ---------------------------------------------------------------- 1

double half_squared_error(const Network& net, const VectorXd& x, const VectorXd& y) {
  return 0.5 * (net.forward(x) - y).squaredNorm();
}

double relative_error(double a, double b) { return std::abs(a - b) / std::max(1e-6, std::abs(a) + std::abs(b)); }

// Worst relative error between backprop and central differences over random
// (input, target) instances: a random subset of parameters plus every input.
double worst_gradient_error(Network net, Rng& rng, int instances, int params_per_instance) {
  const double h = 1e-5;
  double worst = 0.0;
  for (int trial = 0; trial < instances; ++trial) {
    VectorXd x(net.input_size());
    for (auto& v : x) v = gaussian(rng, 1.0);
    VectorXd y(net.output_size());
    for (auto& v : y) v = gaussian(rng, 1.0);
    const ForwardPass pass = net.forward_cached(x);
    const Gradients g = net.backward(pass, pass.result() - y);

    for (int c = 0; c < params_per_instance; ++c) {
      const auto k = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(net.layers().size()) - 1));
      auto& layer = net.layers()[k];
      const int i = uniform_int(rng, 0, layer.outputs() - 1);
      double* p;
      double analytic;
      if (uniform(rng, 0.0, 1.0) < 0.25) {
        p = &layer.bias(i);
        analytic = g.layers[k].bias(i);
      } else {
        const int j = uniform_int(rng, 0, layer.inputs() - 1);
        p = &layer.weight(i, j);
        analytic = g.layers[k].weight(i, j);
      }
      const double saved = *p;
      *p = saved + h;
      const double up = half_squared_error(net, x, y);
      *p = saved - h;
      const double down = half_squared_error(net, x, y);
      *p = saved;
      worst = std::max(worst, relative_error(analytic, (up - down) / (2 * h)));
    }
    for (int j = 0; j < x.size(); ++j) {
      VectorXd xp = x, xm = x;
      xp(j) += h;
      xm(j) -= h;
      const double numeric = (half_squared_error(net, xp, y) - half_squared_error(net, xm, y)) / (2 * h);
      worst = std::max(worst, relative_error(g.input(j, 0), numeric));
    }
  }
  return worst;
}

Verdict gradient_check(const fs::path&) {
  Rng rng(101);
  Network actor = make_actor_network(rng);
  // Push the tanh head out of its linear regime so its derivative matters.
  actor.layers().back().weight *= 100.0;
  const double value = worst_gradient_error(make_value_network(rng), rng, 100, 30);
  const double act = worst_gradient_error(actor, rng, 100, 30);
  const double critic = worst_gradient_error(make_critic_network(rng), rng, 100, 30);
  const double worst = std::max({value, act, critic});
  return {worst < 1e-4, "max rel err value " + fmt(value) + ", actor " + fmt(act) + ", critic " + fmt(critic)};
}

// ---------------------------------------------------------------- 2

DenseLayer random_layer(int in, int out, Activation act, Rng& rng) {
  DenseLayer l;
  l.weight.resize(out, in);
  l.bias.resize(out);
  for (auto& v : l.weight.reshaped()) v = uniform(rng, -1.0, 1.0);
  for (auto& v : l.bias) v = uniform(rng, -1.0, 1.0);
  l.activation = act;
  return l;
}

Network tiny(int in, int hidden, int out, Activation head, Rng& rng) {
  return Network({random_layer(in, hidden, Activation::relu, rng), random_layer(hidden, out, head, rng)});
}

Network constant_output(int in, const std::vector<double>& values) {
  DenseLayer l;
  l.weight = MatrixXd::Zero(static_cast<Eigen::Index>(values.size()), in);
  l.bias = Eigen::Map<const VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
  return Network({l});
}

// Scalar loops, no Eigen arithmetic.
std::vector<double> brute_forward(const Network& net, std::vector<double> x) {
  for (const auto& l : net.layers()) {
    std::vector<double> y(static_cast<std::size_t>(l.outputs()));
    for (int i = 0; i < l.outputs(); ++i) {
      double s = l.bias(i);
      for (int j = 0; j < l.inputs(); ++j) s += l.weight(i, j) * x[static_cast<std::size_t>(j)];
      if (l.activation == Activation::relu) s = s > 0.0 ? s : 0.0;
      if (l.activation == Activation::tanh) s = std::tanh(s);
      y[static_cast<std::size_t>(i)] = s;
    }
    x = std::move(y);
  }
  return x;
}

int brute_argmax(const std::vector<double>& q) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(q.size()); ++i)
    if (q[static_cast<std::size_t>(i)] > q[static_cast<std::size_t>(best)]) best = i;
  return best;
}

Batch random_batch(int n, Rng& rng, bool discrete) {
  Batch b;
  b.observations.resize(kObservationSize, n);
  b.next_observations.resize(kObservationSize, n);
  for (auto& v : b.observations.reshaped()) v = uniform(rng, -1.0, 1.0);
  for (auto& v : b.next_observations.reshaped()) v = uniform(rng, -1.0, 1.0);
  b.rewards.resize(n);
  b.terminal.resize(n);
  b.action_deltas.resize(2, n);
  b.action_indices.assign(static_cast<std::size_t>(n), -1);
  for (int j = 0; j < n; ++j) {
    b.rewards(j) = uniform(rng, -4.0, -1.0);
    b.terminal(j) = uniform(rng, 0.0, 1.0) < 0.2 ? 1.0 : 0.0;
    const int index = uniform_int(rng, 0, 8);
    if (discrete) b.action_indices[static_cast<std::size_t>(j)] = index;
    b.action_deltas(0, j) = uniform(rng, -0.1, 0.1);
    b.action_deltas(1, j) = uniform(rng, -0.1, 0.1);
  }
  return b;
}

std::vector<double> column(const MatrixXd& m, Eigen::Index j) { return {m.col(j).data(), m.col(j).data() + m.rows()}; }

std::vector<double> with_action(std::vector<double> s, double a0, double a1) {
  s.push_back(a0);
  s.push_back(a1);
  return s;
}

Verdict target_oracles(const fs::path&) {
  Rng rng(202);
  double worst = 0.0;
  int disagreements = 0, agreement_violations = 0, min_violations = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const double gamma = uniform(rng, 0.5, 0.99999);
    const Batch vb = random_batch(16, rng, true);
    const Network online = tiny(kObservationSize, uniform_int(rng, 1, 4), 9, Activation::identity, rng);
    const Network target = tiny(kObservationSize, uniform_int(rng, 1, 4), 9, Activation::identity, rng);
    const VectorXd dqn = dqn_target(vb, target, gamma);
    const VectorXd ddqn = ddqn_target(vb, online, target, gamma);

    const Batch pb = random_batch(16, rng, false);
    const Network actor = tiny(kObservationSize, uniform_int(rng, 1, 4), 2, Activation::tanh, rng);
    const Network c1 = tiny(kObservationSize + 2, uniform_int(rng, 1, 4), 1, Activation::identity, rng);
    const Network c2 = tiny(kObservationSize + 2, uniform_int(rng, 1, 4), 1, Activation::identity, rng);
    Rng noise(static_cast<std::uint64_t>(trial));
    Rng oracle_noise = noise;
    const VectorXd ddpg = ddpg_target(pb, actor, c1, gamma);
    const VectorXd td3 = td3_target(pb, actor, c1, c2, gamma, 0.2, 0.5, noise);
    const VectorXd td3_quiet = td3_target(pb, actor, c1, c2, gamma, 0.0, 0.0, noise);
    const VectorXd ddpg_c2 = ddpg_target(pb, actor, c2, gamma);

    for (int j = 0; j < 16; ++j) {
      const double vcont = vb.terminal(j) == 1.0 ? 0.0 : gamma;
      const auto s = column(vb.next_observations, j);
      const auto qt = brute_forward(target, s);
      const auto qo = brute_forward(online, s);
      const int at = brute_argmax(qt), ao = brute_argmax(qo);
      worst = std::max(worst, std::abs(dqn(j) - (vb.rewards(j) + vcont * qt[static_cast<std::size_t>(at)])));
      worst = std::max(worst, std::abs(ddqn(j) - (vb.rewards(j) + vcont * qt[static_cast<std::size_t>(ao)])));
      if (vb.terminal(j) == 0.0) {
        if (at != ao) {
          ++disagreements;
          if (!(ddqn(j) < dqn(j))) ++agreement_violations;
        } else if (ddqn(j) != dqn(j)) {
          ++agreement_violations;
        }
      }

      const double pcont = pb.terminal(j) == 1.0 ? 0.0 : gamma;
      const auto sp = column(pb.next_observations, j);
      const auto a = brute_forward(actor, sp);
      const double q1 = brute_forward(c1, with_action(sp, a[0], a[1]))[0];
      const double q2 = brute_forward(c2, with_action(sp, a[0], a[1]))[0];
      worst = std::max(worst, std::abs(ddpg(j) - (pb.rewards(j) + pcont * q1)));
      double noisy[2];
      for (int i = 0; i < 2; ++i) {
        const double eps = std::clamp(std::normal_distribution<double>(0.0, 0.2)(oracle_noise), -0.5, 0.5);
        noisy[i] = std::clamp(a[static_cast<std::size_t>(i)] + eps, -1.0, 1.0);
      }
      const auto xn = with_action(sp, noisy[0], noisy[1]);
      const double qmin = std::min(brute_forward(c1, xn)[0], brute_forward(c2, xn)[0]);
      worst = std::max(worst, std::abs(td3(j) - (pb.rewards(j) + pcont * qmin)));
      worst = std::max(worst, std::abs(td3_quiet(j) - (pb.rewards(j) + pcont * std::min(q1, q2))));
      // Min property with noise off: equal to the smaller single-critic target.
      if (td3_quiet(j) != std::min(ddpg(j), ddpg_c2(j))) ++min_violations;
    }
  }

  // Crafted case: online prefers action 2, target prefers action 5.
  Batch b;
  b.next_observations = MatrixXd::Zero(kObservationSize, 1);
  b.rewards = VectorXd::Constant(1, -1.0);
  b.terminal = VectorXd::Zero(1);
  std::vector<double> qo(9, 0.0), qt(9, 0.0);
  qo[2] = 1.0;
  qt[5] = 4.0;
  qt[2] = -0.5;
  const bool crafted = ddqn_target(b, constant_output(kObservationSize, qo), constant_output(kObservationSize, qt),
                                   0.9)(0) == -1.0 + 0.9 * -0.5 &&
                       dqn_target(b, constant_output(kObservationSize, qt), 0.9)(0) == -1.0 + 0.9 * 4.0;

  const bool pass = worst <= 1e-12 && agreement_violations == 0 && min_violations == 0 && crafted && disagreements > 0;
  return {pass, "max abs err " + fmt(worst) + ", argmax disagreements " + std::to_string(disagreements) +
                    ", ddqn/dqn violations " + std::to_string(agreement_violations) + ", min violations " +
                    std::to_string(min_violations) + ", crafted " + (crafted ? "ok" : "wrong")};
}

// ---------------------------------------------------------------- 3

ScenarioConfig random_scenario(Rng& rng) {
  ScenarioConfig s;
  s.robot_count = uniform_int(rng, 1, 10);
  s.cylinder_obstacle_count = uniform_int(rng, 0, 6);
  s.gate_enabled = uniform(rng, 0.0, 1.0) < 0.4;
  s.gate_opening = uniform(rng, minimum_gate_opening(s), arena_width(s));
  s.max_failure_fraction = uniform(rng, 0.0, 1.0) < 0.5 ? 0.0 : uniform(rng, 0.0, 1.0);
  s.time_limit = uniform_int(rng, 50, 400);
  return s;
}

std::vector<Action> random_actions(std::size_t n, Rng& rng) {
  std::vector<Action> a;
  for (std::size_t i = 0; i < n; ++i) {
    if (uniform(rng, 0.0, 1.0) < 0.5)
      a.push_back(DiscreteAction{uniform_int(rng, 0, 8)});
    else
      a.push_back(WheelDelta{uniform(rng, -0.1, 0.1), uniform(rng, -0.1, 0.1)});
  }
  return a;
}

Verdict reward_bounds(const fs::path&) {
  Rng rng(303);
  std::size_t steps = 0, rewards = 0, outside = 0;
  double lo = 0.0, hi = -10.0;
  while (steps < 100000) {
    EpisodeState ep = generate_with_retry(random_scenario(rng), rng());
    // Bias half the episodes toward saturated wheels so contact is common.
    const bool push = uniform(rng, 0.0, 1.0) < 0.5;
    while (ep.terminal == Terminal::running && steps < 100000) {
      std::vector<Action> actions = random_actions(acting_robots(ep).size(), rng);
      if (push)
        for (auto& a : actions) a = WheelDelta{0.1, uniform(rng, 0.05, 0.1)};
      const StepResult r = env_step(ep, actions);
      ++steps;
      for (const auto& e : r.experiences) {
        ++rewards;
        lo = std::min(lo, e.reward);
        hi = std::max(hi, e.reward);
        if (!(e.reward >= -4.0 && e.reward <= -1.0)) ++outside;
      }
    }
  }

  // Zero displacement: a resting payload next to an obstacle.
  ScenarioConfig s;
  WorldState w;
  w.payload_pose = {{0.0, 0.0}, 0.0};
  w.goal = {8.0, 0.0};
  const std::vector<double> headings(4, 0.0);
  attach_uniformly(w, 4, headings);
  w.obstacles.push_back(CylinderObstacle{{0.0, 2.0}, 0.5});
  EpisodeState rest = make_episode(w, 100, 0.5);
  const std::vector<Action> idle(4, Action{WheelDelta{0.0, 0.0}});
  const StepResult r = env_step(rest, idle);
  double degenerate_err = 0.0;
  bool saw_proximity = false;
  for (const auto& e : r.experiences) {
    double mean = 0.0;
    for (double p : proximity_of(e.next_observation)) mean += p;
    mean /= kProximityRays;
    saw_proximity = saw_proximity || mean > 0.0;
    degenerate_err = std::max(degenerate_err, std::abs(e.reward - (-2.0 - mean)));
  }

  const bool pass = outside == 0 && degenerate_err <= 1e-15 && saw_proximity && r.experiences.size() == 4;
  return {pass, std::to_string(steps) + " steps, " + std::to_string(rewards) + " rewards in [" + fmt(lo) + ", " +
                    fmt(hi) + "], outside " + std::to_string(outside) + ", degenerate err " + fmt(degenerate_err)};
}

// ---------------------------------------------------------------- 4

double rigid_error(const WorldState& w) {
  double worst = 0.0;
  for (const auto& r : w.robots) {
    if (!r.attached) continue;
    const double a = w.payload_pose.heading + r.attachment_angle;
    const Vec2 expected = w.payload_pose.position + Vec2{std::cos(a), std::sin(a)} * w.payload_radius();
    worst = std::max({worst, std::abs(r.position.x - expected.x), std::abs(r.position.y - expected.y)});
  }
  return worst;
}

Verdict physics_invariants(const fs::path&) {
  Rng rng(404);
  int symmetry_violations = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    // One robot cannot be symmetric about the payload under mean-tangential
    // rotation, so rings start at two.
    const int n = uniform_int(rng, 2, 12);
    const double heading = uniform(rng, -kPi, kPi);
    WorldState w;
    w.payload_pose = {{uniform(rng, -5.0, 5.0), uniform(rng, -5.0, 5.0)}, uniform(rng, -kPi, kPi)};
    const std::vector<double> headings(static_cast<std::size_t>(n), heading);
    attach_uniformly(w, n, headings);
    const double v = uniform(rng, -kWheelClamp, kWheelClamp);
    for (auto& r : w.robots) r.wheel_left = r.wheel_right = v;
    const WorldState out = step(w);
    const Vec2 d = out.payload_pose.position - w.payload_pose.position;
    if (out.payload_angular_velocity != 0.0 || std::abs(cross(unit_vector(heading), d)) > 1e-12 ||
        dot(unit_vector(heading), d) * v < 0.0)
      ++symmetry_violations;
  }

  int steps = 0, clamp_violations = 0, nondeterministic = 0;
  double worst_rigid = 0.0, worst_separation = 1.0;
  while (steps < 10000) {
    const int n = uniform_int(rng, 1, 10);
    WorldState w;
    w.payload_pose = {{uniform(rng, -8.0, 8.0), uniform(rng, -8.0, 8.0)}, uniform(rng, -kPi, kPi)};
    std::vector<double> headings(static_cast<std::size_t>(n));
    for (auto& h : headings) h = uniform(rng, -kPi, kPi);
    attach_uniformly(w, n, headings);
    for (int k = uniform_int(rng, 1, 6); k > 0; --k) {
      const Vec2 c = w.payload_pose.position + Vec2{uniform(rng, -3.0, 3.0), uniform(rng, -3.0, 3.0)};
      if (uniform(rng, 0.0, 1.0) < 0.5)
        w.obstacles.push_back(CylinderObstacle{c, uniform(rng, 0.1, 1.0)});
      else
        w.obstacles.push_back(
            WallObstacle{c, c + unit_vector(uniform(rng, -kPi, kPi)) * uniform(rng, 0.0, 4.0), uniform(rng, 0.05, 0.4)});
    }
    if (collision_clearance(w) < 0.0) continue;
    for (auto& r : w.robots) {
      r.wheel_left = uniform(rng, 0.0, 1.0) < 0.5 ? kWheelClamp : uniform(rng, -kWheelClamp, kWheelClamp);
      r.wheel_right = std::clamp(r.wheel_left + uniform(rng, -1.0, 1.0), -kWheelClamp, kWheelClamp);
    }
    WorldState twin = w;
    for (int k = 0; k < 100 && steps < 10000; ++k, ++steps) {
      std::vector<WheelDelta> d(static_cast<std::size_t>(n));
      for (auto& x : d) x = {uniform(rng, -0.1, 0.1), uniform(rng, -0.1, 0.1)};
      apply_actions_in_place(w, d);
      step_in_place(w);
      apply_actions_in_place(twin, d);
      step_in_place(twin);
      if (!(w == twin)) ++nondeterministic;
      worst_rigid = std::max(worst_rigid, rigid_error(w));
      worst_separation = std::min({worst_separation, payload_separation(w), collision_clearance(w)});
      for (const auto& r : w.robots)
        if (!(std::abs(r.wheel_left) < kMaxWheelSpeed && std::abs(r.wheel_right) < kMaxWheelSpeed)) ++clamp_violations;
    }
  }

  const bool pass = symmetry_violations == 0 && worst_rigid <= 1e-9 && worst_separation >= -1e-9 &&
                    clamp_violations == 0 && nondeterministic == 0;
  return {pass, "symmetry violations " + std::to_string(symmetry_violations) + "/10000, " + std::to_string(steps) +
                    " fuzz steps: max rigid err " + fmt(worst_rigid) + " m, min separation " + fmt(worst_separation) +
                    " m, clamp violations " + std::to_string(clamp_violations) + ", nondeterministic " +
                    std::to_string(nondeterministic)};
}

// ---------------------------------------------------------------- 5

Verdict buffer_epsilon_decode(const fs::path&) {
  std::vector<std::string> problems;

  ReplayBuffer buffer(1000);
  const int total = 2337;
  for (int k = 0; k < total; ++k) {
    Experience e;
    e.reward = k;
    buffer.push(e);
  }
  bool ring = buffer.size() == 1000 && buffer.inserted() == static_cast<std::size_t>(total);
  for (std::size_t i = 0; i < buffer.size(); ++i)
    ring = ring && buffer.at(i).reward == static_cast<double>(total - 1000 + static_cast<int>(i));
  Rng rng(505);
  for (int s = 0; s < 200 && ring; ++s) {
    const auto batch = buffer.sample_batch(64, rng);
    ring = batch.has_value();
    for (int j = 0; ring && j < batch->size(); ++j) ring = batch->rewards(j) >= total - 1000;
  }
  if (!ring) problems.push_back("ring eviction");

  Hyperparameters hp;
  for (std::uint64_t n : {0ull, 1ull, 1000ull, 123456ull, 989999ull, 990000ull, 990001ull, 1000000ull, 5000000ull}) {
    const double expected = std::max(0.01, 1.0 - 1e-6 * static_cast<double>(n));
    if (epsilon_after(hp, n) != expected) problems.push_back("epsilon at n=" + std::to_string(n));
  }
  if (epsilon_after(hp, 990001) != 0.01 || epsilon_after(hp, 500000) != 0.5) problems.push_back("epsilon anchors");

  const double table[9][2] = {{-0.1, -0.1}, {-0.1, 0.0}, {-0.1, 0.1}, {0.0, -0.1}, {0.0, 0.0},
                              {0.0, 0.1},   {0.1, -0.1}, {0.1, 0.0},  {0.1, 0.1}};
  for (int i = 0; i < 9; ++i)
    if (decode_discrete_action(i) != WheelDelta{table[i][0], table[i][1]})
      problems.push_back("decode " + std::to_string(i));
  for (int bad : {-1, 9}) {
    try {
      decode_discrete_action(bad);
      problems.push_back("decode accepts " + std::to_string(bad));
    } catch (const UsageError&) {
    }
  }

  std::string detail = "ring 1000/" + std::to_string(total) + ", 9 epsilon points, 9 decode entries";
  for (const auto& p : problems) detail += "; bad " + p;
  return {problems.empty(), detail};
}

// ---------------------------------------------------------------- 6

Experience random_experience(Rng& rng, bool discrete) {
  Experience e;
  for (auto& v : e.observation) v = uniform(rng, -1.0, 1.0);
  for (auto& v : e.next_observation) v = uniform(rng, -1.0, 1.0);
  e.action = discrete ? Action{DiscreteAction{uniform_int(rng, 0, 8)}}
                      : Action{WheelDelta{uniform(rng, -0.1, 0.1), uniform(rng, -0.1, 0.1)}};
  e.reward = uniform(rng, -4.0, -1.0);
  e.terminal = uniform(rng, 0.0, 1.0) < 0.1;
  return e;
}

wire::Message random_message(Rng& rng) {
  const auto episode = static_cast<std::uint64_t>(uniform_int(rng, 0, 1 << 30));
  const std::int64_t tick = uniform_int(rng, 0, 4500);
  const int n = uniform_int(rng, 0, 12);
  switch (uniform_int(rng, 1, 7)) {
    case 1: {
      wire::ObsBatch m{episode, tick, {}, {}};
      for (int i = 0; i < n; ++i) {
        m.robots.push_back(uniform_int(rng, 0, 100));
        m.observations.push_back(random_experience(rng, true).observation);
      }
      return m;
    }
    case 2: {
      wire::ActionBatch m{episode, tick, {}};
      for (int i = 0; i < n; ++i) m.actions.push_back(random_experience(rng, i % 2 == 0).action);
      return m;
    }
    case 3: {
      wire::ExperienceBatch m{episode, tick, {}};
      for (int i = 0; i < n; ++i) m.experiences.push_back(random_experience(rng, uniform(rng, 0.0, 1.0) < 0.5));
      return m;
    }
    case 4: {
      Rng init(rng());
      const auto algorithm = static_cast<Algorithm>(uniform_int(rng, 0, 3));
      return wire::ModelSnapshot{algorithm, episode, uniform(rng, 0.0, 1.0),
                                 is_value_based(algorithm) ? make_value_network(init) : make_actor_network(init)};
    }
    case 5:
      return wire::EpisodeEvent{episode, static_cast<wire::EpisodeEventKind>(uniform_int(rng, 0, 1)),
                                static_cast<Terminal>(uniform_int(rng, 0, 2)), tick, uniform(rng, -9000.0, 0.0),
                                uniform_int(rng, 0, 10)};
    case 6:
      return wire::Hello{kObservationLayoutVersion, static_cast<std::uint32_t>(uniform_int(rng, 1, 16)), "w"};
    default:
      return wire::Bye{"done"};
  }
}

std::vector<std::byte> mutate(std::vector<std::byte> bytes, Rng& rng) {
  if (bytes.empty()) return bytes;
  for (int f = uniform_int(rng, 1, 4); f > 0; --f)
    bytes[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(bytes.size()) - 1))] =
        static_cast<std::byte>(uniform_int(rng, 0, 255));
  if (uniform(rng, 0.0, 1.0) < 0.3) bytes.resize(static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(bytes.size()))));
  return bytes;
}

Verdict round_trips_and_fuzz(const fs::path& work) {
  std::vector<std::string> problems;
  Rng rng(606);

  // Checkpoints of every algorithm, with trained ADAM state.
  for (Algorithm a : {Algorithm::dqn, Algorithm::ddqn, Algorithm::ddpg, Algorithm::td3}) {
    Hyperparameters hp;
    hp.batch_size = 8;
    Agent agent(a, hp, 7);
    Batch b = random_batch(8, rng, is_value_based(a));
    for (int k = 0; k < 5; ++k) agent.learn_on_batch(b, rng);
    const Checkpoint original{agent, 42, {{"success_rate", 0.25}, {"loss", 1.0 / 3.0}}};
    const auto bytes = encode_checkpoint(original);
    const Checkpoint back = decode_checkpoint(bytes);
    if (!(back.agent == original.agent) || back.episode != 42 || back.metrics != original.metrics ||
        encode_checkpoint(back) != bytes)
      problems.push_back(std::string("checkpoint ") + std::string(to_string(a)));
    const fs::path file = work / ("roundtrip-" + std::string(to_string(a)) + ".ckpt");
    save_checkpoint(file, original);
    if (encode_checkpoint(load_checkpoint(file)) != bytes)
      problems.push_back(std::string("checkpoint file ") + std::string(to_string(a)));
  }

  int messages = 0;
  for (; messages < 5000; ++messages) {
    const wire::Message m = random_message(rng);
    const auto bytes = wire::encode(m);
    const wire::Message back = wire::decode(bytes);
    if (!(back == m) || wire::encode(back) != bytes) {
      problems.push_back("wire message " + std::to_string(messages));
      break;
    }
  }

  // Offline decoder fuzz: only ProtocolError may escape.
  int escaped = 0;
  for (int i = 0; i < 20000; ++i) {
    std::vector<std::byte> bytes;
    if (i % 2 == 0) {
      bytes = mutate(wire::encode(random_message(rng)), rng);
    } else {
      bytes.resize(static_cast<std::size_t>(uniform_int(rng, 0, 64)));
      for (auto& b : bytes) b = static_cast<std::byte>(uniform_int(rng, 0, 255));
    }
    try {
      wire::decode(bytes);
    } catch (const ProtocolError&) {
    } catch (...) {
      ++escaped;
    }
  }
  if (escaped) problems.push_back(std::to_string(escaped) + " non-protocol decode errors");

  // Live learner: hostile sessions are dropped, honest workers keep working.
  Hyperparameters hp;
  hp.batch_size = 16;
  hp.replay_capacity = 100000;
  Agent agent(Algorithm::dqn, hp, 1);
  ReplayBuffer buffer(hp.replay_capacity);
  wire::LearnerOptions lo;
  lo.session_timeout = wire::Millis(3000);
  wire::LearnerServer server(agent, buffer, lo);
  server.start();
  const wire::Endpoint endpoint{"127.0.0.1", server.port()};
  const int hostile = 200;
  for (int i = 0; i < hostile; ++i) {
    wire::Connection c = wire::Connection::connect(endpoint, wire::Millis(2000));
    c.set_timeout(wire::Millis(2000));
    if (i % 2 == 0) {
      std::vector<std::byte> junk(static_cast<std::size_t>(uniform_int(rng, 1, 64)));
      for (auto& b : junk) b = static_cast<std::byte>(uniform_int(rng, 0, 255));
      junk[0] = std::byte{0x00};  // never a valid magic
      c.send_raw(junk);
    } else {
      c.send(wire::Hello{kObservationLayoutVersion, 4, "fuzz"});
      try {
        c.receive();  // snapshot
      } catch (const std::exception&) {
      }
      auto frame = wire::encode(wire::ExperienceBatch{0, 0, {random_experience(rng, true)}});
      frame[frame.size() - 1] ^= std::byte{0xFF};  // corrupt checksum
      c.send_raw(frame);
    }
    try {
      while (true) c.receive();  // wait for the learner to hang up
    } catch (const std::exception&) {
    }
  }
  ScenarioConfig scenario;
  scenario.time_limit = 30;
  wire::WorkerOptions wo;
  wo.episodes = 2;
  wo.seed = 9;
  wo.timeout = wire::Millis(5000);
  const wire::WorkerReport report = wire::run_worker(endpoint, scenario, wo);
  server.wait_for_episodes(2, wire::Millis(5000));
  server.stop();
  const wire::LearnerStats stats = server.stats();
  if (report.episodes_completed != 2 || buffer.size() != report.experiences_sent ||
      stats.sessions_dropped != hostile || stats.sessions_closed != 1)
    problems.push_back("live learner: dropped " + std::to_string(stats.sessions_dropped) + "/" +
                       std::to_string(hostile) + ", closed " + std::to_string(stats.sessions_closed) +
                       ", buffered " + std::to_string(buffer.size()) + "/" + std::to_string(report.experiences_sent));

  std::string detail = "4 checkpoints, " + std::to_string(messages) + " wire messages bit-identical, 20000 fuzzed frames, " +
                       std::to_string(hostile) + " hostile sessions";
  for (const auto& p : problems) detail += "; bad " + p;
  return {problems.empty(), detail};
}

// ---------------------------------------------------------------- 7

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Verdict train_determinism(const fs::path& work) {
  RunConfig c;
  c.run.algorithm = Algorithm::td3;
  c.run.seed = 17;
  c.run.episodes = 4;
  c.run.checkpoint_interval = 2;
  c.run.workers = 1;
  c.scenario.time_limit = 150;
  c.scenario.cylinder_obstacle_count = 2;
  c.scenario.max_failure_fraction = 0.5;
  c.hyper.batch_size = 32;
  c.hyper.replay_capacity = 10000;
  fs::remove_all(work / "det-a");
  fs::remove_all(work / "det-b");
  train(c, work / "det-a");
  train(c, work / "det-b");
  const std::string a = slurp(work / "det-a" / "metrics.log");
  const std::string b = slurp(work / "det-b" / "metrics.log");
  const bool models = slurp(work / "det-a" / "checkpoints" / "final.ckpt") ==
                      slurp(work / "det-b" / "checkpoints" / "final.ckpt");
  const auto lines = std::count(a.begin(), a.end(), '\n');
  return {!a.empty() && a == b && models && lines == c.run.episodes,
          std::to_string(lines) + " metrics lines " + (a == b ? "identical" : "differ") + ", final models " +
              (models ? "identical" : "differ")};
}

// ---------------------------------------------------------------- scripted oracle

Verdict scripted_oracle(const fs::path&) {
  ScriptedPolicy policy;
  ScenarioConfig s;
  s.robot_count = 4;
  EvaluationOptions o;
  o.trials = 100;
  o.seed = 808;
  const EvaluationReport r = evaluate(policy, s, o);
  std::int64_t longest = 0;
  for (const auto& t : r.per_trial) longest = std::max(longest, t.ticks);
  return {r.successes == 100, std::to_string(r.successes) + "/100 successes, mean length " +
                                  fmt(r.mean_episode_length.value_or(0.0)) + " ticks, longest " +
                                  std::to_string(longest)};
}

// ---------------------------------------------------------------- 8-11

struct TrainedModel {
  Algorithm algorithm;
  Network acting;
  fs::path checkpoint;
};

TrainedModel train_and_select(const RunConfig& config, const fs::path& dir) {
  std::cerr << "training " << dir.filename().string() << "\n";
  const auto start = std::chrono::steady_clock::now();
  // Only a finished run is reused; an interrupted one starts over.
  if (!fs::exists(dir / "checkpoints" / "final.ckpt")) {
    fs::remove_all(dir);
    train(config, dir);
  }
  const CheckpointScore best = select_best_checkpoint(dir, config.run.validation_episodes);
  const Checkpoint ckpt = load_checkpoint(best.path);
  std::cerr << "  best " << best.path.filename().string() << " (validation " << best.success_rate << ") after "
            << std::chrono::duration_cast<std::chrono::minutes>(std::chrono::steady_clock::now() - start).count()
            << " min\n";
  return {config.run.algorithm, ckpt.agent.acting_network(), best.path};
}

double success(const TrainedModel& m, const ScenarioConfig& s, int trials = 100) {
  EvaluationOptions o;
  o.trials = trials;
  o.seed = mix_seed(4242, seed_stream::kEvaluation);
  return evaluate(m.algorithm, m.acting, s, o).success_rate.value_or(0.0);
}

RunConfig learning_config(Algorithm algorithm, std::uint64_t seed, int episodes) {
  RunConfig c;
  c.run.algorithm = algorithm;
  c.run.seed = seed;
  c.run.episodes = episodes;
  c.run.checkpoint_interval = 10;
  c.run.validation_episodes = 20;
  return c;
}

// Shared between criteria 8 and 9: per algorithm, the first passing seed's
// model (or the last tried one).
struct BaseModels {
  std::map<Algorithm, std::pair<TrainedModel, double>> models;
};

BaseModels& base_models() {
  static BaseModels b;
  return b;
}

std::pair<TrainedModel, double> base_model(Algorithm a, const fs::path& work) {
  auto& cache = base_models().models;
  if (auto it = cache.find(a); it != cache.end()) return it->second;
  std::optional<std::pair<TrainedModel, double>> last;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const RunConfig c = learning_config(a, seed, 300);
    TrainedModel m = train_and_select(c, work / (std::string(to_string(a)) + "-r4-s" + std::to_string(seed)));
    const double rate = success(m, c.scenario);
    std::cerr << "  " << to_string(a) << " seed " << seed << ": " << rate << "\n";
    last.emplace(std::move(m), rate);
    if (rate >= 0.8) break;
  }
  cache.emplace(a, *last);
  return *last;
}

Verdict learning_base(const fs::path& work) {
  std::string detail;
  bool pass = true;
  for (Algorithm a : {Algorithm::ddpg, Algorithm::td3}) {
    const auto [model, rate] = base_model(a, work);
    pass = pass && rate >= 0.8;
    detail += std::string(to_string(a)) + " " + fmt(100 * rate) + "% (" + model.checkpoint.filename().string() + ") ";
  }
  return {pass, detail + "; need >= 80%"};
}

Verdict learning_scaling(const fs::path& work) {
  std::string detail;
  bool pass = true;
  for (Algorithm a : {Algorithm::ddpg, Algorithm::td3}) {
    const auto [model, rate4] = base_model(a, work);
    ScenarioConfig eight;
    eight.robot_count = 8;
    const double rate8 = success(model, eight);
    pass = pass && (rate4 - rate8) < 0.2;
    detail += std::string(to_string(a)) + " 4 robots " + fmt(100 * rate4) + "% vs 8 robots " + fmt(100 * rate8) + "% ";
  }
  return {pass, detail + "; need drop < 20 points"};
}

Verdict learning_resilience(const fs::path& work) {
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    RunConfig c = learning_config(Algorithm::ddpg, seed, 300);
    c.scenario.max_failure_fraction = 0.5;
    const TrainedModel m = train_and_select(c, work / ("ddpg-r4-f50-s" + std::to_string(seed)));
    ScenarioConfig half = c.scenario, three_quarters = c.scenario;
    three_quarters.max_failure_fraction = 0.75;
    const double r50 = success(m, half), r75 = success(m, three_quarters);
    detail += "seed " + std::to_string(seed) + ": 50% failures " + fmt(100 * r50) + "% vs 75% " + fmt(100 * r75) + "%; ";
    if (r50 > r75) return {true, detail};
  }
  return {false, detail};
}

Verdict learning_curriculum(const fs::path& work) {
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    RunConfig c = learning_config(Algorithm::td3, seed, 1000);
    c.scenario.gate_enabled = true;
    c.scenario.gate_opening = minimum_gate_opening(c.scenario);
    c.run.curriculum = true;
    RunConfig flat = c;
    flat.run.curriculum = false;
    const TrainedModel with = train_and_select(c, work / ("td3-gate-curriculum-s" + std::to_string(seed)));
    const TrainedModel without = train_and_select(flat, work / ("td3-gate-flat-s" + std::to_string(seed)));
    const double rc = success(with, c.scenario), rf = success(without, c.scenario);
    detail += "seed " + std::to_string(seed) + ": curriculum " + fmt(100 * rc) + "% vs none " + fmt(100 * rf) + "%; ";
    if (rc >= 0.5 && rc > rf) return {true, detail};
  }
  return {false, detail + "need >= 50% and strictly better"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string work_dir = (fs::temp_directory_path() / "aggrl-acceptance").string();
  bool learning = false, learning_only = false;
  std::vector<std::string> only;
  app.add_option("--work-dir", work_dir, "Scratch directory for runs and checkpoints");
  app.add_flag("--learning", learning, "Also run the multi-hour learning criteria");
  app.add_flag("--learning-only", learning_only, "Run only the learning criteria");
  app.add_option("--only", only, "Run only these criterion ids")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria{
      {"1", "gradient-check", false, gradient_check},
      {"2", "target-oracles", false, target_oracles},
      {"3", "reward-bounds", false, reward_bounds},
      {"4", "physics-invariants", false, physics_invariants},
      {"5", "ring-epsilon-decode", false, buffer_epsilon_decode},
      {"6", "round-trips-and-fuzz", false, round_trips_and_fuzz},
      {"7", "train-determinism", false, train_determinism},
      {"S", "scripted-oracle", false, scripted_oracle},
      {"8", "learning-ddpg-td3-4-robots", true, learning_base},
      {"9", "learning-scaling-8-robots", true, learning_scaling},
      {"10", "learning-resilience", true, learning_resilience},
      {"11", "learning-gate-curriculum", true, learning_curriculum},
  };

  const fs::path work(work_dir);
  fs::create_directories(work);
  int failures = 0, ran = 0;
  const auto suite_start = std::chrono::steady_clock::now();
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    if (only.empty() && c.learning && !(learning || learning_only)) continue;
    if (only.empty() && !c.learning && learning_only) continue;
    ++ran;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run(work);
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!v.pass) ++failures;
    std::cout << (v.pass ? "PASS " : "FAIL ") << c.id << " " << c.name << " (" << fmt(seconds) << " s): " << v.detail
              << std::endl;
  }
  const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - suite_start).count();
  std::cout << ran - failures << "/" << ran << " criteria passed in " << fmt(total) << " s" << std::endl;
  return failures == 0 ? 0 : 1;
}
