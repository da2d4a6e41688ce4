#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>

#include "aggrl/agent.hpp"
#include "aggrl/queue.hpp"
#include "aggrl/trainer.hpp"
#include "aggrl/wire.hpp"

namespace aggrl::wire {

using Millis = std::chrono::milliseconds;

/// Socket failure, timeout or an unexpected end of stream.
class TransportError : public std::runtime_error {
 public:
  TransportError(const std::string& what, bool timeout = false) : std::runtime_error(what), timeout_(timeout) {}
  bool timeout() const noexcept { return timeout_; }

 private:
  bool timeout_;
};

/// The learner answered HELLO with BYE.
class SessionRefused : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
};

/// "host:port"; throws ConfigError.
Endpoint parse_endpoint(std::string_view text);
std::string to_string(const Endpoint& e);

/// One TCP stream carrying frames.
class Connection {
 public:
  Connection() = default;
  explicit Connection(int fd);
  Connection(Connection&& other) noexcept;
  Connection& operator=(Connection&& other) noexcept;
  Connection(const Connection&) = delete;
  Connection& operator=(const Connection&) = delete;
  ~Connection();

  static Connection connect(const Endpoint& endpoint, Millis timeout);

  /// Receive timeout; zero disables it.
  void set_timeout(Millis timeout);

  void send(const Message& m);
  void send_raw(std::span<const std::byte> bytes);

  /// Throws ProtocolError on a malformed frame, TransportError on I/O
  /// failure, timeout, or end of stream.
  Message receive();

  /// Unblocks a thread waiting in receive().
  void shutdown();
  bool valid() const { return fd_ >= 0; }

 private:
  void read_exact(std::byte* out, std::size_t n);

  int fd_ = -1;
};

struct LearnerOptions {
  Endpoint endpoint;        // port 0 picks an ephemeral port
  Millis session_timeout{30000};
  bool learn = true;        // one learn step per received experience batch
  std::uint64_t seed = 0;   // acting randomness of each session
  std::size_t queue_capacity = 256;
};

struct LearnerStats {
  int sessions_accepted = 0;
  int sessions_refused = 0;
  int sessions_dropped = 0;  // malformed frame, timeout, unexpected message
  int sessions_closed = 0;   // clean BYE
  std::size_t experiences_received = 0;
  std::size_t experiences_inserted = 0;
  int episodes_completed = 0;
};

/// Accepts worker sessions, answers observation batches with actions from
/// the session's current model snapshot and funnels experiences through a
/// single queue into the replay buffer, which only the learner thread touches.
class LearnerServer {
 public:
  using EpisodeCallback = std::function<void(const EpisodeSummary&)>;

  LearnerServer(Agent& agent, ReplayBuffer& buffer, LearnerOptions options);
  ~LearnerServer();
  LearnerServer(const LearnerServer&) = delete;
  LearnerServer& operator=(const LearnerServer&) = delete;

  /// Invoked on the learner thread for each finished worker episode.
  void on_episode(EpisodeCallback callback) { episode_callback_ = std::move(callback); }

  /// Binds and listens; throws TransportError on failure.
  void start();
  std::uint16_t port() const { return port_; }

  /// Blocks until `n` episodes have been reported in total, or `timeout`
  /// elapses. Returns whether the count was reached.
  bool wait_for_episodes(int n, Millis timeout);

  /// Stops accepting, closes open sessions and drains the queue into the
  /// buffer. Idempotent.
  void stop();

  LearnerStats stats() const;

 private:
  struct Session;
  struct Item {
    std::vector<Experience> experiences;
    std::optional<EpisodeSummary> finished;
  };

  void accept_loop();
  void learner_loop();
  void serve(Session& session);
  ModelSnapshot snapshot();
  void reap_sessions(bool all);

  Agent& agent_;
  ReplayBuffer& buffer_;
  LearnerOptions options_;
  EpisodeCallback episode_callback_;

  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  bool stopped_ = false;
  BlockingQueue<Item> queue_;

  std::mutex agent_mutex_;  // agent and buffer
  mutable std::mutex stats_mutex_;
  std::condition_variable episodes_cv_;
  LearnerStats stats_;

  std::mutex sessions_mutex_;
  std::list<std::unique_ptr<Session>> sessions_;
  std::uint64_t session_counter_ = 0;

  std::thread accept_thread_;
  std::thread learner_thread_;
};

struct WorkerOptions {
  int episodes = 1;
  std::uint64_t seed = 0;  // scenario k uses mix_seed(seed, 1'000'000 + k)
  std::string worker_id = "worker";
  int max_retries = 5;
  Millis initial_backoff{100};
  Millis timeout{30000};
};

struct WorkerReport {
  int episodes_completed = 0;
  std::size_t experiences_sent = 0;
  std::int64_t ticks = 0;
  int reconnects = 0;
  std::uint64_t last_snapshot_learn_steps = 0;
};

/// Runs `options.episodes` episodes of `scenario`, acting through the
/// learner. Connection failures and timeouts reconnect with exponential
/// backoff and restart the interrupted episode. Throws SessionRefused when
/// the learner rejects HELLO, TransportError once retries are exhausted.
WorkerReport run_worker(const Endpoint& endpoint, const ScenarioConfig& scenario, const WorkerOptions& options);

}  // namespace aggrl::wire
