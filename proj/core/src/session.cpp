#include "aggrl/session.hpp"

#include <array>
#include <arpa/inet.h>
#include <cerrno>
#include <charconv>
#include <cstring>
#include <utility>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include "aggrl/errors.hpp"

namespace aggrl::wire {
namespace {

std::string errno_text(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

timeval to_timeval(Millis ms) {
  timeval tv{};
  tv.tv_sec = static_cast<time_t>(ms.count() / 1000);
  tv.tv_usec = static_cast<suseconds_t>((ms.count() % 1000) * 1000);
  return tv;
}

sockaddr_in resolve(const Endpoint& e) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* result = nullptr;
  const int rc = ::getaddrinfo(e.host.c_str(), nullptr, &hints, &result);
  if (rc != 0 || result == nullptr) throw TransportError("cannot resolve " + e.host + ": " + gai_strerror(rc));
  sockaddr_in addr = *reinterpret_cast<const sockaddr_in*>(result->ai_addr);
  ::freeaddrinfo(result);
  addr.sin_port = htons(e.port);
  return addr;
}

template <typename T>
const T& expect(const Message& m, const char* context) {
  if (const auto* p = std::get_if<T>(&m)) return *p;
  throw ProtocolError(std::string("unexpected ") + to_string(type_of(m)) + " " + context, 6);
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

Endpoint parse_endpoint(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos || colon == 0 || colon + 1 == text.size())
    throw ConfigError("endpoint '" + std::string(text) + "' must be host:port");
  unsigned port = 0;
  const auto digits = text.substr(colon + 1);
  const auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), port);
  if (ec != std::errc{} || end != digits.data() + digits.size() || port > 65535)
    throw ConfigError("endpoint '" + std::string(text) + "' has an invalid port");
  return Endpoint{std::string(text.substr(0, colon)), static_cast<std::uint16_t>(port)};
}

std::string to_string(const Endpoint& e) { return e.host + ":" + std::to_string(e.port); }

Connection::Connection(int fd) : fd_(fd) {
  const int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

Connection::Connection(Connection&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}

Connection& Connection::operator=(Connection&& other) noexcept {
  if (this != &other) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = std::exchange(other.fd_, -1);
  }
  return *this;
}

Connection::~Connection() {
  if (fd_ >= 0) ::close(fd_);
}

Connection Connection::connect(const Endpoint& endpoint, Millis timeout) {
  const sockaddr_in addr = resolve(endpoint);
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw TransportError(errno_text("socket"));
  Connection c(fd);
  const timeval tv = to_timeval(timeout);
  ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
  if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0)
    throw TransportError(errno_text(("connect to " + to_string(endpoint)).c_str()), errno == ETIMEDOUT);
  c.set_timeout(timeout);
  return c;
}

void Connection::set_timeout(Millis timeout) {
  const timeval tv = to_timeval(timeout);
  ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
}

void Connection::send_raw(std::span<const std::byte> bytes) {
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    const ssize_t n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError(errno_text("send"), errno == EAGAIN || errno == EWOULDBLOCK);
    }
    sent += static_cast<std::size_t>(n);
  }
}

void Connection::send(const Message& m) { send_raw(encode(m)); }

void Connection::read_exact(std::byte* out, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    const ssize_t r = ::recv(fd_, out + got, n - got, 0);
    if (r == 0) throw TransportError("connection closed by peer");
    if (r < 0) {
      if (errno == EINTR) continue;
      const bool timed_out = errno == EAGAIN || errno == EWOULDBLOCK;
      throw TransportError(timed_out ? "receive timed out" : errno_text("recv"), timed_out);
    }
    got += static_cast<std::size_t>(r);
  }
}

Message Connection::receive() {
  std::array<std::byte, kHeaderSize> header;
  read_exact(header.data(), header.size());
  const FrameHeader h = decode_header(header);
  std::vector<std::byte> body(static_cast<std::size_t>(h.payload_length) + kTrailerSize);
  read_exact(body.data(), body.size());
  return decode_body(h, body);
}

void Connection::shutdown() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

// ---------------------------------------------------------------- learner

struct LearnerServer::Session {
  std::uint64_t id = 0;
  Connection connection;
  std::thread thread;
  std::atomic<bool> finished{false};
};

LearnerServer::LearnerServer(Agent& agent, ReplayBuffer& buffer, LearnerOptions options)
    : agent_(agent), buffer_(buffer), options_(std::move(options)), queue_(options_.queue_capacity) {}

LearnerServer::~LearnerServer() { stop(); }

void LearnerServer::start() {
  if (listen_fd_ >= 0) throw UsageError("LearnerServer::start called twice");
  const sockaddr_in addr = resolve(options_.endpoint);
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw TransportError(errno_text("socket"));
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(listen_fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0 || ::listen(listen_fd_, 16) != 0) {
    const std::string why = errno_text(("listen on " + to_string(options_.endpoint)).c_str());
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw TransportError(why);
  }
  sockaddr_in bound{};
  socklen_t len = sizeof bound;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
  learner_thread_ = std::thread([this] { learner_loop(); });
  accept_thread_ = std::thread([this] { accept_loop(); });
}

void LearnerServer::accept_loop() {
  while (!stopping_) {
    pollfd p{listen_fd_, POLLIN, 0};
    const int ready = ::poll(&p, 1, 50);
    reap_sessions(false);
    if (ready <= 0 || stopping_) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    auto session = std::make_unique<Session>();
    session->connection = Connection(fd);
    session->connection.set_timeout(options_.session_timeout);
    std::lock_guard lock(sessions_mutex_);
    session->id = session_counter_++;
    Session& s = *session;
    sessions_.push_back(std::move(session));
    s.thread = std::thread([this, &s] {
      serve(s);
      s.finished = true;
    });
  }
}

void LearnerServer::reap_sessions(bool all) {
  std::list<std::unique_ptr<Session>> done;
  {
    std::lock_guard lock(sessions_mutex_);
    for (auto it = sessions_.begin(); it != sessions_.end();) {
      if (all || (*it)->finished) {
        if (all) (*it)->connection.shutdown();
        done.splice(done.end(), sessions_, it++);
      } else {
        ++it;
      }
    }
  }
  for (auto& s : done)
    if (s->thread.joinable()) s->thread.join();
}

ModelSnapshot LearnerServer::snapshot() {
  std::lock_guard lock(agent_mutex_);
  // Weights only: the optimizer state stays with the learner.
  return ModelSnapshot{agent_.algorithm(), agent_.learn_steps(), agent_.epsilon(),
                       Network(agent_.acting_network().layers())};
}

void LearnerServer::serve(Session& session) {
  auto bump = [&](int LearnerStats::* field) {
    std::lock_guard lock(stats_mutex_);
    ++(stats_.*field);
  };
  Connection& conn = session.connection;
  try {
    const Hello hello = expect<Hello>(conn.receive(), "before HELLO");
    if (hello.layout_version != kObservationLayoutVersion) {
      conn.send(Bye{"observation layout version " + std::to_string(hello.layout_version) +
                    " does not match the learner's " + std::to_string(kObservationLayoutVersion)});
      bump(&LearnerStats::sessions_refused);
      return;
    }
    if (hello.robot_count == 0) {
      conn.send(Bye{"robot count must be positive"});
      bump(&LearnerStats::sessions_refused);
      return;
    }
    bump(&LearnerStats::sessions_accepted);

    Rng rng(mix_seed(options_.seed, 100 + session.id));
    const double sigma = agent_.hyperparameters().exploration_noise_sigma;
    ModelSnapshot current = snapshot();
    conn.send(current);

    for (;;) {
      const Message m = conn.receive();
      if (const auto* obs = std::get_if<ObsBatch>(&m)) {
        ActionBatch reply{obs->episode, obs->tick, {}};
        if (!obs->observations.empty())
          reply.actions = act(current.algorithm, current.network, observation_matrix(obs->observations),
                              current.epsilon, sigma, rng);
        conn.send(reply);
      } else if (const auto* batch = std::get_if<ExperienceBatch>(&m)) {
        {
          std::lock_guard lock(stats_mutex_);
          stats_.experiences_received += batch->experiences.size();
        }
        if (!queue_.push(Item{batch->experiences, std::nullopt})) return;
      } else if (const auto* event = std::get_if<EpisodeEvent>(&m)) {
        if (event->kind == EpisodeEventKind::end) {
          EpisodeSummary s;
          s.episode = static_cast<int>(event->episode);
          s.ticks = event->ticks;
          s.outcome = event->outcome;
          s.mean_cumulative_reward = event->mean_reward;
          s.failures = event->failures;
          if (!queue_.push(Item{{}, s})) return;
          current = snapshot();
          conn.send(current);
        }
      } else if (std::holds_alternative<Bye>(m)) {
        conn.send(Bye{"goodbye"});
        bump(&LearnerStats::sessions_closed);
        return;
      } else {
        throw ProtocolError(std::string("unexpected ") + to_string(type_of(m)) + " from worker", 6);
      }
    }
  } catch (const std::exception&) {
    // Malformed frames, timeouts and disconnects end this session only.
    bump(&LearnerStats::sessions_dropped);
  }
}

void LearnerServer::learner_loop() {
  Rng rng(mix_seed(options_.seed, 2));
  while (auto item = queue_.pop()) {
    if (item->finished) {
      EpisodeSummary s = *item->finished;
      {
        std::lock_guard lock(agent_mutex_);
        s.epsilon = agent_.epsilon();
        s.learn_steps = agent_.learn_steps();
      }
      if (episode_callback_) episode_callback_(s);
      {
        std::lock_guard lock(stats_mutex_);
        ++stats_.episodes_completed;
      }
      episodes_cv_.notify_all();
      continue;
    }
    std::lock_guard lock(agent_mutex_);
    for (auto& e : item->experiences) buffer_.push(std::move(e));
    if (options_.learn) agent_.learn_step(buffer_, rng);
    std::lock_guard stats_lock(stats_mutex_);
    stats_.experiences_inserted += item->experiences.size();
  }
}

bool LearnerServer::wait_for_episodes(int n, Millis timeout) {
  std::unique_lock lock(stats_mutex_);
  return episodes_cv_.wait_for(lock, timeout, [&] { return stats_.episodes_completed >= n; });
}

void LearnerServer::stop() {
  if (stopped_ || listen_fd_ < 0) return;
  stopped_ = true;
  stopping_ = true;
  if (accept_thread_.joinable()) accept_thread_.join();
  ::close(listen_fd_);
  reap_sessions(true);
  queue_.close();
  if (learner_thread_.joinable()) learner_thread_.join();
}

LearnerStats LearnerServer::stats() const {
  std::lock_guard lock(stats_mutex_);
  return stats_;
}

// ----------------------------------------------------------------- worker

namespace {

struct EpisodeOutcome {
  std::size_t experiences = 0;
  std::int64_t ticks = 0;
  std::uint64_t learn_steps = 0;
};

EpisodeOutcome run_remote_episode(Connection& conn, EpisodeState state, std::uint64_t episode) {
  conn.send(EpisodeEvent{episode, EpisodeEventKind::start, Terminal::running, 0, 0.0, 0});
  EpisodeOutcome out;
  while (state.terminal == Terminal::running) {
    ObsBatch obs{episode, state.world.tick, {}, {}};
    for (int i : acting_robots(state)) {
      obs.robots.push_back(i);
      obs.observations.push_back(state.observations[static_cast<std::size_t>(i)]);
    }
    conn.send(obs);
    const ActionBatch reply = expect<ActionBatch>(conn.receive(), "while waiting for actions");
    if (reply.episode != episode || reply.tick != obs.tick || reply.actions.size() != obs.robots.size())
      throw ProtocolError("action batch does not answer the last observation batch", 0);
    StepResult step = env_step(state, reply.actions);
    out.experiences += step.experiences.size();
    conn.send(ExperienceBatch{episode, obs.tick, std::move(step.experiences)});
  }
  out.ticks = state.world.tick;
  conn.send(EpisodeEvent{episode, EpisodeEventKind::end, state.terminal, state.world.tick,
                         mean(state.cumulative_rewards), static_cast<std::int32_t>(state.failure_schedule.size())});
  out.learn_steps = expect<ModelSnapshot>(conn.receive(), "after episode end").learn_steps;
  return out;
}

Connection open_session(const Endpoint& endpoint, const ScenarioConfig& scenario, const WorkerOptions& options,
                        std::uint64_t& learn_steps) {
  Connection conn = Connection::connect(endpoint, options.timeout);
  conn.send(Hello{kObservationLayoutVersion, static_cast<std::uint32_t>(scenario.robot_count), options.worker_id});
  const Message reply = conn.receive();
  if (const auto* bye = std::get_if<Bye>(&reply)) throw SessionRefused("learner refused session: " + bye->reason);
  learn_steps = expect<ModelSnapshot>(reply, "in reply to HELLO").learn_steps;
  return conn;
}

}  // namespace

WorkerReport run_worker(const Endpoint& endpoint, const ScenarioConfig& scenario, const WorkerOptions& options) {
  validate(scenario);
  if (options.episodes < 0) throw ConfigError("worker: episodes must be >= 0");
  WorkerReport report;
  Millis backoff = options.initial_backoff;
  int failures = 0;
  Connection conn;

  auto retry = [&](const std::exception& e) {
    if (++failures > options.max_retries)
      throw TransportError(std::string("giving up after ") + std::to_string(options.max_retries) +
                           " retries: " + e.what());
    conn = Connection();
    std::this_thread::sleep_for(backoff);
    backoff *= 2;
    ++report.reconnects;
  };

  int episode = 0;
  while (episode < options.episodes || conn.valid()) {
    try {
      if (!conn.valid()) conn = open_session(endpoint, scenario, options, report.last_snapshot_learn_steps);
      if (episode == options.episodes) {
        conn.send(Bye{"done"});
        expect<Bye>(conn.receive(), "in reply to BYE");
        conn = Connection();
        break;
      }
      EpisodeState state =
          generate_with_retry(scenario, mix_seed(options.seed, seed_stream::kScenarioBase + episode));
      const EpisodeOutcome o = run_remote_episode(conn, std::move(state), static_cast<std::uint64_t>(episode));
      report.experiences_sent += o.experiences;
      report.ticks += o.ticks;
      report.last_snapshot_learn_steps = o.learn_steps;
      ++report.episodes_completed;
      ++episode;
      backoff = options.initial_backoff;
    } catch (const TransportError& e) {
      retry(e);
    } catch (const ProtocolError& e) {
      retry(e);
    }
  }
  return report;
}

}  // namespace aggrl::wire
