#include "aggrl/wire.hpp"

#include <algorithm>
#include <cmath>

#include <zlib.h>

#include "aggrl/bytes.hpp"
#include "aggrl/errors.hpp"

namespace aggrl::wire {
namespace {

constexpr char kMagic[4] = {'A', 'G', 'R', 'L'};
constexpr std::uint32_t kMaxCount = 1u << 20;

enum : std::uint8_t { kDiscreteTag = 0, kContinuousTag = 1 };

void put_observation(ByteWriter& w, const Observation& o) {
  for (double v : o) w.f64(v);
}

Observation get_observation(ByteReader& r) {
  Observation o;
  for (double& v : o) v = r.f64();
  return o;
}

void put_action(ByteWriter& w, const Action& a) {
  if (const auto* d = std::get_if<DiscreteAction>(&a)) {
    w.u8(kDiscreteTag);
    w.u8(static_cast<std::uint8_t>(d->index));
  } else {
    const auto& c = std::get<WheelDelta>(a);
    w.u8(kContinuousTag);
    w.f64(c.left);
    w.f64(c.right);
  }
}

Action get_action(ByteReader& r) {
  const std::size_t at = r.offset();
  switch (r.u8()) {
    case kDiscreteTag: {
      const std::size_t index_at = r.offset();
      const int index = r.u8();
      if (index >= kDiscreteActions) throw ProtocolError("discrete action index out of range", index_at);
      return DiscreteAction{index};
    }
    case kContinuousTag: {
      const std::size_t value_at = r.offset();
      WheelDelta d{r.f64(), r.f64()};
      if (!(std::abs(d.left) <= kMaxWheelDelta && std::abs(d.right) <= kMaxWheelDelta))
        throw ProtocolError("wheel delta out of range", value_at);
      return d;
    }
    default:
      throw ProtocolError("unknown action tag", at);
  }
}

std::uint32_t get_count(ByteReader& r) {
  const std::size_t at = r.offset();
  const std::uint32_t n = r.u32();
  if (n > kMaxCount) throw ProtocolError("element count too large", at);
  return n;
}

void put_payload(ByteWriter& w, const ObsBatch& m) {
  if (m.robots.size() != m.observations.size()) throw UsageError("ObsBatch: robots/observations size mismatch");
  w.u64(m.episode);
  w.u64(static_cast<std::uint64_t>(m.tick));
  w.u32(static_cast<std::uint32_t>(m.robots.size()));
  for (std::size_t i = 0; i < m.robots.size(); ++i) {
    w.i32(m.robots[i]);
    put_observation(w, m.observations[i]);
  }
}

void put_payload(ByteWriter& w, const ActionBatch& m) {
  w.u64(m.episode);
  w.u64(static_cast<std::uint64_t>(m.tick));
  w.u32(static_cast<std::uint32_t>(m.actions.size()));
  for (const auto& a : m.actions) put_action(w, a);
}

void put_payload(ByteWriter& w, const ExperienceBatch& m) {
  w.u64(m.episode);
  w.u64(static_cast<std::uint64_t>(m.tick));
  w.u32(static_cast<std::uint32_t>(m.experiences.size()));
  for (const auto& e : m.experiences) {
    put_observation(w, e.observation);
    put_action(w, e.action);
    w.f64(e.reward);
    put_observation(w, e.next_observation);
    w.u8(e.terminal ? 1 : 0);
  }
}

void put_payload(ByteWriter& w, const ModelSnapshot& m) {
  w.u8(static_cast<std::uint8_t>(m.algorithm));
  w.u64(m.learn_steps);
  w.f64(m.epsilon);
  write_network(w, m.network);
}

void put_payload(ByteWriter& w, const EpisodeEvent& m) {
  w.u64(m.episode);
  w.u8(static_cast<std::uint8_t>(m.kind));
  w.u8(static_cast<std::uint8_t>(m.outcome));
  w.u64(static_cast<std::uint64_t>(m.ticks));
  w.f64(m.mean_reward);
  w.i32(m.failures);
}

void put_payload(ByteWriter& w, const Hello& m) {
  w.u16(m.layout_version);
  w.u32(m.robot_count);
  w.string(m.worker_id);
}

void put_payload(ByteWriter& w, const Bye& m) { w.string(m.reason); }

ObsBatch get_obs_batch(ByteReader& r) {
  ObsBatch m;
  m.episode = r.u64();
  m.tick = static_cast<std::int64_t>(r.u64());
  const std::uint32_t n = get_count(r);
  r.require(static_cast<std::size_t>(n) * (4 + 8 * kObservationSize));
  m.robots.reserve(n);
  m.observations.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    m.robots.push_back(r.i32());
    m.observations.push_back(get_observation(r));
  }
  return m;
}

ActionBatch get_action_batch(ByteReader& r) {
  ActionBatch m;
  m.episode = r.u64();
  m.tick = static_cast<std::int64_t>(r.u64());
  const std::uint32_t n = get_count(r);
  r.require(static_cast<std::size_t>(n) * 2);
  m.actions.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) m.actions.push_back(get_action(r));
  return m;
}

ExperienceBatch get_experience_batch(ByteReader& r) {
  ExperienceBatch m;
  m.episode = r.u64();
  m.tick = static_cast<std::int64_t>(r.u64());
  const std::uint32_t n = get_count(r);
  r.require(static_cast<std::size_t>(n) * (2 * 8 * kObservationSize + 2 + 8 + 1));
  m.experiences.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    Experience e;
    e.observation = get_observation(r);
    e.action = get_action(r);
    e.reward = r.f64();
    e.next_observation = get_observation(r);
    const std::size_t at = r.offset();
    const std::uint8_t terminal = r.u8();
    if (terminal > 1) throw ProtocolError("terminal flag must be 0 or 1", at);
    e.terminal = terminal == 1;
    m.experiences.push_back(std::move(e));
  }
  return m;
}

ModelSnapshot get_model_snapshot(ByteReader& r) {
  ModelSnapshot m;
  const std::size_t at = r.offset();
  const std::uint8_t algo = r.u8();
  if (algo > static_cast<std::uint8_t>(Algorithm::td3)) throw ProtocolError("unknown algorithm", at);
  m.algorithm = static_cast<Algorithm>(algo);
  m.learn_steps = r.u64();
  m.epsilon = r.f64();
  m.network = read_network(r);
  return m;
}

EpisodeEvent get_episode_event(ByteReader& r) {
  EpisodeEvent m;
  m.episode = r.u64();
  std::size_t at = r.offset();
  const std::uint8_t kind = r.u8();
  if (kind > 1) throw ProtocolError("unknown episode event kind", at);
  m.kind = static_cast<EpisodeEventKind>(kind);
  at = r.offset();
  const std::uint8_t outcome = r.u8();
  if (outcome > 2) throw ProtocolError("unknown episode outcome", at);
  m.outcome = static_cast<Terminal>(outcome);
  m.ticks = static_cast<std::int64_t>(r.u64());
  m.mean_reward = r.f64();
  m.failures = r.i32();
  return m;
}

Hello get_hello(ByteReader& r) {
  Hello m;
  m.layout_version = r.u16();
  m.robot_count = r.u32();
  m.worker_id = r.string();
  return m;
}

Bye get_bye(ByteReader& r) { return Bye{r.string()}; }

}  // namespace

MessageType type_of(const Message& m) { return static_cast<MessageType>(m.index() + 1); }

const char* to_string(MessageType t) {
  switch (t) {
    case MessageType::obs_batch: return "OBS_BATCH";
    case MessageType::action_batch: return "ACTION_BATCH";
    case MessageType::experience_batch: return "EXPERIENCE_BATCH";
    case MessageType::model_snapshot: return "MODEL_SNAPSHOT";
    case MessageType::episode_event: return "EPISODE_EVENT";
    case MessageType::hello: return "HELLO";
    case MessageType::bye: return "BYE";
  }
  return "UNKNOWN";
}

std::uint32_t crc32(std::span<const std::byte> data) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks so large payloads are safe.
  const auto* p = reinterpret_cast<const Bytef*>(data.data());
  std::size_t left = data.size();
  while (left > 0) {
    const uInt n = static_cast<uInt>(std::min<std::size_t>(left, 1u << 30));
    crc = ::crc32(crc, p, n);
    p += n;
    left -= n;
  }
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::byte> encode(const Message& m) {
  ByteWriter w;
  for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u16(kVersion);
  w.u8(static_cast<std::uint8_t>(type_of(m)));
  w.u32(0);  // patched below
  std::visit([&](const auto& msg) { put_payload(w, msg); }, m);
  std::vector<std::byte> out = w.take();
  const std::size_t payload = out.size() - kHeaderSize;
  if (payload > kMaxPayload) throw UsageError("wire: payload exceeds the frame size limit");
  for (int i = 0; i < 4; ++i) out[7 + i] = static_cast<std::byte>((payload >> (8 * i)) & 0xFFu);
  const std::uint32_t crc = crc32(std::span(out).subspan(kHeaderSize));
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::byte>((crc >> (8 * i)) & 0xFFu));
  return out;
}

FrameHeader decode_header(std::span<const std::byte> header) {
  ByteReader r(header);
  for (int i = 0; i < 4; ++i) {
    const std::size_t at = r.offset();
    if (r.u8() != static_cast<std::uint8_t>(kMagic[i])) throw ProtocolError("bad magic", at);
  }
  const std::uint16_t version = r.u16();
  if (version != kVersion)
    throw ProtocolError("unsupported protocol version " + std::to_string(version), 4);
  const std::uint8_t type = r.u8();
  if (type < 1 || type > 7) throw ProtocolError("unknown message type " + std::to_string(type), 6);
  const std::uint32_t length = r.u32();
  if (length > kMaxPayload) throw ProtocolError("payload length exceeds limit", 7);
  return {static_cast<MessageType>(type), length};
}

Message decode_body(const FrameHeader& header, std::span<const std::byte> body) {
  const std::size_t expected = static_cast<std::size_t>(header.payload_length) + kTrailerSize;
  if (body.size() < expected) throw ProtocolError("truncated frame", kHeaderSize + body.size());
  if (body.size() > expected) throw ProtocolError("trailing bytes after frame", kHeaderSize + expected);
  const auto payload = body.first(header.payload_length);
  ByteReader trailer(body.subspan(header.payload_length), kHeaderSize + header.payload_length);
  if (trailer.u32() != crc32(payload))
    throw ProtocolError("checksum mismatch", kHeaderSize + header.payload_length);

  ByteReader r(payload, kHeaderSize);
  Message m;
  switch (header.type) {
    case MessageType::obs_batch: m = get_obs_batch(r); break;
    case MessageType::action_batch: m = get_action_batch(r); break;
    case MessageType::experience_batch: m = get_experience_batch(r); break;
    case MessageType::model_snapshot: m = get_model_snapshot(r); break;
    case MessageType::episode_event: m = get_episode_event(r); break;
    case MessageType::hello: m = get_hello(r); break;
    case MessageType::bye: m = get_bye(r); break;
  }
  if (!r.done()) throw ProtocolError("payload has trailing bytes", r.offset());
  return m;
}

Message decode(std::span<const std::byte> frame) {
  if (frame.size() < kHeaderSize) {
    ByteReader r(frame);
    for (int i = 0; i < 4 && !r.done(); ++i) {
      const std::size_t at = r.offset();
      if (r.u8() != static_cast<std::uint8_t>(kMagic[i])) throw ProtocolError("bad magic", at);
    }
    throw ProtocolError("truncated frame header", frame.size());
  }
  const FrameHeader header = decode_header(frame.first(kHeaderSize));
  return decode_body(header, frame.subspan(kHeaderSize));
}

}  // namespace aggrl::wire
