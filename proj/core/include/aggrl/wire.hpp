#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "aggrl/algos.hpp"
#include "aggrl/env.hpp"
#include "aggrl/experience.hpp"
#include "aggrl/nn.hpp"

namespace aggrl::wire {

/// Frame: "AGRL" | u16 version | u8 type | u32 payload length | payload | u32 CRC32(payload).
/// All integers and reals little-endian; layouts in docs/formats.md.
inline constexpr std::uint16_t kVersion = 1;
inline constexpr std::size_t kHeaderSize = 11;
inline constexpr std::size_t kTrailerSize = 4;
inline constexpr std::uint32_t kMaxPayload = 64u << 20;

enum class MessageType : std::uint8_t {
  obs_batch = 1,
  action_batch = 2,
  experience_batch = 3,
  model_snapshot = 4,
  episode_event = 5,
  hello = 6,
  bye = 7,
};

struct ObsBatch {
  std::uint64_t episode = 0;
  std::int64_t tick = 0;
  std::vector<std::int32_t> robots;
  std::vector<Observation> observations;  // one per entry of `robots`
  bool operator==(const ObsBatch&) const = default;
};

struct ActionBatch {
  std::uint64_t episode = 0;
  std::int64_t tick = 0;
  std::vector<Action> actions;
  bool operator==(const ActionBatch&) const = default;
};

struct ExperienceBatch {
  std::uint64_t episode = 0;
  std::int64_t tick = 0;
  std::vector<Experience> experiences;
  bool operator==(const ExperienceBatch&) const = default;
};

struct ModelSnapshot {
  Algorithm algorithm = Algorithm::td3;
  std::uint64_t learn_steps = 0;
  double epsilon = 0.0;
  Network network;
  bool operator==(const ModelSnapshot&) const = default;
};

enum class EpisodeEventKind : std::uint8_t { start = 0, end = 1 };

struct EpisodeEvent {
  std::uint64_t episode = 0;
  EpisodeEventKind kind = EpisodeEventKind::start;
  Terminal outcome = Terminal::running;
  std::int64_t ticks = 0;
  double mean_reward = 0.0;
  std::int32_t failures = 0;
  bool operator==(const EpisodeEvent&) const = default;
};

struct Hello {
  std::uint16_t layout_version = kObservationLayoutVersion;
  std::uint32_t robot_count = 0;
  std::string worker_id;
  bool operator==(const Hello&) const = default;
};

struct Bye {
  std::string reason;
  bool operator==(const Bye&) const = default;
};

using Message = std::variant<ObsBatch, ActionBatch, ExperienceBatch, ModelSnapshot, EpisodeEvent, Hello, Bye>;

MessageType type_of(const Message& m);
const char* to_string(MessageType t);

std::vector<std::byte> encode(const Message& m);

/// Decodes exactly one frame occupying all of `frame`. Throws ProtocolError
/// (with the byte offset of the problem) on bad magic, version mismatch,
/// unknown type, length mismatch, checksum failure, truncation, trailing
/// bytes or an invalid field.
Message decode(std::span<const std::byte> frame);

struct FrameHeader {
  MessageType type;
  std::uint32_t payload_length;
};

/// Validates the fixed-size header; `header` must hold kHeaderSize bytes.
FrameHeader decode_header(std::span<const std::byte> header);

/// Decodes a payload whose header has already been validated. `body` holds
/// the payload followed by the checksum; offsets are reported relative to
/// the start of the frame.
Message decode_body(const FrameHeader& header, std::span<const std::byte> body);

std::uint32_t crc32(std::span<const std::byte> data);

}  // namespace aggrl::wire
