#include "aggrl/config.hpp"

#include <charconv>
#include <fstream>
#include <algorithm>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "aggrl/errors.hpp"

namespace aggrl {
namespace {

namespace pt = boost::property_tree;

using Setter = std::function<void(RunConfig&, const std::string&)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct Field {
  Setter set;
  Getter get;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& raw) {
  const std::string text = trim(raw);
  T value{};
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (text.empty() || ec != std::errc{} || ptr != last)
    throw ConfigError(key + ": expected " + (std::is_integral_v<T> ? "an integer" : "a number") + ", got '" + text + "'");
  return value;
}

bool parse_bool(const std::string& key, const std::string& raw) {
  const std::string text = trim(raw);
  if (text == "true") return true;
  if (text == "false") return false;
  throw ConfigError(key + ": expected true or false, got '" + text + "'");
}

// Shortest text that parses back to the same double.
std::string format_double(double v) {
  char buf[32];
  const auto result = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, result.ptr);
}

#define AGGRL_INT_FIELD(section, member, type)                                                      \
  Field {                                                                                           \
    [](RunConfig& c, const std::string& v) { c.section.member = parse_number<type>(#section "." #member, v); }, \
        [](const RunConfig& c) { return std::to_string(c.section.member); }                          \
  }
#define AGGRL_DOUBLE_FIELD(section, member)                                                          \
  Field {                                                                                            \
    [](RunConfig& c, const std::string& v) { c.section.member = parse_number<double>(#section "." #member, v); }, \
        [](const RunConfig& c) { return format_double(c.section.member); }                            \
  }
#define AGGRL_BOOL_FIELD(section, member)                                                            \
  Field {                                                                                            \
    [](RunConfig& c, const std::string& v) { c.section.member = parse_bool(#section "." #member, v); }, \
        [](const RunConfig& c) { return std::string(c.section.member ? "true" : "false"); }           \
  }

// Section -> ordered key list -> accessors. The order here is the order of
// the written snapshot.
const std::vector<std::pair<std::string, std::vector<std::pair<std::string, Field>>>>& schema() {
  static const std::vector<std::pair<std::string, std::vector<std::pair<std::string, Field>>>> s = {
      {"run",
       {
           {"algorithm",
            Field{[](RunConfig& c, const std::string& v) { c.run.algorithm = parse_algorithm(trim(v)); },
                  [](const RunConfig& c) { return std::string(to_string(c.run.algorithm)); }}},
           {"seed", AGGRL_INT_FIELD(run, seed, std::uint64_t)},
           {"episodes", AGGRL_INT_FIELD(run, episodes, int)},
           {"checkpoint_interval", AGGRL_INT_FIELD(run, checkpoint_interval, int)},
           {"validation_episodes", AGGRL_INT_FIELD(run, validation_episodes, int)},
           {"evaluation_trials", AGGRL_INT_FIELD(run, evaluation_trials, int)},
           {"workers", AGGRL_INT_FIELD(run, workers, int)},
           {"snapshot_refresh_ticks", AGGRL_INT_FIELD(run, snapshot_refresh_ticks, int)},
           {"curriculum", AGGRL_BOOL_FIELD(run, curriculum)},
           {"curriculum_completion", AGGRL_INT_FIELD(run, curriculum_completion, int)},
       }},
      {"scenario",
       {
           {"robot_count", AGGRL_INT_FIELD(scenario, robot_count, int)},
           {"cylinder_obstacle_count", AGGRL_INT_FIELD(scenario, cylinder_obstacle_count, int)},
           {"gate_enabled", AGGRL_BOOL_FIELD(scenario, gate_enabled)},
           {"gate_opening", AGGRL_DOUBLE_FIELD(scenario, gate_opening)},
           {"max_failure_fraction", AGGRL_DOUBLE_FIELD(scenario, max_failure_fraction)},
           {"time_limit", AGGRL_INT_FIELD(scenario, time_limit, std::int64_t)},
           {"arena_half_extent", AGGRL_DOUBLE_FIELD(scenario, arena_half_extent)},
           {"seed", AGGRL_INT_FIELD(scenario, seed, std::uint64_t)},
           {"payload_radius", AGGRL_DOUBLE_FIELD(scenario, geometry.payload_radius)},
           {"robot_radius", AGGRL_DOUBLE_FIELD(scenario, geometry.robot_radius)},
           {"axle_length", AGGRL_DOUBLE_FIELD(scenario, geometry.axle_length)},
           {"goal_threshold", AGGRL_DOUBLE_FIELD(scenario, goal_threshold)},
           {"dt", AGGRL_DOUBLE_FIELD(scenario, dt)},
           {"spawn_fraction", AGGRL_DOUBLE_FIELD(scenario, spawn_fraction)},
           {"gate_thickness", AGGRL_DOUBLE_FIELD(scenario, gate_thickness)},
           {"obstacle_radius", AGGRL_DOUBLE_FIELD(scenario, obstacle_radius)},
           {"placement_attempts", AGGRL_INT_FIELD(scenario, placement_attempts, int)},
       }},
      {"hyper",
       {
           {"gamma", AGGRL_DOUBLE_FIELD(hyper, gamma)},
           {"learning_rate", AGGRL_DOUBLE_FIELD(hyper, learning_rate)},
           {"batch_size", AGGRL_INT_FIELD(hyper, batch_size, int)},
           {"replay_capacity", AGGRL_INT_FIELD(hyper, replay_capacity, std::size_t)},
           {"epsilon_start", AGGRL_DOUBLE_FIELD(hyper, epsilon_start)},
           {"epsilon_decrement", AGGRL_DOUBLE_FIELD(hyper, epsilon_decrement)},
           {"epsilon_min", AGGRL_DOUBLE_FIELD(hyper, epsilon_min)},
           {"target_update_interval", AGGRL_INT_FIELD(hyper, target_update_interval, int)},
           {"tau", AGGRL_DOUBLE_FIELD(hyper, tau)},
           {"policy_delay", AGGRL_INT_FIELD(hyper, policy_delay, int)},
           {"target_noise_sigma", AGGRL_DOUBLE_FIELD(hyper, target_noise_sigma)},
           {"target_noise_clip", AGGRL_DOUBLE_FIELD(hyper, target_noise_clip)},
           {"exploration_noise_sigma", AGGRL_DOUBLE_FIELD(hyper, exploration_noise_sigma)},
       }},
  };
  return s;
}

#undef AGGRL_INT_FIELD
#undef AGGRL_DOUBLE_FIELD
#undef AGGRL_BOOL_FIELD

void require(bool ok, const char* key, const char* why) {
  if (!ok) throw ConfigError(std::string(key) + ": " + why);
}

}  // namespace

void validate(const RunConfig& c) {
  require(c.run.episodes >= 0, "run.episodes", "must be >= 0");
  require(c.run.checkpoint_interval >= 1, "run.checkpoint_interval", "must be >= 1");
  require(c.run.validation_episodes >= 1, "run.validation_episodes", "must be >= 1");
  require(c.run.evaluation_trials >= 0, "run.evaluation_trials", "must be >= 0");
  require(c.run.workers >= 1, "run.workers", "must be >= 1");
  require(c.run.snapshot_refresh_ticks >= 0, "run.snapshot_refresh_ticks", "must be >= 0");
  require(c.run.curriculum_completion >= 0, "run.curriculum_completion", "must be >= 0");
  validate(c.scenario);
  validate(c.hyper);
}

RunConfig parse_run_config(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config syntax error at line " + std::to_string(e.line()) + ": " + e.message());
  }
  RunConfig config;
  for (const auto& [section, keys] : tree) {
    const auto* fields = [&]() -> const std::vector<std::pair<std::string, Field>>* {
      for (const auto& [name, f] : schema())
        if (name == section) return &f;
      return nullptr;
    }();
    if (fields == nullptr) {
      if (keys.empty()) throw ConfigError("config: key '" + section + "' outside of a section");
      throw ConfigError("config: unknown section [" + section + "]");
    }
    for (const auto& [key, value] : keys) {
      const auto it = std::find_if(fields->begin(), fields->end(), [&](const auto& f) { return f.first == key; });
      if (it == fields->end()) throw ConfigError(section + "." + key + ": unknown key");
      it->second.set(config, value.data());
    }
  }
  validate(config);
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse_run_config(in);
}

void write_run_config(std::ostream& out, const RunConfig& config) {
  bool first = true;
  for (const auto& [section, fields] : schema()) {
    if (!first) out << '\n';
    first = false;
    out << '[' << section << "]\n";
    for (const auto& [key, field] : fields) out << key << " = " << field.get(config) << '\n';
  }
}

std::string to_config_text(const RunConfig& config) {
  std::ostringstream os;
  write_run_config(os, config);
  return os.str();
}

}  // namespace aggrl
