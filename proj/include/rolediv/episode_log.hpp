#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rolediv {

// On-disk episode record consumed by every role metric. One JSON object per
// line: a header line followed by one line per tick.

struct AgentRecord {
  std::optional<double> x;
  std::optional<double> y;
  bool alive = true;
  std::vector<double> action_distribution;  // empty when not recorded
  int chosen_action = 0;
  std::optional<double> value;  // Q value of the chosen action
};

struct StepRecord {
  int tick = 0;
  std::vector<AgentRecord> agents;
  double reward = 0;
  std::map<std::string, double> info;
};

struct EpisodeHeader {
  std::string scenario;
  std::string config_hash;
  std::uint64_t seed = 0;
  int episode = 0;
  int agent_count = 0;
  int action_count = 0;
  std::optional<double> vision_scope;
  std::vector<int> semantic_groups;  // action -> group; empty when unknown
};

struct EpisodeLog {
  EpisodeHeader header;
  std::vector<StepRecord> steps;

  // Append-only; ticks must be consecutive from 0 and agent counts must match
  // the header.
  void append(StepRecord record);
  int length() const { return static_cast<int>(steps.size()); }
};

std::string to_jsonl(const EpisodeLog& log);
std::string to_jsonl(std::span<const EpisodeLog> logs);

// Parses one or more concatenated episodes. Throws rolediv::Error("bad-log")
// with the offending line number on malformed input.
std::vector<EpisodeLog> parse_jsonl(std::string_view text);

}  // namespace rolediv
