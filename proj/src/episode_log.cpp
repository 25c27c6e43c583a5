#include "rolediv/episode_log.hpp"

#include <sstream>

#include <json.hpp>

#include "rolediv/error.hpp"

namespace rolediv {

using ordered_json = nlohmann::ordered_json;

void EpisodeLog::append(StepRecord record) {
  if (record.tick != length())
    throw Error("bad-log", "tick " + std::to_string(record.tick) + " appended at position " +
                               std::to_string(length()));
  if (static_cast<int>(record.agents.size()) != header.agent_count)
    throw Error("bad-log", "agent count differs from header");
  steps.push_back(std::move(record));
}

namespace {

ordered_json header_json(const EpisodeHeader& h) {
  ordered_json j;
  j["type"] = "header";
  j["scenario"] = h.scenario;
  j["config_hash"] = h.config_hash;
  j["seed"] = h.seed;
  j["episode"] = h.episode;
  j["agent_count"] = h.agent_count;
  j["action_count"] = h.action_count;
  j["vision_scope"] = h.vision_scope ? ordered_json(*h.vision_scope) : ordered_json(nullptr);
  j["semantic_groups"] = h.semantic_groups;
  return j;
}

ordered_json step_json(const StepRecord& s) {
  ordered_json j;
  j["type"] = "step";
  j["tick"] = s.tick;
  ordered_json agents = ordered_json::array();
  for (const auto& a : s.agents) {
    ordered_json aj;
    aj["x"] = a.x ? ordered_json(*a.x) : ordered_json(nullptr);
    aj["y"] = a.y ? ordered_json(*a.y) : ordered_json(nullptr);
    aj["alive"] = a.alive;
    aj["pi"] = a.action_distribution;
    aj["action"] = a.chosen_action;
    aj["value"] = a.value ? ordered_json(*a.value) : ordered_json(nullptr);
    agents.push_back(std::move(aj));
  }
  j["agents"] = std::move(agents);
  j["reward"] = s.reward;
  ordered_json info = ordered_json::object();
  for (const auto& [k, v] : s.info) info[k] = v;
  j["info"] = std::move(info);
  return j;
}

std::optional<double> optional_number(const ordered_json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

EpisodeHeader parse_header(const ordered_json& j) {
  EpisodeHeader h;
  h.scenario = j.at("scenario").get<std::string>();
  h.config_hash = j.at("config_hash").get<std::string>();
  h.seed = j.at("seed").get<std::uint64_t>();
  h.episode = j.at("episode").get<int>();
  h.agent_count = j.at("agent_count").get<int>();
  h.action_count = j.at("action_count").get<int>();
  h.vision_scope = optional_number(j.at("vision_scope"));
  h.semantic_groups = j.at("semantic_groups").get<std::vector<int>>();
  return h;
}

StepRecord parse_step(const ordered_json& j) {
  StepRecord s;
  s.tick = j.at("tick").get<int>();
  for (const auto& aj : j.at("agents")) {
    AgentRecord a;
    a.x = optional_number(aj.at("x"));
    a.y = optional_number(aj.at("y"));
    a.alive = aj.at("alive").get<bool>();
    a.action_distribution = aj.at("pi").get<std::vector<double>>();
    a.chosen_action = aj.at("action").get<int>();
    a.value = optional_number(aj.at("value"));
    s.agents.push_back(std::move(a));
  }
  s.reward = j.at("reward").get<double>();
  for (const auto& [k, v] : j.at("info").items()) s.info[k] = v.get<double>();
  return s;
}

}  // namespace

std::string to_jsonl(const EpisodeLog& log) {
  std::string out = header_json(log.header).dump();
  out += '\n';
  for (const auto& s : log.steps) {
    out += step_json(s).dump();
    out += '\n';
  }
  return out;
}

std::string to_jsonl(std::span<const EpisodeLog> logs) {
  std::string out;
  for (const auto& log : logs) out += to_jsonl(log);
  return out;
}

std::vector<EpisodeLog> parse_jsonl(std::string_view text) {
  std::vector<EpisodeLog> logs;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = ordered_json::parse(line);
      const auto type = j.at("type").get<std::string>();
      if (type == "header") {
        logs.push_back(EpisodeLog{parse_header(j), {}});
      } else if (type == "step") {
        if (logs.empty()) throw Error("bad-log", "step record before any header");
        logs.back().append(parse_step(j));
      } else {
        throw Error("bad-log", "unknown record type '" + type + "'");
      }
    } catch (const Error& e) {
      throw Error("bad-log", "line " + std::to_string(line_no) + ": " + e.what());
    } catch (const nlohmann::json::exception& e) {
      throw Error("bad-log", "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return logs;
}

}  // namespace rolediv
