#pragma once

// Declarative run configuration. One JSON document drives every subcommand;
// parsing rejects unknown keys and reports the offending field path.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rolediv/diagnosis.hpp"
#include "rolediv/env.hpp"
#include "rolediv/fqi.hpp"
#include "rolediv/learner.hpp"
#include "rolediv/measurement.hpp"

namespace rolediv::config {

struct StrategyBlock {
  learner::SharingMode sharing = learner::SharingMode::no_shared;
  learner::CreditKind credit = learner::CreditKind::vdn_sum;
  bool communication = false;
  double weight_lr = 0.01;
};

struct CompareBlock {
  std::vector<diagnosis::StrategyCell> grid;  // cartesian product of the axes
  double target_return = 0;
  bool recommend = true;  // measure the baseline and flag the recommended cell
};

struct RunConfig {
  std::string scenario = "spread";
  env::ScenarioParams params;
  learner::TrainingConfig training;
  StrategyBlock strategy;
  metrics::MeasurementOptions metrics;
  std::vector<std::uint64_t> seeds = {0};
  std::string output_dir = "out";
  std::optional<CompareBlock> compare;
  diagnosis::GuidelineThresholds thresholds;
  std::optional<fqi::SweepGrid> theory;  // seeds come from `seeds`

  nlohmann::json document;  // the parsed input, seeds override applied
  std::string hash;         // FNV-1a 64 of the canonical document, hex

  learner::EnvFactory factory() const;
};

// Throws Error("bad-config", "<field.path>: <reason>").
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::string& path);

// Replaces the seed list and refreshes the document and hash.
void override_seeds(RunConfig& cfg, const std::vector<std::uint64_t>& seeds);

// "1,2,5-8" style lists. Throws bad-config.
std::vector<std::uint64_t> parse_seed_list(std::string_view text);

// Threshold block: {"family": ..., and optional per-field overrides}.
diagnosis::GuidelineThresholds parse_thresholds(const nlohmann::json& j, const std::string& path);

// Measurement document as written by `measure`. Throws bad-measurement.
metrics::TaskMeasurement parse_measurement(std::string_view text);

std::string fnv1a_hex(std::string_view bytes);
std::string canonical_hash(const nlohmann::json& doc);  // output_dir excluded

}  // namespace rolediv::config
