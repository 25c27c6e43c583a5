#pragma once

// Subcommands behind the CLI. Each one renders every output file in memory
// first and only then publishes them, so a failure leaves nothing behind.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rolediv/config.hpp"
#include "rolediv/diagnosis.hpp"
#include "rolediv/episode_log.hpp"
#include "rolediv/measurement.hpp"

namespace rolediv::commands {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

// Output file name -> contents, in write order.
using Files = std::vector<std::pair<std::string, std::string>>;

struct Baseline {
  metrics::TaskMeasurement measurement;
  std::vector<EpisodeLog> logs;  // seed order, then episode order
};

// Trains vdn_sum / no_shared / comm off for every seed and measures the
// logged evaluation episodes.
Baseline measure_baseline(const config::RunConfig& cfg, int jobs);

std::string measurement_json(const metrics::TaskMeasurement& m, const std::string& config_hash);

Files measure(const config::RunConfig& cfg, int jobs);
Files train(const config::RunConfig& cfg, int jobs);
Files compare(const config::RunConfig& cfg, int jobs);
Files theory(const config::RunConfig& cfg, int jobs);
Files diagnose(const std::string& measurement_text,
               const std::optional<std::string>& thresholds_text,
               const std::optional<diagnosis::GuidelineThresholds>& config_thresholds = {});

// Writes every file under `dir` through temporaries and renames them into
// place once all writes succeeded.
void publish(const std::string& dir, const Files& files);

struct Invocation {
  std::string subcommand;
  std::optional<std::string> config_path;
  std::optional<std::string> out_dir;
  std::optional<std::string> seeds;  // override list, e.g. "1-8"
  int jobs = 1;
  std::optional<std::string> measurement_path;  // diagnose
  std::optional<std::string> thresholds_path;   // diagnose
};

// Runs one subcommand; returns the process exit status and reports failures
// on `err`.
int run(const Invocation& inv, std::ostream& out, std::ostream& err);

int exit_code_for(const std::string& error_code);

}  // namespace rolediv::commands
