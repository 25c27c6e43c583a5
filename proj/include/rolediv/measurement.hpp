#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rolediv/episode_log.hpp"
#include "rolediv/role_metrics.hpp"

namespace rolediv::metrics {

enum class MetricKind { action_real, action_semantic, trajectory_overlap, contribution };

std::string_view to_string(MetricKind kind);

struct DiversityPoint {
  int tick = 0;
  double value = 0;
};

// Steps with fewer than two active agents are absent from `values` (a gap),
// never recorded as zero.
struct DiversityTimeSeries {
  MetricKind kind = MetricKind::action_real;
  std::vector<DiversityPoint> values;
};

struct SeriesOptions {
  std::optional<int> half_window;             // default: floor(length / 2)
  std::optional<SemanticGrouping> grouping;   // default: the log header's groups
  double smoothing = kDefaultSmoothing;
};

DiversityTimeSeries diversity_timeseries(const EpisodeLog& log, MetricKind kind,
                                         const SeriesOptions& options = {});

// How a per-episode series is collapsed to one number.
enum class Reducer { time_mean, episode_end, episode_max };

// episode_max: diversity of each agent's largest value over the episode.
// per_step: the contribution time series reduced like the other metrics.
enum class ContributionReduction { episode_max, per_step };

struct MeasurementOptions {
  SeriesOptions series;
  Reducer reducer = Reducer::time_mean;
  ContributionReduction contribution = ContributionReduction::episode_max;
};

struct TaskMeasurement {
  double action_semantic = 0;
  double action_real = 0;
  double trajectory_overlap = 0;
  double contribution = 0;
  std::string provenance;

  // Throws `bad-measurement` when a field is outside its range.
  void validate() const;
};

double reduce(const DiversityTimeSeries& series, Reducer reducer);

// Diversity of every agent's episode-max value (agents never active are
// skipped). Empty when fewer than two agents carry a value.
std::optional<double> episode_max_contribution(const EpisodeLog& log);

TaskMeasurement task_measurement(std::span<const EpisodeLog> logs,
                                 const MeasurementOptions& options = {});

}  // namespace rolediv::metrics
