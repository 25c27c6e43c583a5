#include "rolediv/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace rolediv::metrics {

std::string_view to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::action_real: return "action_real";
    case MetricKind::action_semantic: return "action_semantic";
    case MetricKind::trajectory_overlap: return "trajectory_overlap";
    case MetricKind::contribution: return "contribution";
  }
  return "unknown";
}

namespace {

bool active(const StepRecord& s, int agent) { return s.agents[agent].alive; }

std::vector<int> active_agents(const StepRecord& s) {
  std::vector<int> out;
  for (int a = 0; a < static_cast<int>(s.agents.size()); ++a)
    if (active(s, a)) out.push_back(a);
  return out;
}

// Per-agent prefix sums of the logged distributions over alive steps, so any
// clipped window mean is a difference of two rows.
struct WindowSums {
  std::vector<Eigen::MatrixXd> sums;   // agent -> (length + 1) x actions
  std::vector<std::vector<int>> counts;  // agent -> length + 1
};

WindowSums window_sums(const EpisodeLog& log) {
  const int length = log.length();
  const int agents = log.header.agent_count;
  int actions = -1;
  for (const auto& s : log.steps)
    for (const auto& a : s.agents)
      if (a.alive) {
        if (a.action_distribution.empty())
          throw Error("missing-channel", "alive agent without an action distribution at tick " +
                                             std::to_string(s.tick));
        if (actions < 0) actions = static_cast<int>(a.action_distribution.size());
        if (static_cast<int>(a.action_distribution.size()) != actions)
          throw Error("dimension-mismatch", "action distribution lengths differ");
      }
  WindowSums w;
  w.sums.assign(agents, Eigen::MatrixXd::Zero(length + 1, std::max(actions, 0)));
  w.counts.assign(agents, std::vector<int>(length + 1, 0));
  for (int a = 0; a < agents; ++a) {
    for (int t = 0; t < length; ++t) {
      const auto& rec = log.steps[t].agents[a];
      w.sums[a].row(t + 1) = w.sums[a].row(t);
      w.counts[a][t + 1] = w.counts[a][t];
      if (rec.alive) {
        w.sums[a].row(t + 1) +=
            Eigen::Map<const Eigen::RowVectorXd>(rec.action_distribution.data(), actions);
        w.counts[a][t + 1] += 1;
      }
    }
  }
  return w;
}

const SemanticGrouping* resolve_grouping(const EpisodeLog& log, const SeriesOptions& options,
                                         SemanticGrouping& storage) {
  if (options.grouping) return &*options.grouping;
  if (log.header.semantic_groups.empty()) return nullptr;
  storage.group_of = log.header.semantic_groups;
  storage.group_count =
      1 + *std::max_element(storage.group_of.begin(), storage.group_of.end());
  storage.validate();
  return &storage;
}

DiversityTimeSeries action_series(const EpisodeLog& log, const SeriesOptions& options,
                                  const SemanticGrouping* grouping) {
  DiversityTimeSeries out;
  out.kind = grouping ? MetricKind::action_semantic : MetricKind::action_real;
  const int length = log.length();
  if (length == 0) return out;
  const WindowSums sums = window_sums(log);
  const int n = options.half_window.value_or(length / 2);
  if (n < 0) throw Error("bad-window", "negative half window");

  for (int t = 0; t < length; ++t) {
    const auto agents = active_agents(log.steps[t]);
    if (agents.size() < 2) continue;
    const int lo = std::max(0, t - n);
    const int hi = std::min(length - 1, t + n);
    std::vector<Distribution<double>> profiles;
    profiles.reserve(agents.size());
    for (int a : agents) {
      const int count = sums.counts[a][hi + 1] - sums.counts[a][lo];
      Distribution<double> mean =
          (sums.sums[a].row(hi + 1) - sums.sums[a].row(lo)).transpose() / count;
      mean /= mean.sum();
      profiles.push_back(grouping ? semantic_projection(mean, *grouping) : mean);
    }
    const auto m = pairwise_matrix<double>(static_cast<int>(agents.size()), [&](int i, int j) {
      return symmetric_kl(profiles[i], profiles[j], options.smoothing);
    });
    out.values.push_back({log.steps[t].tick, role_diversity(m)});
  }
  return out;
}

DiversityTimeSeries trajectory_series(const EpisodeLog& log) {
  DiversityTimeSeries out;
  out.kind = MetricKind::trajectory_overlap;
  if (!log.header.vision_scope)
    throw Error("missing-channel", "trajectory overlap needs the vision scope");
  const double r = *log.header.vision_scope;
  for (const auto& step : log.steps) {
    const auto agents = active_agents(step);
    if (agents.size() < 2) continue;
    std::vector<ObservationDisk<double>> disks;
    for (int a : agents) {
      const auto& rec = step.agents[a];
      if (!rec.x || !rec.y)
        throw Error("missing-channel", "position absent at tick " + std::to_string(step.tick));
      disks.push_back({Point2<double>(*rec.x, *rec.y), r});
    }
    const auto m = pairwise_matrix<double>(static_cast<int>(agents.size()), [&](int i, int j) {
      return observation_overlap(disks[i], disks[j]);
    });
    out.values.push_back({step.tick, role_diversity(m)});
  }
  return out;
}

DiversityTimeSeries contribution_series(const EpisodeLog& log) {
  DiversityTimeSeries out;
  out.kind = MetricKind::contribution;
  for (const auto& step : log.steps) {
    const auto agents = active_agents(step);
    if (agents.size() < 2) continue;
    Eigen::VectorXd values(static_cast<Eigen::Index>(agents.size()));
    for (std::size_t k = 0; k < agents.size(); ++k) {
      const auto& v = step.agents[agents[k]].value;
      if (!v) throw Error("missing-channel", "value absent at tick " + std::to_string(step.tick));
      values[static_cast<Eigen::Index>(k)] = *v;
    }
    const auto m = pairwise_matrix<double>(static_cast<int>(agents.size()), [&](int i, int j) {
      return contribution_distance(values, i, j);
    });
    out.values.push_back({step.tick, role_diversity(m)});
  }
  return out;
}

}  // namespace

DiversityTimeSeries diversity_timeseries(const EpisodeLog& log, MetricKind kind,
                                         const SeriesOptions& options) {
  switch (kind) {
    case MetricKind::action_real: return action_series(log, options, nullptr);
    case MetricKind::action_semantic: {
      SemanticGrouping storage;
      const SemanticGrouping* g = resolve_grouping(log, options, storage);
      if (!g) throw Error("missing-channel", "semantic diversity needs an action grouping");
      return action_series(log, options, g);
    }
    case MetricKind::trajectory_overlap: return trajectory_series(log);
    case MetricKind::contribution: return contribution_series(log);
  }
  throw Error("bad-metric");
}

double reduce(const DiversityTimeSeries& series, Reducer reducer) {
  if (series.values.empty()) throw Error("no-active-pairs", "empty diversity series");
  switch (reducer) {
    case Reducer::time_mean: {
      double total = 0;
      for (const auto& p : series.values) total += p.value;
      return total / static_cast<double>(series.values.size());
    }
    case Reducer::episode_end: return series.values.back().value;
    case Reducer::episode_max: {
      double best = -std::numeric_limits<double>::infinity();
      for (const auto& p : series.values) best = std::max(best, p.value);
      return best;
    }
  }
  throw Error("bad-reducer");
}

std::optional<double> episode_max_contribution(const EpisodeLog& log) {
  const int agents = log.header.agent_count;
  std::vector<double> best(agents, -std::numeric_limits<double>::infinity());
  std::vector<bool> seen(agents, false);
  for (const auto& step : log.steps)
    for (int a = 0; a < agents; ++a) {
      const auto& rec = step.agents[a];
      if (!rec.alive) continue;
      if (!rec.value)
        throw Error("missing-channel", "value absent at tick " + std::to_string(step.tick));
      best[a] = std::max(best[a], *rec.value);
      seen[a] = true;
    }
  std::vector<double> values;
  for (int a = 0; a < agents; ++a)
    if (seen[a]) values.push_back(best[a]);
  if (values.size() < 2) return std::nullopt;
  const Eigen::Map<const Eigen::VectorXd> v(values.data(), static_cast<Eigen::Index>(values.size()));
  const auto m = pairwise_matrix<double>(static_cast<int>(values.size()),
                                         [&](int i, int j) { return contribution_distance(v, i, j); });
  return role_diversity(m);
}

void TaskMeasurement::validate() const {
  auto finite = [](double x) { return std::isfinite(x); };
  if (!finite(action_semantic) || action_semantic < 0)
    throw Error("bad-measurement", "action_semantic must be a non-negative number");
  if (!finite(action_real) || action_real < 0)
    throw Error("bad-measurement", "action_real must be a non-negative number");
  if (!finite(trajectory_overlap) || trajectory_overlap < 0 || trajectory_overlap > 1)
    throw Error("bad-measurement", "trajectory_overlap must lie in [0, 1]");
  if (!finite(contribution) || contribution < 0 || contribution > 1)
    throw Error("bad-measurement", "contribution must lie in [0, 1]");
}

TaskMeasurement task_measurement(std::span<const EpisodeLog> logs,
                                 const MeasurementOptions& options) {
  if (logs.empty()) throw Error("no-logs", "task measurement needs at least one episode");

  auto episode_mean = [&](auto&& per_episode, const char* what) {
    double total = 0;
    int used = 0;
    for (const auto& log : logs) {
      const std::optional<double> v = per_episode(log);
      if (!v) continue;
      total += *v;
      ++used;
    }
    if (used == 0) throw Error("no-active-pairs", std::string("no episode yields ") + what);
    return total / used;
  };
  auto series_value = [&](MetricKind kind) {
    return [&, kind](const EpisodeLog& log) -> std::optional<double> {
      const auto s = diversity_timeseries(log, kind, options.series);
      if (s.values.empty()) return std::nullopt;
      return reduce(s, options.reducer);
    };
  };

  TaskMeasurement m;
  m.action_real = episode_mean(series_value(MetricKind::action_real), "action diversity");
  m.action_semantic =
      episode_mean(series_value(MetricKind::action_semantic), "semantic action diversity");
  m.trajectory_overlap =
      episode_mean(series_value(MetricKind::trajectory_overlap), "trajectory overlap");
  if (options.contribution == ContributionReduction::episode_max)
    m.contribution = episode_mean(episode_max_contribution, "contribution diversity");
  else
    m.contribution = episode_mean(series_value(MetricKind::contribution), "contribution diversity");

  std::set<std::string> hashes;
  std::set<std::uint64_t> seeds;
  for (const auto& log : logs) {
    hashes.insert(log.header.config_hash);
    seeds.insert(log.header.seed);
  }
  std::ostringstream provenance;
  provenance << logs.size() << " episodes; scenario=" << logs.front().header.scenario
             << "; config_hash=";
  bool first = true;
  for (const auto& h : hashes) {
    provenance << (first ? "" : ",") << h;
    first = false;
  }
  provenance << "; seeds=";
  first = true;
  for (auto s : seeds) {
    provenance << (first ? "" : ",") << s;
    first = false;
  }
  m.provenance = provenance.str();
  m.validate();
  return m;
}

}  // namespace rolediv::metrics
