#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "rolediv/episode_log.hpp"
#include "rolediv/error.hpp"
#include "rolediv/measurement.hpp"

using namespace rolediv;
namespace m = rolediv::metrics;

namespace {

EpisodeLog make_log(int agents, int actions, double scope = 1.0) {
  EpisodeLog log;
  log.header.scenario = "unit";
  log.header.config_hash = "abc";
  log.header.agent_count = agents;
  log.header.action_count = actions;
  log.header.vision_scope = scope;
  return log;
}

AgentRecord agent(double x, double y, std::vector<double> dist, double value, bool alive = true) {
  AgentRecord a;
  a.x = x;
  a.y = y;
  a.alive = alive;
  a.action_distribution = std::move(dist);
  a.value = value;
  return a;
}

// Random log: positions in a box, random distributions, random deaths.
EpisodeLog random_log(std::mt19937_64& rng, int agents, int actions, int length) {
  std::uniform_real_distribution<double> pos(0, 5), val(-20, 20);
  std::exponential_distribution<double> e(1);
  std::bernoulli_distribution dead(0.15);
  EpisodeLog log = make_log(agents, actions, 0.5 + pos(rng));
  for (int t = 0; t < length; ++t) {
    StepRecord s;
    s.tick = t;
    for (int a = 0; a < agents; ++a) {
      std::vector<double> d(actions);
      double total = 0;
      for (auto& x : d) total += (x = e(rng));
      for (auto& x : d) x /= total;
      s.agents.push_back(agent(pos(rng), pos(rng), d, val(rng), !dead(rng)));
    }
    log.append(s);
  }
  return log;
}

}  // namespace

TEST(EpisodeLog, RoundTripIsIdentity) {
  std::mt19937_64 rng(1);
  std::vector<EpisodeLog> logs;
  for (int k = 0; k < 3; ++k) {
    auto log = random_log(rng, 3, 4, 7);
    log.header.episode = k;
    log.header.semantic_groups = {0, 0, 1, 1};
    log.steps[2].info["enemy_health"] = 1.25;
    log.steps[3].agents[1].value.reset();
    logs.push_back(log);
  }
  const std::string text = to_jsonl(logs);
  const auto parsed = parse_jsonl(text);
  ASSERT_EQ(parsed.size(), 3u);
  EXPECT_EQ(to_jsonl(parsed), text);
  EXPECT_EQ(parsed[2].steps[2].info.at("enemy_health"), 1.25);
  EXPECT_FALSE(parsed[0].steps[3].agents[1].value.has_value());
}

TEST(EpisodeLog, AppendRejectsGapsAndWrongAgentCount) {
  EpisodeLog log = make_log(2, 2);
  StepRecord s;
  s.tick = 1;
  s.agents = {agent(0, 0, {1, 0}, 0), agent(0, 0, {1, 0}, 0)};
  EXPECT_THROW(log.append(s), Error);
  s.tick = 0;
  s.agents.pop_back();
  EXPECT_THROW(log.append(s), Error);
}

TEST(EpisodeLog, MalformedLineReportsLineNumber) {
  auto log = make_log(2, 2);
  StepRecord s;
  s.agents = {agent(0, 0, {1, 0}, 0), agent(0, 0, {1, 0}, 0)};
  log.append(s);
  std::string text = to_jsonl(log);
  text += "{not json\n";
  try {
    parse_jsonl(text);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "bad-log");
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Series, IdenticalPositionsGiveFullOverlap) {
  auto log = make_log(2, 2);
  for (int t = 0; t < 5; ++t) {
    StepRecord s;
    s.tick = t;
    s.agents = {agent(t, 1, {0.5, 0.5}, 1), agent(t, 1, {0.5, 0.5}, 1)};
    log.append(s);
  }
  const auto series = m::diversity_timeseries(log, m::MetricKind::trajectory_overlap);
  ASSERT_EQ(series.values.size(), 5u);
  for (const auto& p : series.values) EXPECT_EQ(p.value, 1.0);
  const auto action = m::diversity_timeseries(log, m::MetricKind::action_real);
  for (const auto& p : action.values) EXPECT_EQ(p.value, 0.0);
}

TEST(Series, ConstantValuesGiveTwoThirds) {
  auto log = make_log(3, 2);
  for (int t = 0; t < 4; ++t) {
    StepRecord s;
    s.tick = t;
    s.agents = {agent(0, 0, {1, 0}, 2), agent(0, 0, {1, 0}, 2), agent(0, 0, {1, 0}, 4)};
    log.append(s);
  }
  for (const auto& p : m::diversity_timeseries(log, m::MetricKind::contribution).values)
    EXPECT_DOUBLE_EQ(p.value, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(*m::episode_max_contribution(log), 2.0 / 3.0);

  log.header.semantic_groups = {0, 1};
  std::vector<EpisodeLog> three(3, log);
  EXPECT_DOUBLE_EQ(m::task_measurement(three).contribution, 2.0 / 3.0);
}

TEST(Series, DeadAgentsLeaveGapsNotZeros) {
  auto log = make_log(2, 2);
  for (int t = 0; t < 4; ++t) {
    StepRecord s;
    s.tick = t;
    s.agents = {agent(0, 0, {1, 0}, 1), agent(3, 0, {0, 1}, 2, t < 2)};
    log.append(s);
  }
  const auto series = m::diversity_timeseries(log, m::MetricKind::trajectory_overlap);
  ASSERT_EQ(series.values.size(), 2u);
  EXPECT_EQ(series.values[1].tick, 1);
}

TEST(Series, MissingChannelsReported) {
  auto log = make_log(2, 2);
  log.header.vision_scope.reset();
  StepRecord s;
  s.agents = {agent(0, 0, {1, 0}, 1), agent(1, 0, {1, 0}, 1)};
  s.agents[0].value.reset();
  log.append(s);
  auto code_of = [&](m::MetricKind kind) {
    try {
      m::diversity_timeseries(log, kind);
    } catch (const Error& e) {
      return e.code();
    }
    return std::string("none");
  };
  EXPECT_EQ(code_of(m::MetricKind::trajectory_overlap), "missing-channel");
  EXPECT_EQ(code_of(m::MetricKind::contribution), "missing-channel");
  EXPECT_EQ(code_of(m::MetricKind::action_semantic), "missing-channel");
}

// The action series is computed from prefix sums; check it against the
// direct per-agent window means and pairwise KL.
TEST(Series, ActionSeriesMatchesDirectComputation) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    auto log = random_log(rng, 3, 4, 11);
    for (auto& s : log.steps)
      for (auto& a : s.agents) a.alive = true;
    const int n = trial % 5;
    m::SeriesOptions opt;
    opt.half_window = n;
    const auto series = m::diversity_timeseries(log, m::MetricKind::action_real, opt);
    ASSERT_EQ(series.values.size(), 11u);
    for (int t = 0; t < 11; ++t) {
      std::vector<Eigen::VectorXd> profiles;
      for (int a = 0; a < 3; ++a) {
        std::vector<m::Distribution<double>> history;
        for (const auto& s : log.steps)
          history.push_back(Eigen::Map<const Eigen::VectorXd>(s.agents[a].action_distribution.data(), 4));
        profiles.push_back(m::action_role_profile<double>(history, t, n).distribution);
      }
      const double expected = (m::symmetric_kl(profiles[0], profiles[1]) +
                               m::symmetric_kl(profiles[0], profiles[2]) +
                               m::symmetric_kl(profiles[1], profiles[2])) / 3.0;
      EXPECT_NEAR(series.values[t].value, expected, 1e-9);
    }
  }
}

TEST(Series, BoundedOnRandomLogs) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 300; ++trial) {
    const auto log = random_log(rng, 2 + trial % 5, 5, 1 + trial % 13);
    for (auto kind : {m::MetricKind::trajectory_overlap, m::MetricKind::contribution})
      for (const auto& p : m::diversity_timeseries(log, kind).values) {
        EXPECT_GE(p.value, 0.0);
        EXPECT_LE(p.value, 1.0);
      }
  }
}

TEST(TaskMeasurement, CloneEpisode) {
  auto log = make_log(2, 3, 1.5);
  log.header.semantic_groups = {0, 0, 1};
  for (int t = 0; t < 6; ++t) {
    StepRecord s;
    s.tick = t;
    std::vector<double> d = {0.2, 0.3, 0.5};
    s.agents = {agent(1, t, d, 4.0 - t), agent(1, t, d, 4.0 - t)};
    log.append(s);
  }
  std::vector<EpisodeLog> logs{log};
  const auto tm = m::task_measurement(logs);
  EXPECT_EQ(tm.action_real, 0.0);
  EXPECT_EQ(tm.action_semantic, 0.0);
  EXPECT_EQ(tm.trajectory_overlap, 1.0);
  EXPECT_EQ(tm.contribution, 0.0);
  EXPECT_FALSE(tm.provenance.empty());
}

TEST(TaskMeasurement, EmptyAndRangeChecks) {
  std::vector<EpisodeLog> none;
  try {
    m::task_measurement(none);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "no-logs");
  }
  m::TaskMeasurement paper{6.2, 22.5, 0.18, 0.82, "table row"};
  EXPECT_NO_THROW(paper.validate());
  m::TaskMeasurement bad = paper;
  bad.trajectory_overlap = 1.5;
  EXPECT_THROW(bad.validate(), Error);
}

TEST(Reduce, Reducers) {
  m::DiversityTimeSeries s;
  s.values = {{0, 1.0}, {1, 3.0}, {2, 2.0}};
  EXPECT_DOUBLE_EQ(m::reduce(s, m::Reducer::time_mean), 2.0);
  EXPECT_DOUBLE_EQ(m::reduce(s, m::Reducer::episode_end), 2.0);
  EXPECT_DOUBLE_EQ(m::reduce(s, m::Reducer::episode_max), 3.0);
}
