#pragma once

// Tabular joint Q-learning with the three strategy axes: parameter sharing
// (encoded as a key prefix), communication (a mean-of-others key block) and
// credit assignment (independent, summed or simplex-weighted mixing).

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "rolediv/env.hpp"
#include "rolediv/episode_log.hpp"

namespace rolediv::learner {

// ----------------------------------------------------------------- sharing

enum class SharingMode { shared, partly_shared, no_shared, selective };

std::string_view to_string(SharingMode mode);
SharingMode sharing_mode_from_string(std::string_view name);  // throws bad-config

// Agents with the same unit type share a group; ids are contiguous from 0 in
// order of first appearance.
std::vector<int> selective_groups(std::span<const env::AgentSpec> specs);

struct SharingPlan {
  SharingMode mode = SharingMode::shared;
  std::vector<int> prefix;  // per agent; -1 means no prefix distinction

  static SharingPlan make(SharingMode mode, std::span<const env::AgentSpec> specs);
};

// ------------------------------------------------------------------ credit

enum class CreditKind { iql, vdn_sum, learnable_weights };

std::string_view to_string(CreditKind kind);
CreditKind credit_kind_from_string(std::string_view name);  // throws bad-config

struct CreditAssignment {
  CreditKind kind = CreditKind::vdn_sum;
  Eigen::VectorXd weights;  // learnable_weights only; uniform when empty
  double weight_lr = 0.01;
};

// -------------------------------------------------------------- observation

using ObsKey = std::vector<std::int32_t>;

struct ObsKeyHash {
  std::size_t operator()(const ObsKey& key) const noexcept;
};

inline constexpr std::int32_t kAbsent = -1000;  // no entity of that kind visible
inline constexpr std::int32_t kEmpty = -2000;   // communication block with no sender
inline constexpr std::int32_t kDead = -3000;

struct EncoderConfig {
  double bucket = 1.0;          // relative coordinates are floored to this grid
  int nearest_per_kind = 1;     // nearest visible entities kept per kind
  bool absolute_position = true;
  bool counts = false;          // append visible-entity counts (capped at 3)
};

struct CommConfig {
  bool enabled = false;
};

// Bucketed features of one observation; no sharing prefix, no comm block.
ObsKey encode_observation(const env::Observation& obs, env::EntityKind task_kind,
                          const EncoderConfig& cfg);

// Mean over the other live agents of (own position, relative position of the
// nearest visible task entity), bucketed. kEmpty entries when nobody is left
// to average over.
ObsKey communication_block(std::span<const env::Observation> observations, int agent,
                           env::EntityKind task_kind, const EncoderConfig& cfg);

// Appends each agent's communication block to its key; identity when
// disabled.
std::vector<ObsKey> apply_communication(std::vector<ObsKey> keys,
                                        std::span<const env::Observation> observations,
                                        const CommConfig& comm, env::EntityKind task_kind,
                                        const EncoderConfig& cfg);

// Full per-agent keys: sharing prefix, observation features, comm block.
std::vector<ObsKey> encode_joint(std::span<const env::Observation> observations,
                                 const SharingPlan& plan, const CommConfig& comm,
                                 env::EntityKind task_kind, const EncoderConfig& cfg);

// -------------------------------------------------------------- Q function

// One keyed store for all agents; the key prefix decides which agents share
// rows. Values are clipped to +-bound.
class QFunction {
 public:
  QFunction(int action_count, double bound, double default_value = 0.0);

  double value(const ObsKey& key, int action) const;
  std::span<const double> row(const ObsKey& key) const;
  void add(const ObsKey& key, int action, double delta);
  void set(const ObsKey& key, int action, double v);

  int action_count() const { return action_count_; }
  double bound() const { return bound_; }
  std::size_t size() const { return table_.size(); }
  const std::unordered_map<ObsKey, std::vector<double>, ObsKeyHash>& entries() const {
    return table_;
  }

 private:
  std::vector<double>& mutable_row(const ObsKey& key);

  int action_count_;
  double bound_;
  std::vector<double> default_row_;
  std::unordered_map<ObsKey, std::vector<double>, ObsKeyHash> table_;
};

// Highest-valued available action, lowest index on ties. `available` has bit
// k set when action k is legal; action 0 is used when the mask is empty.
int greedy_action(std::span<const double> row, std::uint64_t available);

// Max over available actions.
double max_available(std::span<const double> row, std::uint64_t available);

struct JointChoice {
  std::vector<int> actions;
  std::vector<std::vector<double>> distributions;  // epsilon-greedy mixture per agent
};

// Per-agent epsilon-greedy over the agent's keyed row restricted to its
// available actions.
JointChoice select_actions(const QFunction& q, std::span<const ObsKey> keys,
                           std::span<const std::uint64_t> available, double epsilon,
                           std::mt19937_64& rng);

// ------------------------------------------------------------------ update

struct Transition {
  std::vector<ObsKey> keys;
  std::vector<int> actions;
  std::vector<bool> alive;  // agents taking part in this step
  double reward = 0;
  std::vector<ObsKey> next_keys;
  std::vector<std::uint64_t> next_available;
  std::vector<bool> next_alive;
  bool terminal = false;
};

// Synchronous batch TD(0): every error is computed against the tables as they
// were before the call, then each touched entry moves by alpha times the mean
// of its contributions. Throws empty-batch.
void td_update(QFunction& q, CreditAssignment& credit, std::span<const Transition> batch,
               double gamma, double alpha);
void td_update(QFunction& q, CreditAssignment& credit, std::span<const Transition* const> batch,
               double gamma, double alpha);

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);
  void push(Transition t);
  std::vector<Transition> sample(std::size_t count, std::mt19937_64& rng) const;
  // Same draws as sample(), without copying; valid until the next push.
  std::vector<const Transition*> sample_refs(std::size_t count, std::mt19937_64& rng) const;
  std::size_t size() const { return items_.size(); }

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Transition> items_;
};

// ---------------------------------------------------------------- training

struct TrainingConfig {
  double gamma = 0.95;
  double alpha = 0.1;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  int epsilon_decay_steps = 10000;
  std::size_t replay_capacity = 20000;
  std::size_t batch_size = 32;
  int update_every = 1;
  int total_steps = 50000;
  int eval_every = 1000;
  int eval_episodes = 1;
  int log_episodes = 4;
  std::optional<double> log_epsilon;  // defaults to epsilon_end
  std::uint64_t seed = 0;
  double reward_bound = 20.0;
  EncoderConfig encoder;
  std::string config_hash;  // stamped into every emitted EpisodeLog

  void validate() const;  // throws bad-config
  double epsilon_at(int step) const;
};

struct CurvePoint {
  int step = 0;
  double eval_return = 0;
};

struct TrainingRun {
  std::vector<CurvePoint> curve;  // starts with the step-0 evaluation
  std::shared_ptr<QFunction> q;
  Eigen::VectorXd weights;  // learnable_weights only
  std::vector<EpisodeLog> logs;
  double final_return() const { return curve.empty() ? 0.0 : curve.back().eval_return; }
};

using EnvFactory = std::function<std::unique_ptr<env::Environment>(std::uint64_t seed)>;

// Undiscounted return of one greedy episode per `episodes`, averaged.
double evaluate_greedy(env::Environment& environment, const QFunction& q, const SharingPlan& plan,
                       const CommConfig& comm, const EncoderConfig& cfg, int episodes);

TrainingRun train(const EnvFactory& factory, const TrainingConfig& config, SharingMode sharing,
                  CreditAssignment credit, const CommConfig& comm);

}  // namespace rolediv::learner
