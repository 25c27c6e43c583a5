#pragma once

// Desk-scale cooperative Dec-POMDPs on a continuous plane with circular
// partial observability.
//
// Action layout shared by every scenario:
//   0 stay, 1 north (+y), 2 south, 3 east (+x), 4 west,
//   5 .. 5+E-1      attack enemy k   (battle, damage dealers only)
//   5+E .. 5+E+A-1  heal ally k      (battle, healers only)
// Spread scenarios have only the five movement actions.

#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "rolediv/role_metrics.hpp"

namespace rolediv::env {

using Vec2 = Eigen::Vector2d;

inline constexpr int kStay = 0;
inline constexpr int kNorth = 1;
inline constexpr int kSouth = 2;
inline constexpr int kEast = 3;
inline constexpr int kWest = 4;
inline constexpr int kMoveActionCount = 5;
inline constexpr int kMaxActions = 64;  // availability masks are 64-bit

enum class UnitType { mover, melee, ranged, healer, heavy, chaser };

std::string_view to_string(UnitType type);
UnitType unit_type_from_string(std::string_view name);  // throws bad-params

struct UnitStats {
  double max_health = 1;
  double attack_range = 0;
  double damage = 0;  // heal amount for healers
  double move_speed = 1;
};

using UnitTable = std::map<UnitType, UnitStats>;

// Shipped calibration defaults; scenario configs may override any entry.
UnitTable default_unit_table();

struct AgentSpec {
  int agent_id = 0;
  UnitType unit_type = UnitType::mover;
  double max_health = 1;
  double attack_range = 0;
  double damage = 0;
  double vision_scope = 1;
  double move_speed = 1;

  bool heals() const { return unit_type == UnitType::healer; }
  void validate() const;  // throws bad-params
};

struct EntityState {
  Vec2 position = Vec2::Zero();
  double health = 1;
  bool alive = true;
};

struct WorldState {
  int tick = 0;
  std::vector<EntityState> agents;
  std::vector<EntityState> entities;  // landmarks (spread) or enemies (battle)
  std::mt19937_64 rng;
};

enum class EntityKind { ally, enemy, landmark };

struct VisibleEntity {
  int index = 0;
  EntityKind kind = EntityKind::ally;
  Vec2 relative = Vec2::Zero();
  double distance = 0;
  double health_fraction = 1;
};

struct Observation {
  int observer_id = 0;
  bool alive = true;
  Vec2 position = Vec2::Zero();
  double health_fraction = 1;
  std::vector<VisibleEntity> visible;  // sorted by distance, then kind, then index
};

struct StepInfo {
  double enemy_health = 0;  // remaining enemy health (0 for spread)
  int allies_alive = 0;
  double damage_dealt = 0;
  double damage_received = 0;
  bool won = false;
};

struct StepResult {
  std::vector<Observation> observations;
  double reward = 0;
  bool terminated = false;
  bool truncated = false;
  StepInfo info;
};

enum class EnemyActionKind { stay, move, attack };

struct EnemyAction {
  EnemyActionKind kind = EnemyActionKind::stay;
  int target = -1;
  Vec2 destination = Vec2::Zero();
};

// Union of the parameters of every scenario; each scenario reads its subset.
struct ScenarioParams {
  // spread / double_spread
  int agents = 3;
  int landmarks = 3;
  std::vector<Vec2> landmark_positions;  // generated from the seed when empty
  std::vector<double> landmark_weights;  // per-landmark reward weight, default 1
  // battle
  std::vector<UnitType> allies = {UnitType::melee, UnitType::ranged, UnitType::healer,
                                  UnitType::heavy};
  int enemies = 5;
  UnitType enemy_type = UnitType::chaser;
  UnitTable units = default_unit_table();
  double win_bonus = 5.0;
  double damage_received_weight = 0.5;
  // common
  std::vector<Vec2> agent_positions;  // fixed spawn points; generated when empty
  double world_size = 4.0;
  double vision_scope = 3.0;
  double move_speed = 1.0;
  int episode_limit = 100;
  double reward_bound = 20.0;
  bool randomize_start = false;
  double spawn_jitter = 1.0;  // lattice radius of randomized spawns
};

class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::vector<Observation> reset() = 0;

  // Throws illegal-action for a wrong-sized joint action, a non-stay action
  // of a dead agent or an action unavailable to a live one.
  virtual StepResult step(std::span<const int> joint_action) = 0;

  std::vector<Observation> observe() const;

  // Bit k set when action k is currently legal for `agent`.
  virtual std::uint64_t available_actions(int agent) const = 0;

  virtual EntityKind task_kind() const = 0;
  virtual metrics::SemanticGrouping semantic_grouping() const = 0;

  // Scripted opponents (battle only; empty elsewhere).
  virtual std::vector<EnemyAction> enemy_actions() const { return {}; }

  void set_vision_scope(double scope);
  double vision_scope() const { return vision_scope_; }

  const std::string& name() const { return name_; }
  int agent_count() const { return static_cast<int>(specs_.size()); }
  int action_count() const { return action_count_; }
  int episode_limit() const { return params_.episode_limit; }
  double reward_bound() const { return params_.reward_bound; }
  double world_size() const { return params_.world_size; }
  const std::vector<AgentSpec>& agent_specs() const { return specs_; }
  const WorldState& state() const { return state_; }
  const ScenarioParams& params() const { return params_; }

 protected:
  Environment(std::string name, ScenarioParams params, std::uint64_t seed);

  Observation observe_agent(int agent) const;
  virtual double entity_max_health(int entity) const = 0;
  virtual EntityKind entity_kind() const = 0;
  Vec2 clamp_to_world(const Vec2& p) const;
  Vec2 move_target(const Vec2& from, int action, double speed) const;
  bool move_in_bounds(const Vec2& from, int action, double speed) const;
  void check_reward(double reward) const;

  std::string name_;
  ScenarioParams params_;
  std::vector<AgentSpec> specs_;
  WorldState state_;
  int action_count_ = kMoveActionCount;
  double vision_scope_ = 1;
};

// Scenario names: spread, double_spread, hetero_battle.
// Throws unknown-scenario or bad-params.
std::unique_ptr<Environment> make_scenario(std::string_view name, const ScenarioParams& params,
                                           std::uint64_t seed);

// Each live enemy attacks the nearest live ally when it is in range and moves
// toward it otherwise; ties go to the lowest agent id. With no ally alive
// every enemy stays.
std::vector<EnemyAction> scripted_enemy_policy(const WorldState& state,
                                               const UnitStats& enemy_stats,
                                               double world_size);

}  // namespace rolediv::env
