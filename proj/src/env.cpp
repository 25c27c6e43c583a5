#include "rolediv/env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <utility>

#include "rolediv/error.hpp"

namespace rolediv::env {

std::string_view to_string(UnitType type) {
  switch (type) {
    case UnitType::mover: return "mover";
    case UnitType::melee: return "melee";
    case UnitType::ranged: return "ranged";
    case UnitType::healer: return "healer";
    case UnitType::heavy: return "heavy";
    case UnitType::chaser: return "chaser";
  }
  return "unknown";
}

UnitType unit_type_from_string(std::string_view name) {
  for (UnitType t : {UnitType::mover, UnitType::melee, UnitType::ranged, UnitType::healer,
                     UnitType::heavy, UnitType::chaser})
    if (to_string(t) == name) return t;
  throw Error("bad-params", "unknown unit type '" + std::string(name) + "'");
}

UnitTable default_unit_table() {
  return {
      {UnitType::mover, {1.0, 0.0, 0.0, 1.0}},
      {UnitType::melee, {5.0, 1.0, 1.0, 1.0}},
      {UnitType::ranged, {3.5, 2.0, 0.7, 1.0}},
      {UnitType::healer, {3.0, 2.0, 0.8, 1.0}},
      {UnitType::heavy, {7.0, 1.5, 1.2, 1.0}},
      {UnitType::chaser, {3.0, 1.0, 0.6, 0.75}},
  };
}

void AgentSpec::validate() const {
  if (!(max_health > 0) || !(vision_scope > 0) || !(move_speed > 0))
    throw Error("bad-params", "agent " + std::to_string(agent_id) + ": non-positive attribute");
  if (attack_range < 0 || damage < 0)
    throw Error("bad-params", "agent " + std::to_string(agent_id) + ": negative attribute");
  if (attack_range > vision_scope)
    throw Error("bad-params",
                "agent " + std::to_string(agent_id) + ": attack range exceeds vision scope");
}

// ---------------------------------------------------------------- Environment

Environment::Environment(std::string name, ScenarioParams params, std::uint64_t seed)
    : name_(std::move(name)), params_(std::move(params)), vision_scope_(params_.vision_scope) {
  state_.rng.seed(seed);
}

std::vector<Observation> Environment::observe() const {
  std::vector<Observation> out;
  out.reserve(specs_.size());
  for (int a = 0; a < agent_count(); ++a) out.push_back(observe_agent(a));
  return out;
}

Observation Environment::observe_agent(int agent) const {
  Observation obs;
  obs.observer_id = agent;
  const auto& self = state_.agents[agent];
  obs.alive = self.alive;
  obs.position = self.position;
  obs.health_fraction = self.health / specs_[agent].max_health;
  if (!self.alive) return obs;

  const double scope = specs_[agent].vision_scope;
  for (int other = 0; other < agent_count(); ++other) {
    if (other == agent || !state_.agents[other].alive) continue;
    const Vec2 rel = state_.agents[other].position - self.position;
    const double d = rel.norm();
    if (d <= scope)
      obs.visible.push_back(
          {other, EntityKind::ally, rel, d, state_.agents[other].health / specs_[other].max_health});
  }
  for (int e = 0; e < static_cast<int>(state_.entities.size()); ++e) {
    const auto& ent = state_.entities[e];
    if (!ent.alive) continue;
    const Vec2 rel = ent.position - self.position;
    const double d = rel.norm();
    if (d <= scope)
      obs.visible.push_back({e, entity_kind(), rel, d, ent.health / entity_max_health(e)});
  }
  std::sort(obs.visible.begin(), obs.visible.end(), [](const auto& a, const auto& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    if (a.kind != b.kind) return a.kind < b.kind;
    return a.index < b.index;
  });
  return obs;
}

void Environment::set_vision_scope(double scope) {
  if (!(scope > 0)) throw Error("bad-params", "vision scope must be positive");
  for (const auto& s : specs_)
    if (scope < s.attack_range)
      throw Error("scope-below-attack-range",
                  "vision scope " + std::to_string(scope) + " is below attack range " +
                      std::to_string(s.attack_range));
  vision_scope_ = scope;
  for (auto& s : specs_) s.vision_scope = scope;
}

Vec2 Environment::clamp_to_world(const Vec2& p) const {
  return p.cwiseMax(0.0).cwiseMin(params_.world_size);
}

Vec2 Environment::move_target(const Vec2& from, int action, double speed) const {
  switch (action) {
    case kNorth: return from + Vec2(0, speed);
    case kSouth: return from - Vec2(0, speed);
    case kEast: return from + Vec2(speed, 0);
    case kWest: return from - Vec2(speed, 0);
    default: return from;
  }
}

bool Environment::move_in_bounds(const Vec2& from, int action, double speed) const {
  const Vec2 to = move_target(from, action, speed);
  constexpr double tol = 1e-9;
  return to.x() >= -tol && to.y() >= -tol && to.x() <= params_.world_size + tol &&
         to.y() <= params_.world_size + tol;
}

void Environment::check_reward(double reward) const {
  if (!(std::abs(reward) <= params_.reward_bound))
    throw Error("reward-bound", "reward " + std::to_string(reward) + " exceeds the bound");
}

namespace {

void validate_common(const ScenarioParams& p) {
  if (!(p.world_size > 0)) throw Error("bad-params", "world_size must be positive");
  if (!(p.vision_scope > 0)) throw Error("bad-params", "vision_scope must be positive");
  if (!(p.move_speed > 0)) throw Error("bad-params", "move_speed must be positive");
  if (p.episode_limit < 1) throw Error("bad-params", "episode_limit must be at least 1");
  if (!(p.reward_bound > 0)) throw Error("bad-params", "reward_bound must be positive");
  if (p.spawn_jitter < 0) throw Error("bad-params", "spawn_jitter must be non-negative");
  for (const auto& q : p.agent_positions)
    if (q.x() < 0 || q.y() < 0 || q.x() > p.world_size || q.y() > p.world_size)
      throw Error("bad-params", "agent position outside the world");
}

// Distinct lattice points within `radius` of `center`, clipped to the world.
std::vector<Vec2> lattice_points(const Vec2& center, double radius, double world) {
  std::vector<Vec2> pts;
  const int lim = static_cast<int>(std::floor(world));
  for (int x = 0; x <= lim; ++x)
    for (int y = 0; y <= lim; ++y) {
      const Vec2 p(x, y);
      if ((p - center).cwiseAbs().maxCoeff() <= radius + 1e-9) pts.push_back(p);
    }
  return pts;
}

std::vector<Vec2> draw_distinct(std::vector<Vec2> pool, int count, std::mt19937_64& rng) {
  if (static_cast<int>(pool.size()) < count)
    throw Error("bad-params", "not enough free lattice points for the requested spawns");
  std::vector<Vec2> out;
  for (int k = 0; k < count; ++k) {
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    const std::size_t i = pick(rng);
    out.push_back(pool[i]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(i));
  }
  return out;
}

// ------------------------------------------------------------------- spread

class SpreadEnv final : public Environment {
 public:
  SpreadEnv(std::string name, const ScenarioParams& params, std::uint64_t seed, bool clustered)
      : Environment(std::move(name), params, seed), clustered_(clustered) {
    validate_common(params_);
    if (params_.agents < 1) throw Error("bad-params", "agents must be at least 1");
    if (params_.landmarks < 1) throw Error("bad-params", "landmarks must be at least 1");
    if (!params_.landmark_weights.empty() &&
        static_cast<int>(params_.landmark_weights.size()) != params_.landmarks)
      throw Error("bad-params", "landmark_weights length differs from landmarks");
    for (double w : params_.landmark_weights)
      if (!(w > 0)) throw Error("bad-params", "landmark weights must be positive");

    for (int a = 0; a < params_.agents; ++a) {
      AgentSpec s;
      s.agent_id = a;
      s.unit_type = UnitType::mover;
      s.max_health = 1;
      s.vision_scope = params_.vision_scope;
      s.move_speed = params_.move_speed;
      s.validate();
      specs_.push_back(s);
    }

    const double w = params_.world_size;
    if (!params_.landmark_positions.empty()) {
      if (static_cast<int>(params_.landmark_positions.size()) != params_.landmarks)
        throw Error("bad-params", "landmark_positions length differs from landmarks");
      landmarks_ = params_.landmark_positions;
      for (const auto& l : landmarks_)
        if (l.x() < 0 || l.y() < 0 || l.x() > w || l.y() > w)
          throw Error("bad-params", "landmark outside the world");
    } else if (clustered_) {
      const int first = (params_.landmarks + 1) / 2;
      auto a = draw_distinct(lattice_points(Vec2(1, 1), 1, w), first, state_.rng);
      auto b = draw_distinct(lattice_points(Vec2(w - 1, w - 1), 1, w), params_.landmarks - first,
                             state_.rng);
      landmarks_ = std::move(a);
      landmarks_.insert(landmarks_.end(), b.begin(), b.end());
    } else {
      landmarks_ = draw_distinct(lattice_points(Vec2(w / 2, w / 2), w, w), params_.landmarks,
                                 state_.rng);
    }
    weights_ = params_.landmark_weights.empty()
                   ? std::vector<double>(params_.landmarks, 1.0)
                   : params_.landmark_weights;

    if (!params_.agent_positions.empty()) {
      if (static_cast<int>(params_.agent_positions.size()) != params_.agents)
        throw Error("bad-params", "agent_positions length differs from agents");
      spawn_ = params_.agent_positions;
    } else {
      spawn_ = draw_spawn();
    }

    double weight_sum = 0;
    for (double x : weights_) weight_sum += x;
    const double diag = std::sqrt(2.0) * w;
    scale_ = std::min(1.0, params_.reward_bound / (weight_sum * diag));
    reset();
  }

  std::vector<Observation> reset() override {
    if (params_.randomize_start) spawn_ = draw_spawn();
    state_.tick = 0;
    state_.agents.assign(params_.agents, EntityState{});
    for (int a = 0; a < params_.agents; ++a) state_.agents[a].position = spawn_[a];
    state_.entities.clear();
    for (const auto& l : landmarks_) state_.entities.push_back({l, 1.0, true});
    return observe();
  }

  StepResult step(std::span<const int> joint_action) override {
    if (static_cast<int>(joint_action.size()) != agent_count())
      throw Error("illegal-action", "joint action has the wrong number of entries");
    for (int a = 0; a < agent_count(); ++a) {
      const int act = joint_action[a];
      if (act < 0 || act >= action_count_ || !((available_actions(a) >> act) & 1u))
        throw Error("illegal-action",
                    "agent " + std::to_string(a) + " action " + std::to_string(act));
    }
    for (int a = 0; a < agent_count(); ++a)
      state_.agents[a].position =
          clamp_to_world(move_target(state_.agents[a].position, joint_action[a], specs_[a].move_speed));
    ++state_.tick;

    StepResult r;
    r.reward = reward();
    check_reward(r.reward);
    r.truncated = state_.tick >= params_.episode_limit;
    r.info.allies_alive = agent_count();
    r.observations = observe();
    return r;
  }

  std::uint64_t available_actions(int agent) const override {
    std::uint64_t mask = 1u << kStay;
    for (int act = kNorth; act < kMoveActionCount; ++act)
      if (move_in_bounds(state_.agents[agent].position, act, specs_[agent].move_speed))
        mask |= std::uint64_t{1} << act;
    return mask;
  }

  EntityKind task_kind() const override { return EntityKind::landmark; }

  metrics::SemanticGrouping semantic_grouping() const override {
    return {std::vector<int>(kMoveActionCount, 0), 1};
  }

 protected:
  double entity_max_health(int) const override { return 1.0; }
  EntityKind entity_kind() const override { return EntityKind::landmark; }

 private:
  std::vector<Vec2> draw_spawn() {
    const double w = params_.world_size;
    const Vec2 center = clustered_ ? Vec2(w / 2, w / 2) : Vec2(w / 2, w / 2);
    const double radius = clustered_ ? params_.spawn_jitter : w;
    return draw_distinct(lattice_points(center, radius, w), params_.agents, state_.rng);
  }

  double reward() const {
    double total = 0;
    for (std::size_t l = 0; l < landmarks_.size(); ++l) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& a : state_.agents) best = std::min(best, (a.position - landmarks_[l]).norm());
      total += weights_[l] * best;
    }
    return -scale_ * total;
  }

  bool clustered_;
  std::vector<Vec2> landmarks_;
  std::vector<double> weights_;
  std::vector<Vec2> spawn_;
  double scale_ = 1;
};

// ------------------------------------------------------------------- battle

class BattleEnv final : public Environment {
 public:
  BattleEnv(std::string name, const ScenarioParams& params, std::uint64_t seed)
      : Environment(std::move(name), params, seed) {
    validate_common(params_);
    if (params_.allies.empty()) throw Error("bad-params", "allies must not be empty");
    if (params_.enemies < 1) throw Error("bad-params", "enemies must be at least 1");
    const int a_count = static_cast<int>(params_.allies.size());
    action_count_ = kMoveActionCount + params_.enemies + a_count;
    if (action_count_ > kMaxActions) throw Error("bad-params", "too many actions");
    if (params_.win_bonus < 0 || params_.damage_received_weight < 0)
      throw Error("bad-params", "reward weights must be non-negative");

    for (int a = 0; a < a_count; ++a) {
      const auto it = params_.units.find(params_.allies[a]);
      if (it == params_.units.end())
        throw Error("bad-params", "no stats for unit type " + std::string(to_string(params_.allies[a])));
      AgentSpec s;
      s.agent_id = a;
      s.unit_type = params_.allies[a];
      s.max_health = it->second.max_health;
      s.attack_range = it->second.attack_range;
      s.damage = it->second.damage;
      s.move_speed = it->second.move_speed;
      s.vision_scope = params_.vision_scope;
      s.validate();
      specs_.push_back(s);
    }
    const auto et = params_.units.find(params_.enemy_type);
    if (et == params_.units.end()) throw Error("bad-params", "no stats for the enemy unit type");
    enemy_ = et->second;
    if (!(enemy_.max_health > 0) || !(enemy_.move_speed > 0) || enemy_.damage < 0 ||
        enemy_.attack_range < 0)
      throw Error("bad-params", "invalid enemy stats");

    if (!params_.agent_positions.empty() &&
        static_cast<int>(params_.agent_positions.size()) != a_count)
      throw Error("bad-params", "agent_positions length differs from allies");
    draw_spawns();
    reset();
  }

  std::vector<Observation> reset() override {
    if (params_.randomize_start) draw_spawns();
    state_.tick = 0;
    state_.agents.clear();
    for (int a = 0; a < agent_count(); ++a)
      state_.agents.push_back({ally_spawn_[a], specs_[a].max_health, true});
    state_.entities.clear();
    for (const auto& p : enemy_spawn_) state_.entities.push_back({p, enemy_.max_health, true});
    return observe();
  }

  StepResult step(std::span<const int> joint_action) override {
    const int a_count = agent_count();
    const int e_count = static_cast<int>(state_.entities.size());
    if (static_cast<int>(joint_action.size()) != a_count)
      throw Error("illegal-action", "joint action has the wrong number of entries");
    for (int a = 0; a < a_count; ++a) {
      const int act = joint_action[a];
      if (act < 0 || act >= action_count_ || !((available_actions(a) >> act) & 1u))
        throw Error("illegal-action",
                    "agent " + std::to_string(a) + " action " + std::to_string(act) +
                        (state_.agents[a].alive ? "" : " (dead)"));
    }

    // Every effect is computed from the pre-step state and applied at once.
    std::vector<double> enemy_damage(e_count, 0.0), ally_damage(a_count, 0.0), heal(a_count, 0.0);
    for (int a = 0; a < a_count; ++a) {
      const int act = joint_action[a];
      if (act >= kMoveActionCount && act < kMoveActionCount + e_count)
        enemy_damage[act - kMoveActionCount] += specs_[a].damage;
      else if (act >= kMoveActionCount + e_count)
        heal[act - kMoveActionCount - e_count] += specs_[a].damage;
    }
    const auto enemy_moves = enemy_actions();
    for (const auto& e : enemy_moves)
      if (e.kind == EnemyActionKind::attack) ally_damage[e.target] += enemy_.damage;

    StepResult r;
    for (int e = 0; e < e_count; ++e) {
      auto& ent = state_.entities[e];
      if (!ent.alive || enemy_damage[e] <= 0) continue;
      const double dealt = std::min(ent.health, enemy_damage[e]);
      ent.health -= dealt;
      r.info.damage_dealt += dealt;
      if (ent.health <= 1e-12) {
        ent.health = 0;
        ent.alive = false;
      }
    }
    for (int a = 0; a < a_count; ++a) {
      auto& ag = state_.agents[a];
      if (!ag.alive || ally_damage[a] <= 0) continue;
      const double taken = std::min(ag.health, ally_damage[a]);
      ag.health -= taken;
      r.info.damage_received += taken;
      if (ag.health <= 1e-12) {
        ag.health = 0;
        ag.alive = false;
      }
    }
    for (int a = 0; a < a_count; ++a) {
      auto& ag = state_.agents[a];
      if (ag.alive && heal[a] > 0) ag.health = std::min(specs_[a].max_health, ag.health + heal[a]);
    }
    for (int a = 0; a < a_count; ++a) {
      auto& ag = state_.agents[a];
      const int act = joint_action[a];
      if (ag.alive && act > kStay && act < kMoveActionCount)
        ag.position = clamp_to_world(move_target(ag.position, act, specs_[a].move_speed));
    }
    for (std::size_t e = 0; e < enemy_moves.size(); ++e) {
      auto& ent = state_.entities[e];
      if (ent.alive && enemy_moves[e].kind == EnemyActionKind::move)
        ent.position = enemy_moves[e].destination;
    }
    ++state_.tick;

    bool enemies_left = false;
    for (const auto& ent : state_.entities) {
      enemies_left = enemies_left || ent.alive;
      r.info.enemy_health += ent.health;
    }
    for (const auto& ag : state_.agents) r.info.allies_alive += ag.alive ? 1 : 0;
    r.info.won = !enemies_left;
    r.terminated = !enemies_left || r.info.allies_alive == 0;
    r.truncated = !r.terminated && state_.tick >= params_.episode_limit;

    double raw = r.info.damage_dealt - params_.damage_received_weight * r.info.damage_received;
    if (r.info.won) raw += params_.win_bonus;
    const double scale =
        params_.reward_bound / (enemy_.max_health * e_count + params_.win_bonus);
    r.reward = std::clamp(raw * scale, -params_.reward_bound, params_.reward_bound);
    check_reward(r.reward);
    r.observations = observe();
    return r;
  }

  std::uint64_t available_actions(int agent) const override {
    const auto& self = state_.agents[agent];
    std::uint64_t mask = std::uint64_t{1} << kStay;
    if (!self.alive) return mask;
    for (int act = kNorth; act < kMoveActionCount; ++act)
      if (move_in_bounds(self.position, act, specs_[agent].move_speed))
        mask |= std::uint64_t{1} << act;
    const auto& spec = specs_[agent];
    const int e_count = static_cast<int>(state_.entities.size());
    if (spec.heals()) {
      for (int k = 0; k < agent_count(); ++k) {
        const auto& ally = state_.agents[k];
        if (k == agent || !ally.alive || ally.health >= specs_[k].max_health) continue;
        if ((ally.position - self.position).norm() <= spec.attack_range)
          mask |= std::uint64_t{1} << (kMoveActionCount + e_count + k);
      }
    } else if (spec.damage > 0) {
      for (int e = 0; e < e_count; ++e) {
        const auto& ent = state_.entities[e];
        if (ent.alive && (ent.position - self.position).norm() <= spec.attack_range)
          mask |= std::uint64_t{1} << (kMoveActionCount + e);
      }
    }
    return mask;
  }

  EntityKind task_kind() const override { return EntityKind::enemy; }

  metrics::SemanticGrouping semantic_grouping() const override {
    metrics::SemanticGrouping g;
    g.group_count = 3;
    g.group_of.assign(action_count_, 0);
    const int e_count = params_.enemies;
    for (int k = 0; k < e_count; ++k) g.group_of[kMoveActionCount + k] = 1;
    for (int k = kMoveActionCount + e_count; k < action_count_; ++k) g.group_of[k] = 2;
    return g;
  }

  std::vector<EnemyAction> enemy_actions() const override {
    return scripted_enemy_policy(state_, enemy_, params_.world_size);
  }

 protected:
  double entity_max_health(int) const override { return enemy_.max_health; }
  EntityKind entity_kind() const override { return EntityKind::enemy; }

 private:
  void draw_spawns() {
    const double w = params_.world_size;
    const int a_count = agent_count();
    const double jitter = std::max(params_.spawn_jitter, 1.0);
    if (!params_.agent_positions.empty()) {
      ally_spawn_ = params_.agent_positions;
    } else {
      ally_spawn_ = draw_distinct(lattice_points(Vec2(1, w / 2), jitter, w), a_count, state_.rng);
    }
    enemy_spawn_ =
        draw_distinct(lattice_points(Vec2(w - 1, w / 2), jitter, w), params_.enemies, state_.rng);
  }

  UnitStats enemy_;
  std::vector<Vec2> ally_spawn_;
  std::vector<Vec2> enemy_spawn_;
};

}  // namespace

std::vector<EnemyAction> scripted_enemy_policy(const WorldState& state,
                                               const UnitStats& enemy_stats, double world_size) {
  std::vector<EnemyAction> out(state.entities.size());
  for (std::size_t e = 0; e < state.entities.size(); ++e) {
    const auto& ent = state.entities[e];
    if (!ent.alive) continue;
    int target = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int a = 0; a < static_cast<int>(state.agents.size()); ++a) {
      if (!state.agents[a].alive) continue;
      const double d = (state.agents[a].position - ent.position).norm();
      if (d < best) {
        best = d;
        target = a;
      }
    }
    if (target < 0) continue;
    if (best <= enemy_stats.attack_range) {
      out[e] = {EnemyActionKind::attack, target, ent.position};
      continue;
    }
    const Vec2 dir = (state.agents[target].position - ent.position) / best;
    const double travel = std::min(enemy_stats.move_speed, best - 0.9 * enemy_stats.attack_range);
    const Vec2 dest = (ent.position + dir * std::max(0.0, travel)).cwiseMax(0.0).cwiseMin(world_size);
    out[e] = {EnemyActionKind::move, target, dest};
  }
  return out;
}

std::unique_ptr<Environment> make_scenario(std::string_view name, const ScenarioParams& params,
                                           std::uint64_t seed) {
  if (name == "spread") return std::make_unique<SpreadEnv>(std::string(name), params, seed, false);
  if (name == "double_spread")
    return std::make_unique<SpreadEnv>(std::string(name), params, seed, true);
  if (name == "hetero_battle") return std::make_unique<BattleEnv>(std::string(name), params, seed);
  throw Error("unknown-scenario", "unknown scenario '" + std::string(name) + "'");
}

}  // namespace rolediv::env
