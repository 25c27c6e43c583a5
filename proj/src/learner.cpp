#include "rolediv/learner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "rolediv/error.hpp"
#include "rolediv/simplex.hpp"

namespace rolediv::learner {

std::string_view to_string(SharingMode mode) {
  switch (mode) {
    case SharingMode::shared: return "shared";
    case SharingMode::partly_shared: return "partly_shared";
    case SharingMode::no_shared: return "no_shared";
    case SharingMode::selective: return "selective";
  }
  return "unknown";
}

SharingMode sharing_mode_from_string(std::string_view name) {
  for (auto m : {SharingMode::shared, SharingMode::partly_shared, SharingMode::no_shared,
                 SharingMode::selective})
    if (to_string(m) == name) return m;
  throw Error("bad-config", "unknown sharing mode '" + std::string(name) + "'");
}

std::string_view to_string(CreditKind kind) {
  switch (kind) {
    case CreditKind::iql: return "iql";
    case CreditKind::vdn_sum: return "vdn_sum";
    case CreditKind::learnable_weights: return "learnable_weights";
  }
  return "unknown";
}

CreditKind credit_kind_from_string(std::string_view name) {
  for (auto k : {CreditKind::iql, CreditKind::vdn_sum, CreditKind::learnable_weights})
    if (to_string(k) == name) return k;
  throw Error("bad-config", "unknown credit assignment '" + std::string(name) + "'");
}

std::vector<int> selective_groups(std::span<const env::AgentSpec> specs) {
  std::map<env::UnitType, int> ids;
  std::vector<int> out;
  for (const auto& s : specs) {
    auto [it, inserted] = ids.try_emplace(s.unit_type, static_cast<int>(ids.size()));
    out.push_back(it->second);
  }
  return out;
}

SharingPlan SharingPlan::make(SharingMode mode, std::span<const env::AgentSpec> specs) {
  SharingPlan plan;
  plan.mode = mode;
  switch (mode) {
    case SharingMode::shared: plan.prefix.assign(specs.size(), -1); break;
    case SharingMode::partly_shared:
      for (const auto& s : specs) plan.prefix.push_back(static_cast<int>(s.unit_type));
      break;
    case SharingMode::no_shared:
      for (const auto& s : specs) plan.prefix.push_back(s.agent_id);
      break;
    case SharingMode::selective: plan.prefix = selective_groups(specs); break;
  }
  return plan;
}

// -------------------------------------------------------------- observation

std::size_t ObsKeyHash::operator()(const ObsKey& key) const noexcept {
  std::uint64_t h = 1469598103934665603ull;
  for (std::int32_t v : key) {
    h ^= static_cast<std::uint32_t>(v);
    h *= 1099511628211ull;
  }
  return static_cast<std::size_t>(h);
}

namespace {

std::int32_t bucket(double v, double size) {
  return static_cast<std::int32_t>(std::floor(v / size + 1e-9));
}

std::int32_t quartile(double fraction) {
  return std::clamp(static_cast<std::int32_t>(std::floor(fraction * 4.0)), 0, 3);
}

}  // namespace

ObsKey encode_observation(const env::Observation& obs, env::EntityKind task_kind,
                          const EncoderConfig& cfg) {
  if (!obs.alive) return {kDead};
  ObsKey key;
  if (cfg.absolute_position) {
    key.push_back(bucket(obs.position.x(), cfg.bucket));
    key.push_back(bucket(obs.position.y(), cfg.bucket));
  }
  key.push_back(quartile(obs.health_fraction));
  for (env::EntityKind kind : {env::EntityKind::ally, task_kind}) {
    int kept = 0, seen = 0;
    for (const auto& v : obs.visible) {
      if (v.kind != kind) continue;
      ++seen;
      if (kept < cfg.nearest_per_kind) {
        key.push_back(bucket(v.relative.x(), cfg.bucket));
        key.push_back(bucket(v.relative.y(), cfg.bucket));
        ++kept;
      }
    }
    for (; kept < cfg.nearest_per_kind; ++kept) {
      key.push_back(kAbsent);
      key.push_back(kAbsent);
    }
    if (cfg.counts) key.push_back(std::min(seen, 3));
  }
  return key;
}

ObsKey communication_block(std::span<const env::Observation> observations, int agent,
                           env::EntityKind task_kind, const EncoderConfig& cfg) {
  env::Vec2 pos_sum = env::Vec2::Zero(), task_sum = env::Vec2::Zero();
  int senders = 0, with_task = 0;
  for (int j = 0; j < static_cast<int>(observations.size()); ++j) {
    const auto& o = observations[j];
    if (j == agent || !o.alive) continue;
    pos_sum += o.position;
    ++senders;
    for (const auto& v : o.visible)
      if (v.kind == task_kind) {
        task_sum += v.relative;
        ++with_task;
        break;
      }
  }
  ObsKey block(4, kEmpty);
  if (senders > 0) {
    block[0] = bucket(pos_sum.x() / senders, cfg.bucket);
    block[1] = bucket(pos_sum.y() / senders, cfg.bucket);
  }
  if (with_task > 0) {
    block[2] = bucket(task_sum.x() / with_task, cfg.bucket);
    block[3] = bucket(task_sum.y() / with_task, cfg.bucket);
  }
  return block;
}

std::vector<ObsKey> apply_communication(std::vector<ObsKey> keys,
                                        std::span<const env::Observation> observations,
                                        const CommConfig& comm, env::EntityKind task_kind,
                                        const EncoderConfig& cfg) {
  if (!comm.enabled) return keys;
  for (int a = 0; a < static_cast<int>(keys.size()); ++a) {
    if (!observations[a].alive) continue;
    const ObsKey block = communication_block(observations, a, task_kind, cfg);
    keys[a].insert(keys[a].end(), block.begin(), block.end());
  }
  return keys;
}

std::vector<ObsKey> encode_joint(std::span<const env::Observation> observations,
                                 const SharingPlan& plan, const CommConfig& comm,
                                 env::EntityKind task_kind, const EncoderConfig& cfg) {
  std::vector<ObsKey> keys;
  keys.reserve(observations.size());
  for (const auto& o : observations) keys.push_back(encode_observation(o, task_kind, cfg));
  keys = apply_communication(std::move(keys), observations, comm, task_kind, cfg);
  for (std::size_t a = 0; a < keys.size(); ++a) keys[a].insert(keys[a].begin(), plan.prefix[a]);
  return keys;
}

// -------------------------------------------------------------- Q function

QFunction::QFunction(int action_count, double bound, double default_value)
    : action_count_(action_count), bound_(bound),
      default_row_(action_count, std::clamp(default_value, -bound, bound)) {
  if (action_count < 1) throw Error("bad-config", "a Q function needs at least one action");
  if (!(bound > 0)) throw Error("bad-config", "Q bound must be positive");
}

double QFunction::value(const ObsKey& key, int action) const { return row(key)[action]; }

std::span<const double> QFunction::row(const ObsKey& key) const {
  const auto it = table_.find(key);
  return it == table_.end() ? std::span<const double>(default_row_)
                            : std::span<const double>(it->second);
}

std::vector<double>& QFunction::mutable_row(const ObsKey& key) {
  auto it = table_.find(key);
  if (it == table_.end()) it = table_.emplace(key, default_row_).first;
  return it->second;
}

void QFunction::add(const ObsKey& key, int action, double delta) {
  double& v = mutable_row(key)[action];
  v = std::clamp(v + delta, -bound_, bound_);
}

void QFunction::set(const ObsKey& key, int action, double v) {
  mutable_row(key)[action] = std::clamp(v, -bound_, bound_);
}

int greedy_action(std::span<const double> row, std::uint64_t available) {
  int best = -1;
  for (int a = 0; a < static_cast<int>(row.size()); ++a) {
    if (!((available >> a) & 1u)) continue;
    if (best < 0 || row[a] > row[best]) best = a;
  }
  return best < 0 ? 0 : best;
}

double max_available(std::span<const double> row, std::uint64_t available) {
  return row[greedy_action(row, available)];
}

JointChoice select_actions(const QFunction& q, std::span<const ObsKey> keys,
                           std::span<const std::uint64_t> available, double epsilon,
                           std::mt19937_64& rng) {
  JointChoice out;
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  const int n_actions = q.action_count();
  for (std::size_t i = 0; i < keys.size(); ++i) {
    std::uint64_t mask = available[i];
    if (mask == 0) mask = 1;
    std::vector<int> legal;
    for (int a = 0; a < n_actions; ++a)
      if ((mask >> a) & 1u) legal.push_back(a);
    const int greedy = greedy_action(q.row(keys[i]), mask);

    std::vector<double> dist(n_actions, 0.0);
    for (int a : legal) dist[a] = epsilon / static_cast<double>(legal.size());
    dist[greedy] += 1.0 - epsilon;

    int chosen = greedy;
    if (epsilon > 0 && coin(rng) < epsilon) {
      std::uniform_int_distribution<std::size_t> pick(0, legal.size() - 1);
      chosen = legal[pick(rng)];
    }
    out.actions.push_back(chosen);
    out.distributions.push_back(std::move(dist));
  }
  return out;
}

// ------------------------------------------------------------------ update

void td_update(QFunction& q, CreditAssignment& credit, std::span<const Transition> batch,
               double gamma, double alpha) {
  std::vector<const Transition*> refs;
  refs.reserve(batch.size());
  for (const auto& t : batch) refs.push_back(&t);
  td_update(q, credit, std::span<const Transition* const>(refs), gamma, alpha);
}

void td_update(QFunction& q, CreditAssignment& credit, std::span<const Transition* const> batch,
               double gamma, double alpha) {
  if (batch.empty()) throw Error("empty-batch", "td_update needs at least one transition");
  const int agents = static_cast<int>(batch.front()->keys.size());
  if (credit.kind == CreditKind::learnable_weights) {
    if (credit.weights.size() == 0) credit.weights = Eigen::VectorXd::Constant(agents, 1.0 / agents);
    if (credit.weights.size() != agents)
      throw Error("bad-config", "credit weight count differs from the agent count");
  }

  struct Accum {
    double sum = 0;
    int count = 0;
  };
  std::unordered_map<ObsKey, std::vector<Accum>, ObsKeyHash> touched;
  auto contribute = [&](const ObsKey& key, int action, double delta) {
    auto it = touched.find(key);
    if (it == touched.end()) it = touched.emplace(key, std::vector<Accum>(q.action_count())).first;
    it->second[action].sum += delta;
    it->second[action].count += 1;
  };
  Eigen::VectorXd weight_grad = Eigen::VectorXd::Zero(agents);

  for (const Transition* tp : batch) {
    const Transition& t = *tp;
    auto next_max = [&](int i) {
      if (t.terminal || !t.next_alive[i]) return 0.0;
      return max_available(q.row(t.next_keys[i]), t.next_available[i]);
    };
    switch (credit.kind) {
      case CreditKind::iql:
        for (int i = 0; i < agents; ++i) {
          if (!t.alive[i]) continue;
          const double delta = t.reward + gamma * next_max(i) - q.value(t.keys[i], t.actions[i]);
          contribute(t.keys[i], t.actions[i], delta);
        }
        break;
      case CreditKind::vdn_sum: {
        double q_tot = 0, next_tot = 0;
        for (int i = 0; i < agents; ++i) {
          if (!t.alive[i]) continue;
          q_tot += q.value(t.keys[i], t.actions[i]);
        }
        for (int i = 0; i < agents; ++i) next_tot += next_max(i);
        const double delta = t.reward + gamma * next_tot - q_tot;
        for (int i = 0; i < agents; ++i)
          if (t.alive[i]) contribute(t.keys[i], t.actions[i], delta);
        break;
      }
      case CreditKind::learnable_weights: {
        const auto& w = credit.weights;
        Eigen::VectorXd qi = Eigen::VectorXd::Zero(agents);
        double next_tot = 0;
        for (int i = 0; i < agents; ++i) {
          if (t.alive[i]) qi[i] = q.value(t.keys[i], t.actions[i]);
          next_tot += w[i] * next_max(i);
        }
        const double delta = t.reward + gamma * next_tot - w.dot(qi);
        for (int i = 0; i < agents; ++i)
          if (t.alive[i]) contribute(t.keys[i], t.actions[i], delta * w[i]);
        weight_grad += delta * qi;
        break;
      }
    }
  }

  for (const auto& [key, accums] : touched)
    for (int a = 0; a < q.action_count(); ++a)
      if (accums[a].count > 0) q.add(key, a, alpha * accums[a].sum / accums[a].count);

  if (credit.kind == CreditKind::learnable_weights && credit.weight_lr > 0) {
    weight_grad /= static_cast<double>(batch.size());
    credit.weights = project_to_simplex(credit.weights + credit.weight_lr * weight_grad);
  }
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw Error("bad-config", "replay capacity must be positive");
  items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::push(Transition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
  } else {
    items_[next_] = std::move(t);
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<Transition> ReplayBuffer::sample(std::size_t count, std::mt19937_64& rng) const {
  std::vector<Transition> out;
  if (items_.empty()) return out;
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) out.push_back(items_[pick(rng)]);
  return out;
}

std::vector<const Transition*> ReplayBuffer::sample_refs(std::size_t count,
                                                         std::mt19937_64& rng) const {
  std::vector<const Transition*> out;
  if (items_.empty()) return out;
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) out.push_back(&items_[pick(rng)]);
  return out;
}

// ---------------------------------------------------------------- training

void TrainingConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error("bad-config", what); };
  if (!(gamma >= 0 && gamma < 1)) fail("training.gamma must lie in [0, 1)");
  if (!(alpha > 0)) fail("training.alpha must be positive");
  if (!(epsilon_start >= 0 && epsilon_start <= 1)) fail("training.epsilon_start must lie in [0, 1]");
  if (!(epsilon_end >= 0 && epsilon_end <= epsilon_start))
    fail("training.epsilon_end must lie in [0, epsilon_start]");
  if (epsilon_decay_steps < 0) fail("training.epsilon_decay_steps must be non-negative");
  if (replay_capacity == 0) fail("training.replay_capacity must be positive");
  if (batch_size == 0) fail("training.batch_size must be positive");
  if (update_every < 1) fail("training.update_every must be at least 1");
  if (total_steps < 0) fail("training.total_steps must be non-negative");
  if (eval_every < 1) fail("training.eval_every must be at least 1");
  if (eval_episodes < 1) fail("training.eval_episodes must be at least 1");
  if (log_episodes < 0) fail("training.log_episodes must be non-negative");
  if (log_epsilon && !(*log_epsilon >= 0 && *log_epsilon <= 1))
    fail("training.log_epsilon must lie in [0, 1]");
  if (!(reward_bound > 0)) fail("training.reward_bound must be positive");
  if (!(encoder.bucket > 0)) fail("training.encoder.bucket must be positive");
  if (encoder.nearest_per_kind < 0) fail("training.encoder.nearest_per_kind must be non-negative");
}

double TrainingConfig::epsilon_at(int step) const {
  if (epsilon_decay_steps == 0 || step >= epsilon_decay_steps) return epsilon_end;
  const double frac = static_cast<double>(step) / epsilon_decay_steps;
  return epsilon_start + (epsilon_end - epsilon_start) * frac;
}

namespace {

std::vector<std::uint64_t> availability(const env::Environment& e) {
  std::vector<std::uint64_t> out;
  for (int a = 0; a < e.agent_count(); ++a) out.push_back(e.available_actions(a));
  return out;
}

std::vector<bool> alive_flags(std::span<const env::Observation> obs) {
  std::vector<bool> out;
  for (const auto& o : obs) out.push_back(o.alive);
  return out;
}

EpisodeLog record_episode(env::Environment& e, const QFunction& q, const SharingPlan& plan,
                          const CommConfig& comm, const EncoderConfig& cfg, double epsilon,
                          std::mt19937_64& rng, EpisodeHeader header) {
  EpisodeLog log{std::move(header), {}};
  auto obs = e.reset();
  const auto task = e.task_kind();
  for (int tick = 0;; ++tick) {
    const auto keys = encode_joint(obs, plan, comm, task, cfg);
    const auto masks = availability(e);
    const auto choice = select_actions(q, keys, masks, epsilon, rng);

    StepRecord rec;
    rec.tick = tick;
    for (int a = 0; a < e.agent_count(); ++a) {
      const auto& st = e.state().agents[a];
      AgentRecord ar;
      ar.x = st.position.x();
      ar.y = st.position.y();
      ar.alive = st.alive;
      ar.chosen_action = choice.actions[a];
      if (st.alive) {
        ar.action_distribution = choice.distributions[a];
        ar.value = q.value(keys[a], choice.actions[a]);
      }
      rec.agents.push_back(std::move(ar));
    }
    const auto res = e.step(choice.actions);
    rec.reward = res.reward;
    rec.info["allies_alive"] = res.info.allies_alive;
    rec.info["enemy_health"] = res.info.enemy_health;
    log.append(std::move(rec));
    if (res.terminated || res.truncated) break;
    obs = res.observations;
  }
  return log;
}

}  // namespace

double evaluate_greedy(env::Environment& environment, const QFunction& q, const SharingPlan& plan,
                       const CommConfig& comm, const EncoderConfig& cfg, int episodes) {
  std::mt19937_64 unused(0);
  const auto task = environment.task_kind();
  double total = 0;
  for (int ep = 0; ep < episodes; ++ep) {
    auto obs = environment.reset();
    for (;;) {
      const auto keys = encode_joint(obs, plan, comm, task, cfg);
      const auto choice = select_actions(q, keys, availability(environment), 0.0, unused);
      const auto res = environment.step(choice.actions);
      total += res.reward;
      if (res.terminated || res.truncated) break;
      obs = res.observations;
    }
  }
  return total / episodes;
}

TrainingRun train(const EnvFactory& factory, const TrainingConfig& config, SharingMode sharing,
                  CreditAssignment credit, const CommConfig& comm) {
  config.validate();
  auto environment = factory(config.seed);
  const int agents = environment->agent_count();
  const auto plan = SharingPlan::make(sharing, environment->agent_specs());
  if (credit.kind == CreditKind::learnable_weights) {
    if (credit.weights.size() == 0) credit.weights = Eigen::VectorXd::Constant(agents, 1.0 / agents);
    if (credit.weights.size() != agents || !on_simplex(credit.weights))
      throw Error("bad-config", "strategy.weights must be a simplex vector with one entry per agent");
  }

  TrainingRun run;
  run.q = std::make_shared<QFunction>(environment->action_count(),
                                      config.reward_bound / (1.0 - config.gamma));
  QFunction& q = *run.q;
  const auto task = environment->task_kind();
  const auto& enc = config.encoder;

  auto evaluate = [&] {
    auto fresh = factory(config.seed);
    return evaluate_greedy(*fresh, q, plan, comm, enc, config.eval_episodes);
  };

  std::mt19937_64 explore(config.seed ^ 0x9e3779b97f4a7c15ull);
  std::mt19937_64 replay_rng(config.seed ^ 0xc2b2ae3d27d4eb4full);
  ReplayBuffer replay(config.replay_capacity);

  run.curve.push_back({0, evaluate()});
  auto obs = environment->reset();
  auto keys = encode_joint(obs, plan, comm, task, enc);
  for (int step = 1; step <= config.total_steps; ++step) {
    const auto masks = availability(*environment);
    const auto choice = select_actions(q, keys, masks, config.epsilon_at(step - 1), explore);
    auto res = environment->step(choice.actions);

    Transition t;
    t.keys = keys;
    t.actions = choice.actions;
    t.alive = alive_flags(obs);
    t.reward = res.reward;
    t.next_keys = encode_joint(res.observations, plan, comm, task, enc);
    t.next_available = availability(*environment);
    t.next_alive = alive_flags(res.observations);
    t.terminal = res.terminated;
    const bool done = res.terminated || res.truncated;
    keys = t.next_keys;
    replay.push(std::move(t));

    if (done) {
      obs = environment->reset();
      keys = encode_joint(obs, plan, comm, task, enc);
    } else {
      obs = std::move(res.observations);
    }

    if (step % config.update_every == 0 && replay.size() >= config.batch_size) {
      const auto batch = replay.sample_refs(config.batch_size, replay_rng);
      td_update(q, credit, std::span<const Transition* const>(batch), config.gamma, config.alpha);
    }
    if (step % config.eval_every == 0 || step == config.total_steps)
      run.curve.push_back({step, evaluate()});
  }
  run.weights = credit.weights;

  if (config.log_episodes > 0) {
    auto log_env = factory(config.seed);
    std::mt19937_64 log_rng(config.seed ^ 0x165667b19e3779f9ull);
    const double eps = config.log_epsilon.value_or(config.epsilon_end);
    const auto grouping = log_env->semantic_grouping();
    for (int ep = 0; ep < config.log_episodes; ++ep) {
      EpisodeHeader h;
      h.scenario = log_env->name();
      h.config_hash = config.config_hash;
      h.seed = config.seed;
      h.episode = ep;
      h.agent_count = agents;
      h.action_count = log_env->action_count();
      h.vision_scope = log_env->vision_scope();
      h.semantic_groups = grouping.group_of;
      run.logs.push_back(record_episode(*log_env, q, plan, comm, enc, eps, log_rng, std::move(h)));
    }
  }
  return run;
}

}  // namespace rolediv::learner
