#include "rolediv/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "rolediv/error.hpp"

namespace rolediv::config {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& why) {
  throw Error("bad-config", path + ": " + why);
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

// Walks one JSON object, remembering which keys were read so leftovers can
// be rejected as unknown.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_.empty() ? "<root>" : path_, "expected an object");
  }

  const json* get(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string path(const std::string& key) const { return join(path_, key); }

  void number(const std::string& key, double& out) {
    if (const json* v = get(key)) out = as_number(*v, path(key));
  }

  template <typename Int>
  void integer(const std::string& key, Int& out, long long lo = std::numeric_limits<long long>::min()) {
    if (const json* v = get(key)) out = static_cast<Int>(as_integer(*v, path(key), lo));
  }

  void boolean(const std::string& key, bool& out) {
    if (const json* v = get(key)) {
      if (!v->is_boolean()) fail(path(key), "expected true or false");
      out = v->get<bool>();
    }
  }

  void string(const std::string& key, std::string& out) {
    if (const json* v = get(key)) out = as_string(*v, path(key));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) fail(path(it.key()), "unknown key");
  }

  static double as_number(const json& v, const std::string& path) {
    if (!v.is_number()) fail(path, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(path, "expected a finite number");
    return x;
  }

  static long long as_integer(const json& v, const std::string& path, long long lo) {
    if (!v.is_number_integer()) fail(path, "expected an integer");
    const long long x = v.is_number_unsigned()
                            ? static_cast<long long>(std::min<std::uint64_t>(
                                  v.get<std::uint64_t>(), std::numeric_limits<long long>::max()))
                            : v.get<long long>();
    if (x < lo) fail(path, "must be at least " + std::to_string(lo));
    return x;
  }

  static std::string as_string(const json& v, const std::string& path) {
    if (!v.is_string()) fail(path, "expected a string");
    return v.get<std::string>();
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

const json& as_array(const json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array");
  return v;
}

// Library parsers throw their own codes; re-tag them with the field path.
template <typename Fn>
auto at_path(const std::string& path, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.code() == "bad-config") throw;
    fail(path, e.what());
  }
}

env::Vec2 parse_point(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 2) fail(path, "expected [x, y]");
  return {Fields::as_number(v[0], path + "[0]"), Fields::as_number(v[1], path + "[1]")};
}

std::vector<env::Vec2> parse_points(const json& v, const std::string& path) {
  std::vector<env::Vec2> out;
  for (std::size_t k = 0; k < as_array(v, path).size(); ++k)
    out.push_back(parse_point(v[k], path + "[" + std::to_string(k) + "]"));
  return out;
}

env::UnitType parse_unit(const json& v, const std::string& path) {
  const std::string name = Fields::as_string(v, path);
  return at_path(path, [&] { return env::unit_type_from_string(name); });
}

void parse_units(const json& v, const std::string& path, env::UnitTable& table) {
  Fields f(v, path);
  for (auto it = v.begin(); it != v.end(); ++it) {
    const std::string p = join(path, it.key());
    const env::UnitType type = at_path(p, [&] { return env::unit_type_from_string(it.key()); });
    f.get(it.key());
    Fields u(*it, p);
    auto& stats = table[type];
    u.number("max_health", stats.max_health);
    u.number("attack_range", stats.attack_range);
    u.number("damage", stats.damage);
    u.number("move_speed", stats.move_speed);
    u.finish();
  }
  f.finish();
}

void parse_params(const json& v, const std::string& path, env::ScenarioParams& p) {
  Fields f(v, path);
  f.integer("agents", p.agents, 1);
  f.integer("landmarks", p.landmarks, 1);
  if (const json* x = f.get("landmark_positions"))
    p.landmark_positions = parse_points(*x, f.path("landmark_positions"));
  if (const json* x = f.get("landmark_weights")) {
    p.landmark_weights.clear();
    for (std::size_t k = 0; k < as_array(*x, f.path("landmark_weights")).size(); ++k)
      p.landmark_weights.push_back(
          Fields::as_number((*x)[k], f.path("landmark_weights") + "[" + std::to_string(k) + "]"));
  }
  if (const json* x = f.get("allies")) {
    p.allies.clear();
    for (std::size_t k = 0; k < as_array(*x, f.path("allies")).size(); ++k)
      p.allies.push_back(parse_unit((*x)[k], f.path("allies") + "[" + std::to_string(k) + "]"));
  }
  f.integer("enemies", p.enemies, 0);
  if (const json* x = f.get("enemy_type")) p.enemy_type = parse_unit(*x, f.path("enemy_type"));
  if (const json* x = f.get("units")) parse_units(*x, f.path("units"), p.units);
  f.number("win_bonus", p.win_bonus);
  f.number("damage_received_weight", p.damage_received_weight);
  if (const json* x = f.get("agent_positions"))
    p.agent_positions = parse_points(*x, f.path("agent_positions"));
  f.number("world_size", p.world_size);
  f.number("vision_scope", p.vision_scope);
  f.number("move_speed", p.move_speed);
  f.integer("episode_limit", p.episode_limit, 0);
  f.number("reward_bound", p.reward_bound);
  f.boolean("randomize_start", p.randomize_start);
  f.number("spawn_jitter", p.spawn_jitter);
  f.finish();
}

void parse_training(const json& v, const std::string& path, learner::TrainingConfig& t) {
  Fields f(v, path);
  f.number("gamma", t.gamma);
  f.number("alpha", t.alpha);
  f.number("epsilon_start", t.epsilon_start);
  f.number("epsilon_end", t.epsilon_end);
  f.integer("epsilon_decay_steps", t.epsilon_decay_steps, 0);
  f.integer("replay_capacity", t.replay_capacity, 1);
  f.integer("batch_size", t.batch_size, 1);
  f.integer("update_every", t.update_every, 1);
  f.integer("total_steps", t.total_steps, 0);
  f.integer("eval_every", t.eval_every, 1);
  f.integer("eval_episodes", t.eval_episodes, 1);
  f.integer("log_episodes", t.log_episodes, 0);
  if (const json* x = f.get("log_epsilon"); x && !x->is_null())
    t.log_epsilon = Fields::as_number(*x, f.path("log_epsilon"));
  f.number("reward_bound", t.reward_bound);
  if (const json* x = f.get("encoder")) {
    Fields e(*x, f.path("encoder"));
    e.number("bucket", t.encoder.bucket);
    e.integer("nearest_per_kind", t.encoder.nearest_per_kind, 0);
    e.boolean("absolute_position", t.encoder.absolute_position);
    e.boolean("counts", t.encoder.counts);
    e.finish();
  }
  f.finish();
  if (!(t.encoder.bucket > 0)) fail(join(path, "encoder.bucket"), "must be positive");
  at_path(path, [&] {
    t.validate();
    return 0;
  });
}

void parse_strategy(const json& v, const std::string& path, StrategyBlock& s) {
  Fields f(v, path);
  if (const json* x = f.get("sharing")) {
    const auto name = Fields::as_string(*x, f.path("sharing"));
    s.sharing = at_path(f.path("sharing"), [&] { return learner::sharing_mode_from_string(name); });
  }
  if (const json* x = f.get("credit")) {
    const auto name = Fields::as_string(*x, f.path("credit"));
    s.credit = at_path(f.path("credit"), [&] { return learner::credit_kind_from_string(name); });
  }
  f.boolean("communication", s.communication);
  f.number("weight_lr", s.weight_lr);
  if (s.weight_lr < 0) fail(f.path("weight_lr"), "must be non-negative");
  f.finish();
}

metrics::Reducer parse_reducer(const std::string& name, const std::string& path) {
  if (name == "time_mean") return metrics::Reducer::time_mean;
  if (name == "episode_end") return metrics::Reducer::episode_end;
  if (name == "episode_max") return metrics::Reducer::episode_max;
  fail(path, "unknown reducer '" + name + "'");
}

void parse_metrics(const json& v, const std::string& path, metrics::MeasurementOptions& m) {
  Fields f(v, path);
  if (const json* x = f.get("half_window"); x && !x->is_null())
    m.series.half_window = static_cast<int>(Fields::as_integer(*x, f.path("half_window"), 0));
  f.number("smoothing", m.series.smoothing);
  if (!(m.series.smoothing > 0)) fail(f.path("smoothing"), "must be positive");
  if (const json* x = f.get("semantic_groups"); x && !x->is_null()) {
    metrics::SemanticGrouping g;
    int top = -1;
    for (std::size_t k = 0; k < as_array(*x, f.path("semantic_groups")).size(); ++k) {
      const int id = static_cast<int>(Fields::as_integer(
          (*x)[k], f.path("semantic_groups") + "[" + std::to_string(k) + "]", 0));
      g.group_of.push_back(id);
      top = std::max(top, id);
    }
    g.group_count = top + 1;
    at_path(f.path("semantic_groups"), [&] {
      g.validate();
      return 0;
    });
    m.series.grouping = g;
  }
  if (const json* x = f.get("reducer"))
    m.reducer = parse_reducer(Fields::as_string(*x, f.path("reducer")), f.path("reducer"));
  if (const json* x = f.get("contribution")) {
    const auto name = Fields::as_string(*x, f.path("contribution"));
    if (name == "episode_max")
      m.contribution = metrics::ContributionReduction::episode_max;
    else if (name == "per_step")
      m.contribution = metrics::ContributionReduction::per_step;
    else
      fail(f.path("contribution"), "expected episode_max or per_step");
  }
  f.finish();
}

template <typename T, typename Fn>
std::vector<T> parse_list(const json& v, const std::string& path, Fn&& item) {
  std::vector<T> out;
  for (std::size_t k = 0; k < as_array(v, path).size(); ++k)
    out.push_back(item(v[k], path + "[" + std::to_string(k) + "]"));
  if (out.empty()) fail(path, "must not be empty");
  return out;
}

CompareBlock parse_compare(const json& v, const std::string& path) {
  Fields f(v, path);
  std::vector<learner::SharingMode> sharing = {learner::SharingMode::no_shared};
  std::vector<bool> comm = {false};
  std::vector<learner::CreditKind> credit = {learner::CreditKind::vdn_sum};
  if (const json* x = f.get("sharing"))
    sharing = parse_list<learner::SharingMode>(*x, f.path("sharing"), [](const json& e, auto p) {
      const auto name = Fields::as_string(e, p);
      return at_path(p, [&] { return learner::sharing_mode_from_string(name); });
    });
  if (const json* x = f.get("communication"))
    comm = parse_list<bool>(*x, f.path("communication"), [](const json& e, auto p) {
      if (!e.is_boolean()) fail(p, "expected true or false");
      return e.get<bool>();
    });
  if (const json* x = f.get("credit"))
    credit = parse_list<learner::CreditKind>(*x, f.path("credit"), [](const json& e, auto p) {
      const auto name = Fields::as_string(e, p);
      return at_path(p, [&] { return learner::credit_kind_from_string(name); });
    });
  CompareBlock out;
  const json* target = f.get("target_return");
  if (!target) fail(f.path("target_return"), "required");
  out.target_return = Fields::as_number(*target, f.path("target_return"));
  f.boolean("recommend", out.recommend);
  f.finish();
  for (auto s : sharing)
    for (bool c : comm)
      for (auto k : credit) out.grid.push_back({s, c, k});
  return out;
}

fqi::SweepGrid parse_theory(const json& v, const std::string& path) {
  Fields f(v, path);
  fqi::SweepGrid g;
  f.string("family", g.family);
  f.integer("agents", g.agents, 1);
  f.number("gamma", g.gamma);
  f.number("reward_noise", g.reward_noise);
  if (const json* x = f.get("samples"))
    g.samples = parse_list<long>(*x, f.path("samples"), [](const json& e, auto p) {
      return static_cast<long>(Fields::as_integer(e, p, 1));
    });
  if (const json* x = f.get("iterations"))
    g.iterations = parse_list<int>(*x, f.path("iterations"), [](const json& e, auto p) {
      return static_cast<int>(Fields::as_integer(e, p, 0));
    });
  if (const json* x = f.get("modes"))
    g.modes = parse_list<fqi::FqiMode>(*x, f.path("modes"), [](const json& e, auto p) {
      const auto name = Fields::as_string(e, p);
      return at_path(p, [&] { return fqi::fqi_mode_from_string(name); });
    });
  if (const json* x = f.get("hypotheses"))
    g.hypotheses = parse_list<fqi::Hypothesis>(*x, f.path("hypotheses"), [](const json& e, auto p) {
      const auto name = Fields::as_string(e, p);
      return at_path(p, [&] { return fqi::hypothesis_from_string(name); });
    });
  if (const json* x = f.get("diversity"))
    g.diversity = parse_list<double>(*x, f.path("diversity"),
                                     [](const json& e, auto p) { return Fields::as_number(e, p); });
  f.number("nu_skew", g.nu_skew);
  f.finish();
  return g;
}

std::vector<std::uint64_t> parse_seeds(const json& v, const std::string& path) {
  return parse_list<std::uint64_t>(v, path, [](const json& e, auto p) {
    if (!e.is_number_unsigned()) fail(p, "expected a non-negative integer");
    return e.get<std::uint64_t>();
  });
}

void finalize(RunConfig& cfg) {
  cfg.hash = canonical_hash(cfg.document);
  cfg.training.config_hash = cfg.hash;
  if (cfg.theory) cfg.theory->seeds = cfg.seeds;
}

}  // namespace

learner::EnvFactory RunConfig::factory() const {
  return [name = scenario, params = params](std::uint64_t seed) {
    return env::make_scenario(name, params, seed);
  };
}

diagnosis::GuidelineThresholds parse_thresholds(const json& j, const std::string& path) {
  Fields f(j, path);
  std::string family = "smac";
  f.string("family", family);
  auto t = at_path(f.path("family"), [&] { return diagnosis::GuidelineThresholds::for_family(family); });
  bool overridden = false;
  for (const char* key : {"action_shared_max", "action_noshared_min", "comm_overlap_min",
                          "contribution_learnable_max"})
    if (j.contains(key)) overridden = true;
  f.number("action_shared_max", t.action_shared_max);
  f.number("action_noshared_min", t.action_noshared_min);
  f.number("comm_overlap_min", t.comm_overlap_min);
  f.number("contribution_learnable_max", t.contribution_learnable_max);
  if (const json* x = f.get("action_metric")) {
    const auto name = Fields::as_string(*x, f.path("action_metric"));
    if (name == "semantic")
      t.action_metric = diagnosis::ActionMetric::semantic;
    else if (name == "real")
      t.action_metric = diagnosis::ActionMetric::real;
    else
      fail(f.path("action_metric"), "expected semantic or real");
    overridden = true;
  }
  f.finish();
  if (overridden) t.provenance = "configured (family " + t.family + " with overrides)";
  at_path(path.empty() ? "<thresholds>" : path, [&] {
    t.validate();
    return 0;
  });
  return t;
}

RunConfig parse_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    fail("<document>", e.what());
  }
  RunConfig cfg;
  Fields root(doc, "");
  if (const json* x = root.get("scenario")) {
    Fields s(*x, "scenario");
    s.string("name", cfg.scenario);
    if (const json* p = s.get("params")) parse_params(*p, "scenario.params", cfg.params);
    s.finish();
  }
  if (const json* x = root.get("training")) parse_training(*x, "training", cfg.training);
  if (const json* x = root.get("strategy")) parse_strategy(*x, "strategy", cfg.strategy);
  if (const json* x = root.get("metrics")) parse_metrics(*x, "metrics", cfg.metrics);
  if (const json* x = root.get("seeds")) cfg.seeds = parse_seeds(*x, "seeds");
  root.string("output_dir", cfg.output_dir);
  if (const json* x = root.get("compare")) cfg.compare = parse_compare(*x, "compare");
  if (const json* x = root.get("thresholds")) cfg.thresholds = parse_thresholds(*x, "thresholds");
  if (const json* x = root.get("theory")) cfg.theory = parse_theory(*x, "theory");
  root.finish();

  // Build one environment up front so scenario errors surface as config
  // errors before any work starts.
  at_path("scenario", [&] {
    env::make_scenario(cfg.scenario, cfg.params, 0);
    return 0;
  });
  if (cfg.theory) {
    cfg.theory->seeds = cfg.seeds;
    at_path("theory", [&] {
      cfg.theory->validate();
      return 0;
    });
  }
  cfg.document = std::move(doc);
  finalize(cfg);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("bad-config", path + ": cannot open config file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

void override_seeds(RunConfig& cfg, const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) fail("--seeds", "must not be empty");
  cfg.seeds = seeds;
  cfg.document["seeds"] = seeds;
  finalize(cfg);
}

std::vector<std::uint64_t> parse_seed_list(std::string_view text) {
  std::vector<std::uint64_t> out;
  auto number = [&](std::string_view part) {
    std::uint64_t v = 0;
    const auto [end, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    if (ec != std::errc() || end != part.data() + part.size() || part.empty())
      fail("--seeds", "bad seed '" + std::string(part) + "'");
    return v;
  };
  while (!text.empty()) {
    const auto comma = text.find(',');
    const std::string_view item = text.substr(0, comma);
    const auto dash = item.find('-');
    if (dash == std::string_view::npos) {
      out.push_back(number(item));
    } else {
      const auto lo = number(item.substr(0, dash));
      const auto hi = number(item.substr(dash + 1));
      if (hi < lo || hi - lo > 100000) fail("--seeds", "bad range '" + std::string(item) + "'");
      for (auto s = lo; s <= hi; ++s) out.push_back(s);
    }
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  if (out.empty()) fail("--seeds", "must not be empty");
  return out;
}

metrics::TaskMeasurement parse_measurement(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw Error("bad-measurement", e.what());
  }
  try {
    Fields f(doc, "");
    metrics::TaskMeasurement m;
    auto required = [&](const char* key, double& out) {
      const json* v = f.get(key);
      if (!v) fail(key, "required");
      out = Fields::as_number(*v, key);
    };
    required("action_semantic", m.action_semantic);
    required("action_real", m.action_real);
    required("trajectory_overlap", m.trajectory_overlap);
    required("contribution", m.contribution);
    f.string("provenance", m.provenance);
    f.get("config_hash");
    f.get("logs");
    f.finish();
    m.validate();
    return m;
  } catch (const Error& e) {
    if (e.code() == "bad-measurement") throw;
    throw Error("bad-measurement", e.what());
  }
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string canonical_hash(const json& doc) {
  json copy = doc;
  if (copy.is_object()) copy.erase("output_dir");
  return fnv1a_hex(copy.dump());  // std::map keys: sorted, so the dump is canonical
}

}  // namespace rolediv::config
