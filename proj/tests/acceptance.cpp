// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [--configs DIR] [criterion ...]
//
// With no criterion numbers every criterion runs. Exit status is 0 only when
// every selected criterion passed.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "rolediv/commands.hpp"
#include "rolediv/config.hpp"
#include "rolediv/diagnosis.hpp"
#include "rolediv/episode_log.hpp"
#include "rolediv/error.hpp"
#include "rolediv/fqi.hpp"
#include "rolediv/measurement.hpp"
#include "rolediv/role_metrics.hpp"

#ifndef ROLEDIV_CONFIG_DIR
#define ROLEDIV_CONFIG_DIR "configs"
#endif

using namespace rolediv;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string g_config_dir = ROLEDIV_CONFIG_DIR;
int g_jobs = std::max(1u, std::thread::hardware_concurrency());

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Eigen::VectorXd random_distribution(std::mt19937_64& rng, int n) {
  std::exponential_distribution<double> e(1);
  std::bernoulli_distribution zero(0.15);
  Eigen::VectorXd p(n);
  for (int k = 0; k < n; ++k) p[k] = zero(rng) ? 0.0 : e(rng);
  if (p.sum() == 0) p[0] = 1;
  return p / p.sum();
}

// ------------------------------------------------------------- 1, 2: geometry

Outcome geometry_monte_carlo() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> radius(0.3, 4.0), unit(0, 1);
  constexpr long kPoints = 1000000;
  double worst = 0;
  for (int pair = 0; pair < 50; ++pair) {
    const double r = radius(rng);
    const double l = unit(rng) * 2.2 * r;
    long inside = 0;
    for (long k = 0; k < kPoints; ++k) {
      // Uniform in the first disk (centre 0), counted when inside the second.
      const double rho = r * std::sqrt(unit(rng));
      const double theta = 2 * std::numbers::pi * unit(rng);
      const double x = rho * std::cos(theta) - l, y = rho * std::sin(theta);
      if (x * x + y * y <= r * r) ++inside;
    }
    const double mc = static_cast<double>(inside) / kPoints;
    worst = std::max(worst, std::abs(mc - metrics::overlap_fraction(l, r)));
  }
  bool exact = true;
  for (double r : {0.5, 1.0, 3.0, 7.25}) {
    exact = exact && metrics::overlap_fraction(0.0, r) == 1.0;
    exact = exact && metrics::overlap_fraction(2 * r, r) == 0.0;
    exact = exact && metrics::overlap_fraction(2 * r + 1e-3, r) == 0.0;
    exact = exact && metrics::overlap_fraction(10 * r, r) == 0.0;
  }
  const double secs = seconds_since(t0);
  return {worst <= 2e-3 && exact && secs < 30,
          fmt("max |analytic - MC| = %.2e over 50 pairs x 1e6 points; endpoints exact: %s; %.1f s",
              worst, exact ? "yes" : "no", secs)};
}

Outcome geometry_closed_form() {
  const double expected = (2 * std::numbers::pi / 3 - std::sqrt(3.0) / 2) / std::numbers::pi;
  const double got = metrics::overlap_fraction(1.0, 1.0);
  return {std::abs(got - expected) <= 1e-4, fmt("overlap(1, 1) = %.10f, expected %.10f", got, expected)};
}

// ----------------------------------------------------------------- 3: KL

long double textbook_kl(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  const long double eps = 1e-8L;
  const int n = static_cast<int>(p.size());
  std::vector<long double> ps(n), qs(n);
  long double sp = 0, sq = 0;
  for (int k = 0; k < n; ++k) {
    ps[k] = p[k] + eps;
    qs[k] = q[k] + eps;
    sp += ps[k];
    sq += qs[k];
  }
  long double forward = 0, backward = 0;
  for (int k = 0; k < n; ++k) {
    const long double a = ps[k] / sp, b = qs[k] / sq;
    forward += a * std::log(a / b);
    backward += b * std::log(b / a);
  }
  return forward + backward;
}

Outcome symmetric_kl_checks() {
  std::mt19937_64 rng(77);
  double worst = 0;
  bool symmetric = true, nonneg = true, zero_iff_equal = true;
  for (int pair = 0; pair < 100; ++pair) {
    const int n = 2 + pair % 9;
    const auto p = random_distribution(rng, n), q = random_distribution(rng, n);
    const double pq = metrics::symmetric_kl(p, q), qp = metrics::symmetric_kl(q, p);
    symmetric = symmetric && pq == qp;
    nonneg = nonneg && pq >= 0;
    const double self = metrics::symmetric_kl(p, p);
    zero_iff_equal = zero_iff_equal && self <= 1e-12 && (p == q || pq > 1e-12);
    worst = std::max(worst, static_cast<double>(std::abs(pq - textbook_kl(p, q))));
  }
  return {symmetric && nonneg && zero_iff_equal && worst <= 1e-9,
          fmt("symmetry exact: %s; non-negative: %s; zero iff equal: %s; max |fast - long double| = %.2e",
              symmetric ? "yes" : "no", nonneg ? "yes" : "no", zero_iff_equal ? "yes" : "no", worst)};
}

// ------------------------------------------------------------ 4: bounds

EpisodeLog random_log(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> agents(2, 6), length(1, 20);
  std::uniform_real_distribution<double> pos(0, 6), val(-50, 50), scope(0.2, 4);
  std::bernoulli_distribution dead(0.1);
  EpisodeLog log;
  log.header.scenario = "random";
  log.header.agent_count = agents(rng);
  log.header.action_count = 3;
  log.header.vision_scope = scope(rng);
  const int steps = length(rng);
  for (int t = 0; t < steps; ++t) {
    StepRecord s;
    s.tick = t;
    for (int a = 0; a < log.header.agent_count; ++a) {
      AgentRecord r;
      r.alive = !dead(rng);
      r.x = pos(rng);
      r.y = pos(rng);
      r.value = val(rng);
      const auto d = random_distribution(rng, 3);
      r.action_distribution.assign(d.data(), d.data() + 3);
      s.agents.push_back(r);
    }
    log.append(s);
  }
  return log;
}

Outcome diversity_bounds() {
  std::mt19937_64 rng(4);
  long values = 0;
  bool in_range = true;
  for (int k = 0; k < 1000; ++k) {
    const auto log = random_log(rng);
    for (auto kind : {metrics::MetricKind::trajectory_overlap, metrics::MetricKind::contribution})
      for (const auto& p : metrics::diversity_timeseries(log, kind).values) {
        in_range = in_range && p.value >= 0 && p.value <= 1;
        ++values;
      }
  }
  // Aggregation against a plain mean of the unordered pairs.
  bool exact = true;
  std::uniform_real_distribution<double> u(0, 1);
  for (int k = 0; k < 1000; ++k) {
    const int a = 2 + k % 9;
    const auto m = metrics::pairwise_matrix<double>(a, [&](int, int) { return u(rng); });
    std::vector<double> entries;
    for (int i = 0; i < a; ++i)
      for (int j = i + 1; j < a; ++j) entries.push_back(m(i, j));
    double total = 0;
    for (double e : entries) total += e;
    exact = exact && metrics::role_diversity(m) == total / static_cast<double>(entries.size());
  }
  return {in_range && exact, fmt("%ld series values from 1000 random logs in [0, 1]: %s; aggregation "
                                 "equals pairwise mean exactly: %s",
                                 values, in_range ? "yes" : "no", exact ? "yes" : "no")};
}

// ------------------------------------------------------------ 5-8: theory

double sup_error(const fqi::FqiResult& run, const fqi::Oracle& oracle, int t) {
  double e = 0;
  for (std::size_t i = 0; i < oracle.agent_q.size(); ++i)
    e = std::max(e, (run.q(static_cast<int>(i), t) - oracle.agent_q[i]).cwiseAbs().maxCoeff());
  return e;
}

fqi::FiniteMDPSpec theory_mdp() { return fqi::chain_family(0.5, 2, 0.9, 0.15); }

Outcome fqi_decay() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto spec = theory_mdp();
  const auto oracle = fqi::value_iteration_oracle(spec);
  fqi::FqiOptions o;
  o.samples = 100000;
  o.iterations = 30;
  o.seed = 1;
  const auto run = fqi::fqi_run(spec, o);
  Eigen::VectorXd t(30), y(30);
  for (int k = 1; k <= 30; ++k) {
    t[k - 1] = k;
    y[k - 1] = std::log(sup_error(run, oracle, k));
  }
  const double tm = t.mean(), ym = y.mean();
  const double slope = ((t.array() - tm) * (y.array() - ym)).sum() / (t.array() - tm).square().sum();
  const double target = std::log(0.9);
  const double rel = std::abs(slope - target) / std::abs(target);
  const double secs = seconds_since(t0);
  return {rel <= 0.10 && secs < 120,
          fmt("fitted slope %.5f vs ln 0.9 = %.5f (%.1f%% off); %.1f s", slope, target, 100 * rel, secs)};
}

Outcome fqi_sample_scaling() {
  const auto spec = theory_mdp();
  const auto oracle = fqi::value_iteration_oracle(spec);
  std::vector<double> means;
  for (long n : {100L, 1000L, 10000L}) {
    double total = 0;
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
      fqi::FqiOptions o;
      o.samples = n;
      o.iterations = 30;
      o.seed = seed;
      total += fqi::decompose(spec, oracle, fqi::fqi_run(spec, o), o).err;
    }
    means.push_back(total / 8);
  }
  const bool decreasing = means[0] > means[1] && means[1] > means[2];
  return {decreasing, fmt("mean Err over 8 seeds at N = 1e2, 1e3, 1e4: %.5f, %.5f, %.5f",
                          means[0], means[1], means[2])};
}

double binomial_upper_tail(int n, int k) {
  double p = 0;
  for (int j = k; j <= n; ++j) {
    double c = 1;
    for (int i = 0; i < j; ++i) c = c * (n - i) / (i + 1);
    p += c;
  }
  return p / std::pow(2.0, n);
}

Outcome sharing_bias() {
  auto bias_of = [](const fqi::FiniteMDPSpec& spec) {
    const auto oracle = fqi::value_iteration_oracle(spec);
    fqi::FqiOptions o;
    o.mode = fqi::FqiMode::shared;
    o.samples = 10000;
    o.iterations = 30;
    return fqi::decompose(spec, oracle, fqi::fqi_run(spec, o), o).sharing_bias;
  };
  const double clone_bias = bias_of(fqi::chain_family(0.0));
  const auto hetero = fqi::chain_family(1.0);
  const double hetero_bias = bias_of(hetero);
  const auto oracle = fqi::value_iteration_oracle(hetero);
  int wins = 0;
  double shared_total = 0, separate_total = 0;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    fqi::FqiOptions o;
    o.samples = 10000;
    o.iterations = 30;
    o.seed = seed;
    const double sep = fqi::decompose(hetero, oracle, fqi::fqi_run(hetero, o), o).err;
    o.mode = fqi::FqiMode::shared;
    const double shr = fqi::decompose(hetero, oracle, fqi::fqi_run(hetero, o), o).err;
    wins += shr > sep;
    shared_total += shr;
    separate_total += sep;
  }
  const double p = binomial_upper_tail(8, wins);
  const bool pass = clone_bias <= 1e-9 && hetero_bias > 0 && shared_total > separate_total && p < 0.05;
  return {pass, fmt("clone bias %.2e; heterogeneous bias %.4f; mean Err shared %.4f vs separate "
                    "%.4f; shared worse in %d/8 seeds (sign test p = %.4f)",
                    clone_bias, hetero_bias, shared_total / 8, separate_total / 8, wins, p)};
}

Outcome planted_weights() {
  auto spec = fqi::chain_family(0.6, 2);
  spec.team_weights = Eigen::Vector2d(0.3, 0.7);
  const auto oracle = fqi::value_iteration_oracle(spec);
  const Eigen::MatrixXd x = fqi::joint_columns(spec, oracle.agent_q);
  const Eigen::VectorXd y = fqi::flatten_joint(oracle.joint_q);
  const Eigen::VectorXd mu = Eigen::VectorXd::Constant(y.size(), 1.0 / static_cast<double>(y.size()));
  const auto fit = fqi::fit_credit_weights(x, y, mu);
  const double err = (fit.w - Eigen::Vector2d(0.3, 0.7)).cwiseAbs().maxCoeff();
  return {err <= 1e-6, fmt("recovered (%.9f, %.9f); max error %.2e", fit.w[0], fit.w[1], err)};
}

// ------------------------------------------------------------ 9-11: trends

struct CellStats {
  double mean = 0;
  double sd = 0;
  double steps = 0;
};

struct TrendRun {
  metrics::TaskMeasurement measured;
  std::vector<CellStats> cells;  // in the order requested
  double seconds = 0;
};

TrendRun run_trend(const std::string& file, const std::vector<diagnosis::StrategyCell>& cells) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cfg = config::load_config((fs::path(g_config_dir) / file).string());
  if (!cfg.compare) throw Error("bad-config", file + ": compare block required");
  TrendRun out;
  out.measured = commands::measure_baseline(cfg, g_jobs).measurement;
  const auto table = diagnosis::compare_strategies(cfg.factory(), cfg.training, cells, cfg.seeds,
                                                   cfg.compare->target_return,
                                                   cfg.strategy.weight_lr, g_jobs);
  for (const auto& want : cells)
    for (const auto& row : table.rows)
      if (row.cell.label() == want.label())
        out.cells.push_back({row.mean_final_return, row.sd_final_return, row.mean_steps_to_threshold});
  out.seconds = seconds_since(t0);
  return out;
}

double pooled_sd(const CellStats& a, const CellStats& b) {
  return std::sqrt((a.sd * a.sd + b.sd * b.sd) / 2);
}

diagnosis::StrategyCell cell(learner::SharingMode s, bool comm, learner::CreditKind c) {
  return {s, comm, c};
}

Outcome credit_trend() {
  using learner::CreditKind;
  using learner::SharingMode;
  const std::vector cells{cell(SharingMode::no_shared, false, CreditKind::vdn_sum),
                          cell(SharingMode::no_shared, false, CreditKind::learnable_weights)};
  const auto hi = run_trend("credit_asymmetric.json", cells);
  const auto lo = run_trend("credit_clones.json", cells);
  const bool hi_pre = hi.measured.contribution > 0.5;
  const bool hi_ok = hi.cells[0].mean >= hi.cells[1].mean;
  const bool lo_pre = lo.measured.contribution < 0.1;
  const double band = pooled_sd(lo.cells[0], lo.cells[1]);
  const bool lo_ok = lo.cells[1].mean >= lo.cells[0].mean - band;
  std::string detail = fmt(
      "asymmetric: contribution %.3f (need > 0.5: %s), vdn %.3f vs learnable %.3f (%s), %.0f s; "
      "clones: contribution %.3f (need < 0.1: %s), learnable %.3f vs vdn %.3f - sd %.3f (%s), %.0f s",
      hi.measured.contribution, hi_pre ? "met" : "NOT met", hi.cells[0].mean, hi.cells[1].mean,
      hi_ok ? "ok" : "violated", hi.seconds, lo.measured.contribution, lo_pre ? "met" : "NOT met",
      lo.cells[1].mean, lo.cells[0].mean, band, lo_ok ? "ok" : "violated", lo.seconds);
  return {hi_pre && hi_ok && lo_pre && lo_ok && hi.seconds < 300 && lo.seconds < 300, detail};
}

Outcome sharing_trend() {
  using learner::CreditKind;
  using learner::SharingMode;
  const std::vector cells{cell(SharingMode::shared, false, CreditKind::vdn_sum),
                          cell(SharingMode::no_shared, false, CreditKind::vdn_sum)};
  const auto clones = run_trend("sharing_clones.json", cells);
  const auto four = run_trend("sharing_four_types.json", cells);
  const double noshared_min = diagnosis::GuidelineThresholds{}.action_noshared_min;
  const bool clone_ok = clones.cells[0].steps <= clones.cells[1].steps;
  const bool four_pre = four.measured.action_semantic > noshared_min;
  const bool four_ok = four.cells[1].mean >= four.cells[0].mean;
  std::string detail = fmt(
      "clones: steps to target shared %.0f vs no_shared %.0f (%s); four types: action_semantic %.3f "
      "(need > %.1f: %s), final no_shared %.3f vs shared %.3f (%s)",
      clones.cells[0].steps, clones.cells[1].steps, clone_ok ? "ok" : "violated",
      four.measured.action_semantic, noshared_min, four_pre ? "met" : "NOT met", four.cells[1].mean,
      four.cells[0].mean, four_ok ? "ok" : "violated");
  return {clone_ok && four_pre && four_ok, detail};
}

Outcome comm_trend() {
  using learner::CreditKind;
  using learner::SharingMode;
  const std::vector cells{cell(SharingMode::no_shared, true, CreditKind::vdn_sum),
                          cell(SharingMode::no_shared, false, CreditKind::vdn_sum)};
  const auto high = run_trend("comm_high_overlap.json", cells);
  const auto low = run_trend("comm_low_overlap.json", cells);
  const bool high_pre = high.measured.trajectory_overlap >= 0.4;
  const bool high_ok = high.cells[0].mean >= high.cells[1].mean;
  const bool low_pre = low.measured.trajectory_overlap <= 0.2;
  const double band = pooled_sd(low.cells[0], low.cells[1]);
  const bool low_ok = low.cells[0].mean <= low.cells[1].mean + band;
  std::string detail = fmt(
      "high overlap %.3f (need >= 0.4: %s): on %.3f vs off %.3f (%s); low overlap %.3f (need <= 0.2: "
      "%s): on %.3f vs off %.3f + sd %.3f (%s)",
      high.measured.trajectory_overlap, high_pre ? "met" : "NOT met", high.cells[0].mean,
      high.cells[1].mean, high_ok ? "ok" : "violated", low.measured.trajectory_overlap,
      low_pre ? "met" : "NOT met", low.cells[0].mean, low.cells[1].mean, band,
      low_ok ? "ok" : "violated");
  return {high_pre && high_ok && low_pre && low_ok, detail};
}

// ------------------------------------------------------------ 12: diagnosis

struct PublishedRow {
  const char* scenario;
  metrics::TaskMeasurement m;
  std::optional<diagnosis::SharingRec> sharing;
  std::optional<diagnosis::CommRec> comm;
  std::optional<diagnosis::CreditRec> credit;
};

Outcome diagnosis_fidelity() {
  using diagnosis::CommRec;
  using diagnosis::CreditRec;
  using diagnosis::SharingRec;
  constexpr auto fixed = CreditRec::fixed_sum_or_independent;
  constexpr auto learned = CreditRec::learnable_mixer;
  // Published measurements with the winners the benchmark tables declare;
  // empty where no winner is declared.
  const std::vector<PublishedRow> rows{
      {"4m_vs_5m", {1.5, 9.1, 0.47, 0.13, "published"}, {}, CommRec::on, {}},
      {"3s_vs_5z", {2.7, 18.7, 0.21, 0.09, "published"}, {}, CommRec::off, learned},
      {"4m_vs_4z", {3.3, 19.3, 0.31, 0.06, "published"}, SharingRec::partly_shared, CommRec::on, learned},
      {"4m_vs_3z", {3.8, 12.1, 0.35, 0.25, "published"}, SharingRec::partly_shared, CommRec::on, {}},
      {"1c1s1z_vs_1c1s3z", {8.7, 22.0, 0.40, 0.03, "published"}, SharingRec::no_shared, CommRec::on, learned},
      {"1s1m1h1M_vs_3z", {2.4, 13.2, 0.41, 0.61, "published"}, {}, {}, fixed},
      {"1s1m1h1M_vs_4z", {2.7, 15.8, 0.25, 0.75, "published"}, {}, CommRec::off, fixed},
      {"1s1m1h1M_vs_5z", {6.2, 22.5, 0.18, 0.82, "published"}, SharingRec::no_shared, {}, fixed},
  };
  const diagnosis::GuidelineThresholds t;
  int checked = 0;
  std::vector<std::string> mismatches;
  for (const auto& row : rows) {
    const auto r = diagnosis::recommend(row.m, t);
    auto check = [&](const char* axis, auto want, auto got) {
      if (!want) return;
      ++checked;
      if (*want != got)
        mismatches.push_back(std::string(row.scenario) + " " + axis + ": got " +
                             std::string(diagnosis::to_string(got)) + ", published " +
                             std::string(diagnosis::to_string(*want)));
    };
    check("sharing", row.sharing, r.sharing);
    check("communication", row.comm, r.communication);
    check("credit", row.credit, r.credit);
  }
  std::string detail = fmt("%d declared winners over 8 rows, %zu mismatches", checked, mismatches.size());
  for (const auto& m : mismatches) detail += "; " + m;
  return {mismatches.empty() && checked > 0, detail};
}

// ------------------------------------------------------------ 13: determinism

std::map<std::string, std::string> read_dir(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::ifstream in(e.path(), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    files[e.path().filename().string()] = ss.str();
  }
  return files;
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "rolediv_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  const auto cfg_path = root / "config.json";
  std::ofstream(cfg_path) << R"({
    "scenario": {"name": "hetero_battle",
                 "params": {"allies": ["melee", "healer", "ranged"], "enemies": 2, "world_size": 4,
                            "episode_limit": 12}},
    "training": {"total_steps": 1500, "eval_every": 500, "log_episodes": 2},
    "strategy": {"sharing": "partly_shared", "credit": "learnable_weights", "communication": true},
    "seeds": [0, 1, 2],
    "compare": {"sharing": ["shared", "no_shared"], "credit": ["vdn_sum", "iql"], "target_return": 1},
    "theory": {"samples": [200, 2000], "iterations": [5, 10], "modes": ["separate", "shared"],
               "diversity": [0.0, 0.7]}
  })";
  const auto meas_path = root / "m.json";
  std::ofstream(meas_path) << R"({"action_semantic": 3.8, "action_real": 12.1,
                                  "trajectory_overlap": 0.35, "contribution": 0.25})";

  std::vector<std::string> differing;
  int files = 0;
  for (const std::string sub : {"measure", "train", "compare", "theory", "diagnose"}) {
    std::map<std::string, std::string> first;
    for (int rep = 0; rep < 3; ++rep) {
      commands::Invocation inv;
      inv.subcommand = sub;
      inv.out_dir = (root / (sub + std::to_string(rep))).string();
      inv.jobs = rep == 2 ? 3 : 1;  // worker count must not matter either
      if (sub == "diagnose")
        inv.measurement_path = meas_path.string();
      else
        inv.config_path = cfg_path.string();
      std::ostringstream out, err;
      if (commands::run(inv, out, err) != 0) {
        differing.push_back(sub + " failed: " + err.str());
        break;
      }
      const auto got = read_dir(*inv.out_dir);
      if (rep == 0) {
        first = got;
        files += static_cast<int>(got.size());
      } else if (got != first) {
        differing.push_back(sub + " (run " + std::to_string(rep) + ")");
      }
    }
  }
  fs::remove_all(root);
  std::string detail = fmt("%d output files across 5 subcommands compared over 3 runs", files);
  for (const auto& d : differing) detail += "; differs: " + d;
  return {differing.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--configs" && i + 1 < argc)
      g_config_dir = argv[++i];
    else
      selected.insert(std::stoi(arg));
  }

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"overlap vs Monte Carlo", geometry_monte_carlo},
      {"overlap closed form", geometry_closed_form},
      {"symmetric KL", symmetric_kl_checks},
      {"diversity bounds", diversity_bounds},
      {"FQI algorithmic decay", fqi_decay},
      {"FQI sample scaling", fqi_sample_scaling},
      {"sharing bias", sharing_bias},
      {"planted credit weights", planted_weights},
      {"credit-assignment trend", credit_trend},
      {"parameter-sharing trend", sharing_trend},
      {"communication trend", comm_trend},
      {"diagnosis fidelity", diagnosis_fidelity},
      {"determinism", determinism},
  };

  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("criterion %2d %s  %s: %s\n", id, o.pass ? "PASS" : "FAIL", criteria[k].first,
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
