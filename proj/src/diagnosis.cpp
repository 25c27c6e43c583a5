#include "rolediv/diagnosis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "rolediv/error.hpp"
#include "rolediv/parallel.hpp"

namespace rolediv::diagnosis {

void GuidelineThresholds::validate() const {
  auto finite = [](double x) { return std::isfinite(x); };
  if (!finite(action_shared_max) || !finite(action_noshared_min) || !finite(comm_overlap_min) ||
      !finite(contribution_learnable_max))
    throw Error("bad-thresholds", "thresholds must be finite numbers");
  if (action_shared_max > action_noshared_min)
    throw Error("bad-thresholds", "action_shared_max exceeds action_noshared_min");
  if (action_shared_max < 0) throw Error("bad-thresholds", "action thresholds must be non-negative");
  if (comm_overlap_min < 0 || comm_overlap_min > 1)
    throw Error("bad-thresholds", "comm_overlap_min must lie in [0, 1]");
  if (contribution_learnable_max < 0 || contribution_learnable_max > 1)
    throw Error("bad-thresholds", "contribution_learnable_max must lie in [0, 1]");
}

GuidelineThresholds GuidelineThresholds::for_family(std::string_view family) {
  GuidelineThresholds t;
  if (family == "smac") return t;
  if (family == "mpe") {
    t.family = "mpe";
    t.action_metric = ActionMetric::real;
    t.action_shared_max = 15.0;
    t.action_noshared_min = 19.0;
    t.provenance = "shipped defaults (family mpe)";
    return t;
  }
  if (family == "desk") {
    t.family = "desk";
    t.action_metric = ActionMetric::semantic;
    t.action_shared_max = 0.5;
    t.action_noshared_min = 2.0;
    t.provenance = "shipped defaults (family desk)";
    return t;
  }
  throw Error("bad-thresholds", "unknown threshold family '" + std::string(family) + "'");
}

std::string_view to_string(SharingRec r) {
  switch (r) {
    case SharingRec::shared: return "shared";
    case SharingRec::partly_shared: return "partly_shared";
    case SharingRec::no_shared: return "no_shared";
  }
  return "unknown";
}

std::string_view to_string(CommRec r) { return r == CommRec::on ? "on" : "off"; }

std::string_view to_string(CreditRec r) {
  return r == CreditRec::learnable_mixer ? "learnable_mixer" : "fixed_sum_or_independent";
}

DiagnosisReport recommend(const TaskMeasurement& m, const GuidelineThresholds& t) {
  m.validate();
  t.validate();
  DiagnosisReport r;
  r.threshold_provenance = t.provenance;
  r.measurement_provenance = m.provenance;

  const bool semantic = t.action_metric == ActionMetric::semantic;
  const double action = semantic ? m.action_semantic : m.action_real;
  Evidence sharing{"sharing", semantic ? "action_semantic" : "action_real", action, 0, {}, "", ""};
  if (action < t.action_shared_max) {
    r.sharing = SharingRec::shared;
    sharing.threshold = t.action_shared_max;
    sharing.relation = "<";
    sharing.rule = "low action-based diversity: agents behave alike, pool their experience";
  } else if (action > t.action_noshared_min) {
    r.sharing = SharingRec::no_shared;
    sharing.threshold = t.action_noshared_min;
    sharing.relation = ">";
    sharing.rule = "high action-based diversity: keep separate parameters per agent";
  } else {
    r.sharing = SharingRec::partly_shared;
    sharing.threshold = t.action_shared_max;
    sharing.other_threshold = t.action_noshared_min;
    sharing.relation = "within";
    sharing.rule = "intermediate action-based diversity: share within unit types only";
  }
  r.evidence.push_back(sharing);

  Evidence comm{"communication", "trajectory_overlap", m.trajectory_overlap, t.comm_overlap_min,
                {}, "", ""};
  if (m.trajectory_overlap >= t.comm_overlap_min) {
    r.communication = CommRec::on;
    comm.relation = ">=";
    comm.rule = "observations overlap enough for teammates' messages to be relevant";
  } else {
    r.communication = CommRec::off;
    comm.relation = "<";
    comm.rule = "low observation overlap (high trajectory diversity): messages add noise";
  }
  r.evidence.push_back(comm);

  Evidence credit{"credit", "contribution", m.contribution, t.contribution_learnable_max, {}, "",
                  ""};
  if (m.contribution > t.contribution_learnable_max) {
    r.credit = CreditRec::fixed_sum_or_independent;
    credit.relation = ">";
    credit.rule = "high contribution diversity: a learned mixer over-weights a few agents";
  } else {
    r.credit = CreditRec::learnable_mixer;
    credit.relation = "<=";
    credit.rule = "low contribution diversity: a learned monotonic mixer is safe";
  }
  r.evidence.push_back(credit);
  return r;
}

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

std::string render_text(const DiagnosisReport& report) {
  std::ostringstream out;
  out << "sharing:       " << to_string(report.sharing) << "\n";
  out << "communication: " << to_string(report.communication) << "\n";
  out << "credit:        " << to_string(report.credit) << "\n\n";
  out << "evidence:\n";
  for (const auto& e : report.evidence) {
    out << "  " << e.axis << ": " << e.metric << " = " << num(e.value) << " ";
    if (e.other_threshold)
      out << "within [" << num(e.threshold) << ", " << num(*e.other_threshold) << "]";
    else
      out << e.relation << " " << num(e.threshold);
    out << " (" << e.rule << ")\n";
  }
  out << "\nthresholds: " << report.threshold_provenance << "\n";
  out << "measurement: " << report.measurement_provenance << "\n";
  return out.str();
}

std::string render_json(const DiagnosisReport& report, const std::string& config_hash) {
  nlohmann::ordered_json j;
  j["config_hash"] = config_hash;
  j["sharing"] = std::string(to_string(report.sharing));
  j["communication"] = std::string(to_string(report.communication));
  j["credit"] = std::string(to_string(report.credit));
  auto ev = nlohmann::ordered_json::array();
  for (const auto& e : report.evidence) {
    nlohmann::ordered_json x;
    x["axis"] = e.axis;
    x["metric"] = e.metric;
    x["value"] = e.value;
    x["threshold"] = e.threshold;
    if (e.other_threshold) x["other_threshold"] = *e.other_threshold;
    x["relation"] = e.relation;
    x["rule"] = e.rule;
    ev.push_back(std::move(x));
  }
  j["evidence"] = std::move(ev);
  j["threshold_provenance"] = report.threshold_provenance;
  j["measurement_provenance"] = report.measurement_provenance;
  return j.dump(2) + "\n";
}

// ------------------------------------------------------------- comparison

std::string StrategyCell::label() const {
  return std::string(learner::to_string(sharing)) + (communication ? "/comm_on/" : "/comm_off/") +
         std::string(learner::to_string(credit));
}

std::optional<int> steps_to_threshold(const std::vector<learner::CurvePoint>& curve,
                                      double target) {
  for (const auto& p : curve)
    if (p.eval_return >= target) return p.step;
  return std::nullopt;
}

bool matches(const StrategyCell& cell, const DiagnosisReport& report) {
  using learner::CreditKind;
  using learner::SharingMode;
  const bool sharing_ok =
      (report.sharing == SharingRec::shared && cell.sharing == SharingMode::shared) ||
      (report.sharing == SharingRec::partly_shared && cell.sharing == SharingMode::partly_shared) ||
      (report.sharing == SharingRec::no_shared && cell.sharing == SharingMode::no_shared);
  const bool comm_ok = cell.communication == (report.communication == CommRec::on);
  const bool credit_ok = report.credit == CreditRec::learnable_mixer
                             ? cell.credit == CreditKind::learnable_weights
                             : cell.credit != CreditKind::learnable_weights;
  return sharing_ok && comm_ok && credit_ok;
}

CompareTable compare_strategies(const learner::EnvFactory& factory,
                                const learner::TrainingConfig& base,
                                const std::vector<StrategyCell>& grid,
                                const std::vector<std::uint64_t>& seeds, double target_return,
                                double weight_lr, int jobs,
                                const std::optional<DiagnosisReport>& recommendation) {
  if (grid.empty()) throw Error("bad-config", "compare grid is empty");
  if (seeds.empty()) throw Error("bad-config", "compare needs at least one seed");
  const int n_seeds = static_cast<int>(seeds.size());
  const int tasks = static_cast<int>(grid.size()) * n_seeds;

  struct RunSummary {
    double final_return;
    std::optional<int> steps;
  };
  const auto runs = parallel_map(tasks, jobs, [&](int k) {
    const auto& cell = grid[k / n_seeds];
    learner::TrainingConfig cfg = base;
    cfg.seed = seeds[k % n_seeds];
    cfg.log_episodes = 0;
    learner::CreditAssignment credit;
    credit.kind = cell.credit;
    credit.weight_lr = weight_lr;
    const auto run = learner::train(factory, cfg, cell.sharing, credit, {cell.communication});
    return RunSummary{run.final_return(), steps_to_threshold(run.curve, target_return)};
  });

  CompareTable table;
  for (std::size_t c = 0; c < grid.size(); ++c) {
    CellResult r;
    r.cell = grid[c];
    r.runs = n_seeds;
    double steps_total = 0;
    for (int s = 0; s < n_seeds; ++s) {
      const auto& run = runs[c * n_seeds + s];
      r.final_returns.push_back(run.final_return);
      if (run.steps) ++r.reached;
      steps_total += run.steps.value_or(base.total_steps);
    }
    const double mean = std::accumulate(r.final_returns.begin(), r.final_returns.end(), 0.0) /
                        n_seeds;
    double ss = 0;
    for (double v : r.final_returns) ss += (v - mean) * (v - mean);
    r.mean_final_return = mean;
    r.sd_final_return = n_seeds > 1 ? std::sqrt(ss / (n_seeds - 1)) : 0.0;
    r.mean_steps_to_threshold = steps_total / n_seeds;
    table.rows.push_back(std::move(r));
  }
  std::stable_sort(table.rows.begin(), table.rows.end(), [](const auto& a, const auto& b) {
    if (a.mean_final_return != b.mean_final_return) return a.mean_final_return > b.mean_final_return;
    return a.mean_steps_to_threshold < b.mean_steps_to_threshold;
  });
  for (std::size_t i = 0; i < table.rows.size(); ++i) table.rows[i].rank = static_cast<int>(i) + 1;

  if (recommendation) {
    for (std::size_t i = 0; i < table.rows.size(); ++i)
      if (matches(table.rows[i].cell, *recommendation)) {
        table.recommended_row = static_cast<int>(i);
        const auto& best = table.rows.front();
        table.recommended_within_one_sd =
            best.mean_final_return - table.rows[i].mean_final_return <= best.sd_final_return;
        break;
      }
  }
  return table;
}

std::string compare_csv(const CompareTable& table, const std::string& config_hash) {
  std::ostringstream out;
  out << "# config_hash=" << config_hash << "\n";
  if (table.recommended_row) {
    out << "# recommended=" << table.rows[*table.recommended_row].cell.label()
        << " within_one_sd_of_best=" << (*table.recommended_within_one_sd ? "true" : "false")
        << "\n";
  } else {
    out << "# recommended=none\n";
  }
  out << "rank,sharing,communication,credit,mean_final_return,sd_final_return,"
         "mean_steps_to_threshold,reached,runs,recommended\n";
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& r = table.rows[i];
    out << r.rank << ',' << learner::to_string(r.cell.sharing) << ','
        << (r.cell.communication ? "on" : "off") << ',' << learner::to_string(r.cell.credit) << ','
        << num(r.mean_final_return) << ',' << num(r.sd_final_return) << ','
        << num(r.mean_steps_to_threshold) << ',' << r.reached << ',' << r.runs << ','
        << (table.recommended_row && *table.recommended_row == static_cast<int>(i) ? 1 : 0)
        << '\n';
  }
  return out.str();
}

}  // namespace rolediv::diagnosis
