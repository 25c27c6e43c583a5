#pragma once

// Threshold guideline mapping a task's role-diversity measurement to
// strategy recommendations, and an empirical strategy comparison to check
// those recommendations against.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rolediv/learner.hpp"
#include "rolediv/measurement.hpp"

namespace rolediv::diagnosis {

using metrics::TaskMeasurement;

enum class ActionMetric { semantic, real };

struct GuidelineThresholds {
  std::string family = "smac";
  ActionMetric action_metric = ActionMetric::semantic;
  double action_shared_max = 3.2;
  double action_noshared_min = 5.0;
  double comm_overlap_min = 0.30;
  double contribution_learnable_max = 0.50;
  std::string provenance = "shipped defaults (family smac)";

  void validate() const;  // throws bad-thresholds

  // Presets: "smac" (semantic action scale), "mpe" (real action scale, all
  // actions are moves) and "desk" (the bundled desk scenarios).
  static GuidelineThresholds for_family(std::string_view family);  // throws bad-thresholds
};

enum class SharingRec { shared, partly_shared, no_shared };
enum class CommRec { on, off };
enum class CreditRec { learnable_mixer, fixed_sum_or_independent };

std::string_view to_string(SharingRec r);
std::string_view to_string(CommRec r);
std::string_view to_string(CreditRec r);

struct Evidence {
  std::string axis;    // sharing | communication | credit
  std::string metric;  // measurement field compared
  double value = 0;
  double threshold = 0;                  // the threshold that decided the outcome
  std::optional<double> other_threshold;  // second bound of the partly-shared band
  std::string relation;  // "<", ">", ">=", "<=", "within"
  std::string rule;
};

struct DiagnosisReport {
  SharingRec sharing = SharingRec::shared;
  CommRec communication = CommRec::off;
  CreditRec credit = CreditRec::learnable_mixer;
  std::vector<Evidence> evidence;  // one per axis, in axis order
  std::string threshold_provenance;
  std::string measurement_provenance;
};

// Pure and total on valid measurements; throws bad-measurement otherwise.
DiagnosisReport recommend(const TaskMeasurement& m, const GuidelineThresholds& t);

std::string render_text(const DiagnosisReport& report);
std::string render_json(const DiagnosisReport& report, const std::string& config_hash);

// ------------------------------------------------------------- comparison

struct StrategyCell {
  learner::SharingMode sharing = learner::SharingMode::shared;
  bool communication = false;
  learner::CreditKind credit = learner::CreditKind::vdn_sum;

  std::string label() const;  // e.g. "shared/comm_off/vdn_sum"
};

struct CellResult {
  StrategyCell cell;
  double mean_final_return = 0;
  double sd_final_return = 0;
  double mean_steps_to_threshold = 0;  // unreached runs count as total_steps
  int reached = 0;                     // runs that reached the target
  int runs = 0;
  int rank = 0;  // 1 = best
  std::vector<double> final_returns;  // per seed, in seed order
};

struct CompareTable {
  std::vector<CellResult> rows;  // ranked
  std::optional<int> recommended_row;
  std::optional<bool> recommended_within_one_sd;
};

// First evaluation step whose return reaches `target`.
std::optional<int> steps_to_threshold(const std::vector<learner::CurvePoint>& curve, double target);

bool matches(const StrategyCell& cell, const DiagnosisReport& report);

// Trains every cell for every seed. Cells are ranked by mean final return,
// then by mean steps to threshold, then by grid order.
CompareTable compare_strategies(const learner::EnvFactory& factory,
                                const learner::TrainingConfig& base,
                                const std::vector<StrategyCell>& grid,
                                const std::vector<std::uint64_t>& seeds, double target_return,
                                double weight_lr, int jobs,
                                const std::optional<DiagnosisReport>& recommendation = {});

std::string compare_csv(const CompareTable& table, const std::string& config_hash);

}  // namespace rolediv::diagnosis
