#include "rolediv/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "rolediv/error.hpp"
#include "rolediv/fqi.hpp"
#include "rolediv/learner.hpp"
#include "rolediv/parallel.hpp"

namespace rolediv::commands {

namespace fs = std::filesystem;

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string read_file(const std::string& path, const std::string& code) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(code, path + ": cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

learner::CreditAssignment credit_of(const config::RunConfig& cfg, learner::CreditKind kind) {
  learner::CreditAssignment c;
  c.kind = kind;
  c.weight_lr = cfg.strategy.weight_lr;
  return c;
}

std::vector<learner::TrainingRun> train_seeds(const config::RunConfig& cfg, int jobs,
                                              learner::SharingMode sharing,
                                              learner::CreditKind credit, bool comm) {
  const auto factory = cfg.factory();
  return parallel_map(static_cast<int>(cfg.seeds.size()), jobs, [&](int k) {
    auto tc = cfg.training;
    tc.seed = cfg.seeds[k];
    return learner::train(factory, tc, sharing, credit_of(cfg, credit), {comm});
  });
}

std::string timeseries_csv(const std::vector<EpisodeLog>& logs, metrics::MetricKind kind,
                           const metrics::MeasurementOptions& options,
                           const std::string& config_hash) {
  std::ostringstream out;
  out << "# config_hash=" << config_hash << "\n";
  out << "seed,episode,tick,value\n";
  for (const auto& log : logs) {
    const auto series = metrics::diversity_timeseries(log, kind, options.series);
    for (const auto& p : series.values)
      out << log.header.seed << ',' << log.header.episode << ',' << p.tick << ',' << num(p.value)
          << '\n';
  }
  return out.str();
}

Files measurement_files(const Baseline& b, const config::RunConfig& cfg) {
  using metrics::MetricKind;
  Files files;
  files.emplace_back("measurement.json", measurement_json(b.measurement, cfg.hash));
  files.emplace_back("logs.jsonl", to_jsonl(b.logs));
  for (auto kind : {MetricKind::action_real, MetricKind::action_semantic,
                    MetricKind::trajectory_overlap, MetricKind::contribution})
    files.emplace_back("timeseries_" + std::string(metrics::to_string(kind)) + ".csv",
                       timeseries_csv(b.logs, kind, cfg.metrics, cfg.hash));
  return files;
}

}  // namespace

Baseline measure_baseline(const config::RunConfig& cfg, int jobs) {
  if (cfg.training.log_episodes < 1)
    throw Error("bad-config", "training.log_episodes: measuring needs at least one logged episode");
  const auto runs = train_seeds(cfg, jobs, learner::SharingMode::no_shared,
                                learner::CreditKind::vdn_sum, false);
  Baseline b;
  for (const auto& run : runs)
    for (const auto& log : run.logs) b.logs.push_back(log);
  b.measurement = metrics::task_measurement(b.logs, cfg.metrics);
  b.measurement.provenance = "baseline vdn_sum/no_shared/comm_off; " + b.measurement.provenance;
  return b;
}

std::string measurement_json(const metrics::TaskMeasurement& m, const std::string& config_hash) {
  nlohmann::ordered_json j;
  j["config_hash"] = config_hash;
  j["action_semantic"] = m.action_semantic;
  j["action_real"] = m.action_real;
  j["trajectory_overlap"] = m.trajectory_overlap;
  j["contribution"] = m.contribution;
  j["provenance"] = m.provenance;
  return j.dump(2) + "\n";
}

Files measure(const config::RunConfig& cfg, int jobs) {
  return measurement_files(measure_baseline(cfg, jobs), cfg);
}

Files train(const config::RunConfig& cfg, int jobs) {
  const auto runs = train_seeds(cfg, jobs, cfg.strategy.sharing, cfg.strategy.credit,
                                cfg.strategy.communication);
  std::ostringstream curve, final_table;
  curve << "# config_hash=" << cfg.hash << "\n" << "step,seed,eval_return\n";
  final_table << "# config_hash=" << cfg.hash << "\n"
              << "seed,final_return,q_entries,credit_weights\n";
  std::vector<EpisodeLog> logs;
  for (std::size_t k = 0; k < runs.size(); ++k) {
    const auto& run = runs[k];
    for (const auto& p : run.curve)
      curve << p.step << ',' << cfg.seeds[k] << ',' << num(p.eval_return) << '\n';
    final_table << cfg.seeds[k] << ',' << num(run.final_return()) << ',' << run.q->size() << ',';
    for (Eigen::Index i = 0; i < run.weights.size(); ++i)
      final_table << (i ? ";" : "") << num(run.weights[i]);
    final_table << '\n';
    logs.insert(logs.end(), run.logs.begin(), run.logs.end());
  }
  return {{"curve.csv", curve.str()}, {"final.csv", final_table.str()},
          {"logs.jsonl", to_jsonl(logs)}};
}

Files compare(const config::RunConfig& cfg, int jobs) {
  if (!cfg.compare) throw Error("bad-config", "compare: block required for this subcommand");
  Files files;
  std::optional<diagnosis::DiagnosisReport> report;
  if (cfg.compare->recommend) {
    const auto baseline = measure_baseline(cfg, jobs);
    report = diagnosis::recommend(baseline.measurement, cfg.thresholds);
    files.emplace_back("measurement.json", measurement_json(baseline.measurement, cfg.hash));
    files.emplace_back("diagnosis.json", diagnosis::render_json(*report, cfg.hash));
    files.emplace_back("diagnosis.txt",
                       "config_hash: " + cfg.hash + "\n" + diagnosis::render_text(*report));
  }
  const auto table = diagnosis::compare_strategies(
      cfg.factory(), cfg.training, cfg.compare->grid, cfg.seeds, cfg.compare->target_return,
      cfg.strategy.weight_lr, jobs, report);
  files.emplace(files.begin(), "compare.csv", diagnosis::compare_csv(table, cfg.hash));
  return files;
}

Files theory(const config::RunConfig& cfg, int jobs) {
  if (!cfg.theory) throw Error("bad-config", "theory: block required for this subcommand");
  const auto rows = fqi::sweep(*cfg.theory, jobs);
  return {{"theory.csv", fqi::sweep_csv(rows, cfg.hash)}};
}

Files diagnose(const std::string& measurement_text,
               const std::optional<std::string>& thresholds_text,
               const std::optional<diagnosis::GuidelineThresholds>& config_thresholds) {
  const auto m = config::parse_measurement(measurement_text);
  diagnosis::GuidelineThresholds t = config_thresholds.value_or(diagnosis::GuidelineThresholds{});
  if (thresholds_text) {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(*thresholds_text);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error("bad-thresholds", e.what());
    }
    try {
      t = config::parse_thresholds(doc, "");
    } catch (const Error& e) {
      throw Error("bad-thresholds", e.what());
    }
  }
  const std::string hash =
      config::fnv1a_hex(measurement_text + '\0' + thresholds_text.value_or("") + '\0' + t.provenance);
  const auto report = diagnosis::recommend(m, t);
  return {{"diagnosis.json", diagnosis::render_json(report, hash)},
          {"diagnosis.txt", "config_hash: " + hash + "\n" + diagnosis::render_text(report)}};
}

void publish(const std::string& dir, const Files& files) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("io-error", dir + ": " + ec.message());
  std::vector<fs::path> temps;
  auto cleanup = [&] {
    for (const auto& p : temps) fs::remove(p, ec);
  };
  for (const auto& [name, contents] : files) {
    const fs::path tmp = fs::path(dir) / ("." + name + ".tmp");
    temps.push_back(tmp);
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << contents;
    out.close();
    if (!out) {
      cleanup();
      throw Error("io-error", tmp.string() + ": write failed");
    }
  }
  for (std::size_t k = 0; k < files.size(); ++k) {
    fs::rename(temps[k], fs::path(dir) / files[k].first, ec);
    if (ec) {
      cleanup();
      throw Error("io-error", files[k].first + ": " + ec.message());
    }
  }
}

int exit_code_for(const std::string& code) {
  static const char* config_codes[] = {"bad-config",   "bad-params",      "unknown-scenario",
                                       "bad-thresholds", "bad-measurement", "bad-grouping"};
  for (const char* c : config_codes)
    if (code == c) return kExitConfig;
  return kExitRuntime;
}

int run(const Invocation& inv, std::ostream& out, std::ostream& err) {
  try {
    Files files;
    std::string dir = inv.out_dir.value_or("out");
    if (inv.jobs < 1) throw Error("bad-config", "--jobs must be at least 1");
    if (inv.subcommand == "diagnose") {
      if (!inv.measurement_path) throw Error("bad-config", "diagnose needs --measurement");
      std::optional<diagnosis::GuidelineThresholds> from_config;
      if (inv.config_path) {
        const auto cfg = config::load_config(*inv.config_path);
        from_config = cfg.thresholds;
        if (!inv.out_dir) dir = cfg.output_dir;
      }
      const std::string m = read_file(*inv.measurement_path, "bad-measurement");
      std::optional<std::string> t;
      if (inv.thresholds_path) t = read_file(*inv.thresholds_path, "bad-thresholds");
      files = diagnose(m, t, from_config);
    } else {
      if (!inv.config_path) throw Error("bad-config", inv.subcommand + " needs --config");
      auto cfg = config::load_config(*inv.config_path);
      if (inv.seeds) config::override_seeds(cfg, config::parse_seed_list(*inv.seeds));
      if (!inv.out_dir) dir = cfg.output_dir;
      if (inv.subcommand == "measure")
        files = measure(cfg, inv.jobs);
      else if (inv.subcommand == "train")
        files = train(cfg, inv.jobs);
      else if (inv.subcommand == "compare")
        files = compare(cfg, inv.jobs);
      else if (inv.subcommand == "theory")
        files = theory(cfg, inv.jobs);
      else
        throw Error("bad-config", "unknown subcommand '" + inv.subcommand + "'");
    }
    publish(dir, files);
    for (const auto& [name, contents] : files) out << (fs::path(dir) / name).string() << "\n";
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace rolediv::commands
