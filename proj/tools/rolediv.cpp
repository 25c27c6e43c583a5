// Command-line front end: measure | train | diagnose | compare | theory.

#include <iostream>
#include <utility>

#include <CLI11.hpp>

#include "rolediv/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Role-diversity measurement, diagnosis and strategy comparison for cooperative MARL"};
  app.require_subcommand(1);

  rolediv::commands::Invocation inv;
  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config", inv.config_path, "run configuration (JSON)");
    if (needs_config) opt->required();
    sub->add_option("--out", inv.out_dir, "output directory (default: config output_dir)");
    sub->add_option("--jobs", inv.jobs, "worker threads")->check(CLI::PositiveNumber);
  };

  const std::pair<const char*, const char*> runs[] = {
      {"measure", "train the baseline and measure the task's role diversity"},
      {"train", "train the configured strategy for every seed"},
      {"compare", "rank a grid of sharing x communication x credit strategies"},
      {"theory", "sweep fitted Q-iteration and measure the error decomposition"},
  };
  for (const auto& [name, help] : runs) {
    auto* sub = app.add_subcommand(name, help);
    add_common(sub, true);
    sub->add_option("--seeds", inv.seeds, "seed list override, e.g. 1-8 or 0,3,7");
  }
  auto* diag = app.add_subcommand("diagnose", "map a measurement to strategy recommendations");
  add_common(diag, false);
  diag->add_option("--measurement", inv.measurement_path, "measurement.json from measure")
      ->required();
  diag->add_option("--thresholds", inv.thresholds_path, "threshold file (default: shipped)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : rolediv::commands::kExitConfig;
  }
  inv.subcommand = app.get_subcommands().front()->get_name();
  return rolediv::commands::run(inv, std::cout, std::cerr);
}
