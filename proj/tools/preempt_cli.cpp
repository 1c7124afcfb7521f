// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: run one scenario, sweep an axis, or check a config.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "preempt/config.hpp"
#include "preempt/simulation.hpp"
#include "preempt/sweep.hpp"

namespace {

constexpr int kConfigExit = 2;

preempt::ScenarioConfig load_with_overrides(const std::string& path, const std::vector<std::string>& sets) {
  preempt::ScenarioConfig cfg = path.empty() ? preempt::ScenarioConfig{} : preempt::load_config(path);
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw preempt::ConfigError("--set expects key=value, got '" + kv + "'");
    preempt::set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

void write_rows(std::ostream& out, const preempt::RunResult& r) {
  out << "slot,user,nmse_db,los_predicted,los_true,rbs,mcs,bits,violation\n";
  for (const auto& row : r.rows) {
    out << row.slot << ',' << row.user_id << ','
        << (row.nmse_db ? preempt::format_number(*row.nmse_db) : std::string("nan")) << ',' << row.los_predicted
        << ',' << row.los_true << ',' << row.rbs << ',' << row.mcs << ',' << preempt::format_number(row.bits) << ','
        << row.violation << '\n';
  }
}

std::vector<std::pair<std::string, std::string>> parse_combos(const std::vector<std::string>& items) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& item : items) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw preempt::ConfigError("combo must be policy:predictor, got '" + item + "'");
    out.emplace_back(item.substr(0, colon), item.substr(colon + 1));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Preemptive vision-aided scheduling simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;

  auto* run = app.add_subcommand("run", "Run one scenario");
  std::optional<std::uint64_t> seed;
  std::string policy;
  std::string predictor;
  std::string events_path;
  std::string rows_path;
  run->add_option("--config", config_path, "INI config file");
  run->add_option("--seed", seed, "Master seed");
  run->add_option("--policy", policy, "preemptive | pf_reactive | round_robin | max_snr");
  run->add_option("--predictor", predictor, "oracle | kalman | linear | external | last_value | zero");
  run->add_option("--set", sets, "Override a key, as section.key=value");
  run->add_option("--events", events_path, "JSON-lines event log");
  run->add_option("--rows", rows_path, "Per-slot per-user CSV");

  auto* sweep = app.add_subcommand("sweep", "Sweep one axis and emit CSV");
  std::string axis;
  std::vector<double> values;
  int reps = 1;
  int jobs = 1;
  std::string out_dir = ".";
  std::vector<std::string> combos;
  sweep->add_option("--config", config_path, "INI config file");
  sweep->add_option("--axis", axis, "ser_max | num_users | velocity | obstacle_density")->required();
  sweep->add_option("--values", values, "Comma-separated axis values")->required()->delimiter(',');
  sweep->add_option("--reps", reps, "Repetitions per value");
  sweep->add_option("--out", out_dir, "Output directory");
  sweep->add_option("--combos", combos, "policy:predictor pairs")->delimiter(',');
  sweep->add_option("--jobs", jobs, "Worker threads");
  sweep->add_option("--set", sets, "Override a key, as section.key=value");

  auto* check = app.add_subcommand("validate", "Validate a config and print its canonical form");
  check->add_option("--config", config_path, "INI config file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*check) {
      const auto cfg = preempt::load_config(config_path);
      std::cout << preempt::serialize_config(cfg);
      return 0;
    }

    auto cfg = load_with_overrides(config_path, sets);

    if (*run) {
      if (seed) cfg.seed = *seed;
      if (!policy.empty()) cfg.policy = policy;
      if (!predictor.empty()) cfg.predictor = predictor;
      preempt::validate(cfg);

      std::ofstream events;
      preempt::RunHooks hooks;
      if (!events_path.empty()) {
        events.open(events_path);
        if (!events) throw std::runtime_error("cannot write " + events_path);
        hooks.on_event = [&](const nlohmann::json& j) { events << j.dump() << '\n'; };
      }
      const auto result = preempt::run_scenario(cfg, hooks);
      if (!rows_path.empty()) {
        std::ofstream rows(rows_path);
        if (!rows) throw std::runtime_error("cannot write " + rows_path);
        write_rows(rows, result);
      }
      const nlohmann::json summary = {{"policy", result.policy},
                                      {"predictor", result.predictor},
                                      {"seed", result.seed},
                                      {"R_total", result.total_bits},
                                      {"mean_NMSE_dB", preempt::format_number(result.mean_nmse_db)},
                                      {"blockage_accuracy", preempt::format_number(result.blockage_accuracy)},
                                      {"violation_count", result.violation_count}};
      std::cout << summary.dump() << '\n';
      return 0;
    }

    preempt::validate(cfg);
    preempt::SweepSpec spec;
    spec.axis = axis;
    spec.values = values;
    spec.repetitions = reps;
    spec.jobs = jobs;
    spec.combos = parse_combos(combos);
    const auto rows = preempt::sweep_and_emit(cfg, spec, out_dir);
    int failed = 0;
    for (const auto& r : rows) failed += !r.error.empty();
    std::cout << "wrote " << rows.size() << " rows (" << failed << " failed) to " << out_dir << '\n';
    return 0;
  } catch (const preempt::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
