// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "preempt/config.hpp"
#include "preempt/endpoint.hpp"
#include "preempt/scheduler.hpp"

namespace preempt {

/// One user in one scheduled slot.
struct SlotUserRow {
  int slot = 0;
  int user_id = 0;
  std::optional<double> nmse_db;  // prediction vs truth; absent before the window fills
  int los_predicted = -1;         // -1 when no blockage prediction was made
  int los_true = 0;
  int rbs = 0;
  int mcs = -1;
  double bits = 0.0;
  int violation = 0;
};

struct RunResult {
  std::string policy;
  std::string predictor;
  std::uint64_t seed = 0;
  std::vector<SlotUserRow> rows;
  double total_bits = 0.0;
  double blockage_accuracy = 0.0;  // NaN when no blockage prediction was made
  double mean_nmse_db = 0.0;       // NaN when undefined, -inf when every prediction is exact
  int violation_count = 0;
  int decisions = 0;
};

/// Aggregates recomputed from rows alone.
void summarize(RunResult& result);

struct RunHooks {
  /// Every decision with the slot it is for, the scheduler inputs it was
  /// made from, and its outcome on the true channels.
  std::function<void(int slot, std::span<const SchedulerUser>, const ScheduleDecision&, const ThroughputReport&)>
      on_decision;
  /// JSON-lines event sink.
  std::function<void(const nlohmann::json&)> on_event;
  /// Overrides the endpoint built from the config's URL.
  PredictionEndpoint* endpoint = nullptr;
};

/// The full per-slot pipeline for one seeded scenario.
RunResult run_scenario(const ScenarioConfig& config, const RunHooks& hooks = {});

nlohmann::json scene_snapshot(const SceneState& scene);

}  // namespace preempt
