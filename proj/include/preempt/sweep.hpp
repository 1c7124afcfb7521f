// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "preempt/config.hpp"

namespace preempt {

/// Axes a sweep may vary: ser_max, num_users, velocity (max speed in
/// km/h) and obstacle_density.
void apply_axis(ScenarioConfig& config, const std::string& axis, double value);

struct SweepSpec {
  std::string axis;
  std::vector<double> values;
  int repetitions = 1;
  std::vector<std::pair<std::string, std::string>> combos;  // (policy, predictor)
  int jobs = 1;
};

struct SweepRow {
  double axis_value = 0.0;
  std::string policy;
  std::string predictor;
  std::uint64_t seed = 0;
  double total_bits = 0.0;
  double mean_nmse_db = 0.0;
  double blockage_accuracy = 0.0;
  int violation_count = 0;
  std::string error;  // empty on success
};

struct AggregateRow {
  double axis_value = 0.0;
  std::string policy;
  std::string predictor;
  int runs = 0;
  double total_bits_mean = 0.0;
  double total_bits_std = 0.0;
  double mean_nmse_db_mean = 0.0;
  double mean_nmse_db_std = 0.0;
  double blockage_accuracy_mean = 0.0;
  double blockage_accuracy_std = 0.0;
  double violation_count_mean = 0.0;
  double violation_count_std = 0.0;
};

/// Seed of repetition r under a base seed.
std::uint64_t repetition_seed(std::uint64_t base, int repetition);

/// Rows ordered by (value, repetition, combo) regardless of job count.
std::vector<SweepRow> run_sweep(const ScenarioConfig& base, const SweepSpec& spec);

/// Mean and sample standard deviation per (value, policy, predictor),
/// skipping NaN entries and failed runs.
std::vector<AggregateRow> aggregate(const std::vector<SweepRow>& rows);

void write_rows_csv(std::ostream& out, const std::string& axis, const std::vector<SweepRow>& rows);
void write_aggregate_csv(std::ostream& out, const std::string& axis, const std::vector<AggregateRow>& rows);

/// Runs the sweep and writes <axis>.csv and <axis>_aggregate.csv into dir.
/// Returns the raw rows.
std::vector<SweepRow> sweep_and_emit(const ScenarioConfig& base, const SweepSpec& spec,
                                     const std::filesystem::path& dir);

/// Shortest round-trip text for a double; "nan", "inf", "-inf" otherwise.
std::string format_number(double v);

}  // namespace preempt
