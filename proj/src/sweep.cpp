// SPDX-License-Identifier: Apache-2.0

#include "preempt/sweep.hpp"

#include <array>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <thread>
#include <tuple>

#include "preempt/rng.hpp"
#include "preempt/simulation.hpp"

namespace preempt {

void apply_axis(ScenarioConfig& config, const std::string& axis, double value) {
  if (axis == "ser_max") {
    config.ser_max = value;
  } else if (axis == "num_users" || axis == "K") {
    if (value != std::floor(value)) throw ConfigError("num_users sweep values must be integers");
    config.num_users = static_cast<int>(value);
  } else if (axis == "velocity") {
    config.max_speed_kmh = value;
  } else if (axis == "obstacle_density") {
    config.obstacle_density = value;
  } else {
    throw ConfigError("unknown sweep axis: " + axis);
  }
}

std::uint64_t repetition_seed(std::uint64_t base, int repetition) {
  return derive_seed(base, 0x5eedULL, static_cast<std::uint64_t>(repetition));
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::vector<SweepRow> run_sweep(const ScenarioConfig& base, const SweepSpec& spec) {
  if (spec.values.empty()) throw ConfigError("sweep needs at least one value");
  if (spec.repetitions < 1) throw ConfigError("sweep needs at least one repetition");
  auto combos = spec.combos;
  if (combos.empty()) combos.emplace_back(base.policy, base.predictor);

  const std::size_t per_value = static_cast<std::size_t>(spec.repetitions) * combos.size();
  std::vector<SweepRow> rows(spec.values.size() * per_value);
  auto run_one = [&](std::size_t i) {
    const std::size_t v = i / per_value;
    const int rep = static_cast<int>((i % per_value) / combos.size());
    const auto& [policy, predictor] = combos[i % combos.size()];
    SweepRow& row = rows[i];
    row.axis_value = spec.values[v];
    row.policy = policy;
    row.predictor = predictor;
    row.seed = repetition_seed(base.seed, rep);
    try {
      ScenarioConfig cfg = base;
      apply_axis(cfg, spec.axis, spec.values[v]);
      cfg.policy = policy;
      cfg.predictor = predictor;
      cfg.seed = row.seed;
      const RunResult r = run_scenario(cfg);
      row.total_bits = r.total_bits;
      row.mean_nmse_db = r.mean_nmse_db;
      row.blockage_accuracy = r.blockage_accuracy;
      row.violation_count = r.violation_count;
    } catch (const std::exception& e) {
      const double nan = std::nan("");
      row.total_bits = row.mean_nmse_db = row.blockage_accuracy = nan;
      row.violation_count = 0;
      row.error = e.what();
    }
  };

  const int jobs = std::max(1, spec.jobs);
  if (jobs == 1) {
    for (std::size_t i = 0; i < rows.size(); ++i) run_one(i);
    return rows;
  }
  std::atomic<std::size_t> cursor{0};
  std::vector<std::thread> workers;
  for (int j = 0; j < jobs; ++j) {
    workers.emplace_back([&] {
      for (std::size_t i = cursor++; i < rows.size(); i = cursor++) run_one(i);
    });
  }
  for (auto& w : workers) w.join();
  return rows;
}

namespace {

struct Moments {
  int n = 0;
  double sum = 0.0;
  std::vector<double> xs;
  void add(double x) {
    if (std::isnan(x)) return;
    ++n;
    sum += x;
    xs.push_back(x);
  }
  double mean() const { return n > 0 ? sum / n : std::nan(""); }
  double stddev() const {
    if (n == 0) return std::nan("");
    if (n == 1) return 0.0;
    const double m = mean();
    if (!std::isfinite(m)) return std::nan("");
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return std::sqrt(ss / (n - 1));
  }
};

}  // namespace

std::vector<AggregateRow> aggregate(const std::vector<SweepRow>& rows) {
  using Key = std::tuple<std::size_t, std::string, std::string>;
  std::vector<double> order_of_values;
  std::map<Key, std::array<Moments, 4>> cells;
  std::map<Key, int> runs;
  for (const auto& r : rows) {
    std::size_t vi = 0;
    while (vi < order_of_values.size() && order_of_values[vi] != r.axis_value) ++vi;
    if (vi == order_of_values.size()) order_of_values.push_back(r.axis_value);
    const Key key{vi, r.policy, r.predictor};
    auto& m = cells[key];
    if (!r.error.empty()) continue;
    ++runs[key];
    m[0].add(r.total_bits);
    m[1].add(r.mean_nmse_db);
    m[2].add(r.blockage_accuracy);
    m[3].add(r.violation_count);
  }
  std::vector<AggregateRow> out;
  for (const auto& [key, m] : cells) {
    AggregateRow a;
    a.axis_value = order_of_values[std::get<0>(key)];
    a.policy = std::get<1>(key);
    a.predictor = std::get<2>(key);
    a.runs = runs[key];
    a.total_bits_mean = m[0].mean();
    a.total_bits_std = m[0].stddev();
    a.mean_nmse_db_mean = m[1].mean();
    a.mean_nmse_db_std = m[1].stddev();
    a.blockage_accuracy_mean = m[2].mean();
    a.blockage_accuracy_std = m[2].stddev();
    a.violation_count_mean = m[3].mean();
    a.violation_count_std = m[3].stddev();
    out.push_back(a);
  }
  return out;
}

void write_rows_csv(std::ostream& out, const std::string& axis, const std::vector<SweepRow>& rows) {
  out << axis << ",policy,predictor,seed,R_total,mean_NMSE_dB,blockage_accuracy,violation_count,error\n";
  for (const auto& r : rows) {
    out << format_number(r.axis_value) << ',' << r.policy << ',' << r.predictor << ',' << r.seed << ','
        << format_number(r.total_bits) << ',' << format_number(r.mean_nmse_db) << ','
        << format_number(r.blockage_accuracy) << ',' << r.violation_count << ',';
    for (char c : r.error) out << (c == ',' || c == '\n' ? ';' : c);
    out << '\n';
  }
}

void write_aggregate_csv(std::ostream& out, const std::string& axis, const std::vector<AggregateRow>& rows) {
  out << axis
      << ",policy,predictor,runs,R_total_mean,R_total_std,mean_NMSE_dB_mean,mean_NMSE_dB_std,"
         "blockage_accuracy_mean,blockage_accuracy_std,violation_count_mean,violation_count_std\n";
  for (const auto& a : rows) {
    out << format_number(a.axis_value) << ',' << a.policy << ',' << a.predictor << ',' << a.runs << ','
        << format_number(a.total_bits_mean) << ',' << format_number(a.total_bits_std) << ','
        << format_number(a.mean_nmse_db_mean) << ',' << format_number(a.mean_nmse_db_std) << ','
        << format_number(a.blockage_accuracy_mean) << ',' << format_number(a.blockage_accuracy_std) << ','
        << format_number(a.violation_count_mean) << ',' << format_number(a.violation_count_std) << '\n';
  }
}

std::vector<SweepRow> sweep_and_emit(const ScenarioConfig& base, const SweepSpec& spec,
                                     const std::filesystem::path& dir) {
  const auto rows = run_sweep(base, spec);
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / (spec.axis + ".csv"));
    if (!out) throw std::runtime_error("cannot write " + (dir / (spec.axis + ".csv")).string());
    write_rows_csv(out, spec.axis, rows);
  }
  std::ofstream out(dir / (spec.axis + "_aggregate.csv"));
  if (!out) throw std::runtime_error("cannot write aggregate CSV in " + dir.string());
  write_aggregate_csv(out, spec.axis, aggregate(rows));
  return rows;
}

}  // namespace preempt
