// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "preempt/channel.hpp"
#include "preempt/estimation.hpp"
#include "preempt/scene.hpp"
#include "preempt/scheduler.hpp"

namespace preempt {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every knob of one scenario. Defaults reproduce the reference setup.
struct ScenarioConfig {
  // [system]
  double carrier_ghz = 28.0;
  int antennas_x = 8;
  int antennas_y = 8;
  double slot_s = 0.1;
  double bandwidth_mhz = 100.0;
  int symbols_per_rb = 14;
  int subcarriers_per_rb = 12;
  int num_rbs = 70;
  int max_group = 4;
  double tx_snr_db = 95.0;  // transmit power over noise power

  // [users]
  int num_users = 10;
  double min_height = 0.5;
  double max_height = 2.0;
  double max_speed_kmh = 25.0;
  double fixed_speed_kmh = -1.0;
  double ser_max = 0.1;
  double rate_min_bits = 1000.0;

  // [channel]
  int max_nlos_paths = 3;
  double shadow_sigma_db = 4.0;
  double nlos_keep = 0.9;
  double nlos_birth = 0.3;
  double reflection_loss_db = 10.0;
  double fading_correlation = 0.95;

  // [scene]
  double area_x = 20.0;
  double area_y = 20.0;
  double obstacle_density = 0.2;
  double bs_x = 10.0;
  double bs_y = -11.0;
  double bs_z = 3.0;
  double camera_dx = 0.0;  // camera offset from the BS
  double camera_dy = 0.0;
  double camera_dz = 0.0;
  double camera_fov_deg = 90.0;
  double camera_elevation_deg = -8.6;
  int image_width = 1920;
  int image_height = 1080;
  double miss_probability = 0.045;
  double pixel_sigma = 1.0;
  double depth_sigma = 0.0;

  // [run]
  int slots = 11;
  int window = 3;
  double lambda = 1.0;
  std::uint64_t seed = 1;
  std::string policy = "preemptive";
  std::string predictor = "kalman";
  std::string mcs_table;  // empty: built-in 256-QAM table
  std::string endpoint_url;
  int endpoint_deadline_ms = 50;
  double pf_alpha = 0.1;
  int ar_order = 2;
  double path_threshold_db = 20.0;

  bool operator==(const ScenarioConfig&) const = default;

  int n_re() const { return subcarriers_per_rb * symbols_per_rb; }
  double max_speed() const { return max_speed_kmh / 3.6; }
  ArrayGeometry array() const;
  SceneSpec scene_spec() const;
  ChannelSettings channel_settings() const;
  DetectorParams detector() const;
  SchedulerConfig scheduler() const;
};

inline const char* const kPredictorNames[] = {"oracle", "kalman", "linear", "external", "last_value", "zero"};

/// Throws ConfigError naming the offending key.
void validate(const ScenarioConfig& config);

/// INI text with [section] headers and key = value lines. Unknown
/// sections or keys are errors; missing keys keep their defaults.
ScenarioConfig parse_config(const std::string& text);
ScenarioConfig load_config(const std::filesystem::path& path);

/// Canonical INI text listing every key; parse_config inverts it exactly.
std::string serialize_config(const ScenarioConfig& config);

/// Assign one "section.key" or bare key from a string, as from the CLI.
void set_config_value(ScenarioConfig& config, const std::string& key, const std::string& value);

McsTable load_mcs_table(const ScenarioConfig& config);

}  // namespace preempt
