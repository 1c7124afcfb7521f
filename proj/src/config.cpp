// SPDX-License-Identifier: Apache-2.0

#include "preempt/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <variant>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "preempt/predict.hpp"

namespace preempt {
namespace {

using Member = std::variant<double ScenarioConfig::*, int ScenarioConfig::*, std::uint64_t ScenarioConfig::*,
                            std::string ScenarioConfig::*>;

struct Field {
  const char* section;
  const char* key;
  Member member;
};

const Field kFields[] = {
    {"system", "carrier_ghz", &ScenarioConfig::carrier_ghz},
    {"system", "antennas_x", &ScenarioConfig::antennas_x},
    {"system", "antennas_y", &ScenarioConfig::antennas_y},
    {"system", "slot_s", &ScenarioConfig::slot_s},
    {"system", "bandwidth_mhz", &ScenarioConfig::bandwidth_mhz},
    {"system", "symbols_per_rb", &ScenarioConfig::symbols_per_rb},
    {"system", "subcarriers_per_rb", &ScenarioConfig::subcarriers_per_rb},
    {"system", "num_rbs", &ScenarioConfig::num_rbs},
    {"system", "max_group", &ScenarioConfig::max_group},
    {"system", "tx_snr_db", &ScenarioConfig::tx_snr_db},
    {"users", "num_users", &ScenarioConfig::num_users},
    {"users", "min_height", &ScenarioConfig::min_height},
    {"users", "max_height", &ScenarioConfig::max_height},
    {"users", "max_speed_kmh", &ScenarioConfig::max_speed_kmh},
    {"users", "fixed_speed_kmh", &ScenarioConfig::fixed_speed_kmh},
    {"users", "ser_max", &ScenarioConfig::ser_max},
    {"users", "rate_min_bits", &ScenarioConfig::rate_min_bits},
    {"channel", "max_nlos_paths", &ScenarioConfig::max_nlos_paths},
    {"channel", "shadow_sigma_db", &ScenarioConfig::shadow_sigma_db},
    {"channel", "nlos_keep", &ScenarioConfig::nlos_keep},
    {"channel", "nlos_birth", &ScenarioConfig::nlos_birth},
    {"channel", "reflection_loss_db", &ScenarioConfig::reflection_loss_db},
    {"channel", "fading_correlation", &ScenarioConfig::fading_correlation},
    {"scene", "area_x", &ScenarioConfig::area_x},
    {"scene", "area_y", &ScenarioConfig::area_y},
    {"scene", "obstacle_density", &ScenarioConfig::obstacle_density},
    {"scene", "bs_x", &ScenarioConfig::bs_x},
    {"scene", "bs_y", &ScenarioConfig::bs_y},
    {"scene", "bs_z", &ScenarioConfig::bs_z},
    {"scene", "camera_dx", &ScenarioConfig::camera_dx},
    {"scene", "camera_dy", &ScenarioConfig::camera_dy},
    {"scene", "camera_dz", &ScenarioConfig::camera_dz},
    {"scene", "camera_fov_deg", &ScenarioConfig::camera_fov_deg},
    {"scene", "camera_elevation_deg", &ScenarioConfig::camera_elevation_deg},
    {"scene", "image_width", &ScenarioConfig::image_width},
    {"scene", "image_height", &ScenarioConfig::image_height},
    {"scene", "miss_probability", &ScenarioConfig::miss_probability},
    {"scene", "pixel_sigma", &ScenarioConfig::pixel_sigma},
    {"scene", "depth_sigma", &ScenarioConfig::depth_sigma},
    {"run", "slots", &ScenarioConfig::slots},
    {"run", "window", &ScenarioConfig::window},
    {"run", "lambda", &ScenarioConfig::lambda},
    {"run", "seed", &ScenarioConfig::seed},
    {"run", "policy", &ScenarioConfig::policy},
    {"run", "predictor", &ScenarioConfig::predictor},
    {"run", "mcs_table", &ScenarioConfig::mcs_table},
    {"run", "endpoint_url", &ScenarioConfig::endpoint_url},
    {"run", "endpoint_deadline_ms", &ScenarioConfig::endpoint_deadline_ms},
    {"run", "pf_alpha", &ScenarioConfig::pf_alpha},
    {"run", "ar_order", &ScenarioConfig::ar_order},
    {"run", "path_threshold_db", &ScenarioConfig::path_threshold_db},
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& name, const std::string& raw) {
  const std::string v = trim(raw);
  T out{};
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end || v.empty())
    throw ConfigError("invalid value for " + name + ": '" + raw + "'");
  return out;
}

void assign(ScenarioConfig& c, const Field& f, const std::string& raw) {
  const std::string name = std::string(f.section) + "." + f.key;
  std::visit(
      [&](auto member) {
        using T = std::remove_cvref_t<decltype(c.*member)>;
        if constexpr (std::is_same_v<T, std::string>) {
          c.*member = trim(raw);
        } else {
          c.*member = parse_number<T>(name, raw);
        }
      },
      f.member);
}

std::string render(const ScenarioConfig& c, const Field& f) {
  return std::visit(
      [&](auto member) -> std::string {
        using T = std::remove_cvref_t<decltype(c.*member)>;
        if constexpr (std::is_same_v<T, std::string>) {
          return c.*member;
        } else if constexpr (std::is_same_v<T, double>) {
          char buf[64];
          const auto r = std::to_chars(buf, buf + sizeof buf, c.*member);
          return std::string(buf, r.ptr);
        } else {
          return std::to_string(c.*member);
        }
      },
      f.member);
}

const Field* find_field(const std::string& section, const std::string& key) {
  for (const auto& f : kFields)
    if ((section.empty() || section == f.section) && key == f.key) return &f;
  return nullptr;
}

void require(bool ok, const char* key, const std::string& what) {
  if (!ok) throw ConfigError(std::string(key) + ": " + what);
}

}  // namespace

ArrayGeometry ScenarioConfig::array() const {
  ArrayGeometry g;
  g.nx = antennas_x;
  g.ny = antennas_y;
  g.carrier_hz = carrier_ghz * 1e9;
  return g;
}

SceneSpec ScenarioConfig::scene_spec() const {
  SceneSpec s;
  s.area = {0.0, area_x, 0.0, area_y};
  s.num_users = num_users;
  s.min_height = min_height;
  s.max_height = max_height;
  s.max_speed = max_speed();
  s.fixed_speed = fixed_speed_kmh >= 0.0 ? fixed_speed_kmh / 3.6 : -1.0;
  s.obstacle_density = obstacle_density;
  s.base_station = {bs_x, bs_y, bs_z};
  const Vec3 cam{bs_x + camera_dx, bs_y + camera_dy, bs_z + camera_dz};
  s.camera = CameraModel::from_fov(cam, 0.0, camera_elevation_deg * std::numbers::pi / 180.0,
                                   camera_fov_deg * std::numbers::pi / 180.0, image_width, image_height);
  return s;
}

ChannelSettings ScenarioConfig::channel_settings() const {
  ChannelSettings c;
  c.array = array();
  c.shadow_sigma_db = shadow_sigma_db;
  c.nlos.max_paths = max_nlos_paths;
  c.nlos.keep_probability = nlos_keep;
  c.nlos.birth_probability = nlos_birth;
  c.nlos.reflection_loss_db = reflection_loss_db;
  c.nlos.gain_correlation = fading_correlation;
  return c;
}

DetectorParams ScenarioConfig::detector() const { return {miss_probability, pixel_sigma, depth_sigma}; }

SchedulerConfig ScenarioConfig::scheduler() const {
  SchedulerConfig s;
  s.num_rbs = num_rbs;
  s.max_group = max_group;
  s.tx_power = std::pow(10.0, tx_snr_db / 10.0);
  s.noise_power = 1.0;
  s.ser_max = ser_max;
  s.rate_min_bits = rate_min_bits;
  s.n_re = n_re();
  s.n_symbols = symbols_per_rb;
  s.n_sdm = 1;
  return s;
}

void validate(const ScenarioConfig& c) {
  require(c.carrier_ghz > 0, "system.carrier_ghz", "must be positive");
  require(c.antennas_x >= 1 && c.antennas_y >= 1, "system.antennas_x", "array dimensions must be positive");
  require(c.slot_s > 0, "system.slot_s", "must be positive");
  require(c.bandwidth_mhz > 0, "system.bandwidth_mhz", "must be positive");
  require(c.symbols_per_rb >= 1, "system.symbols_per_rb", "must be positive");
  require(c.subcarriers_per_rb >= 1, "system.subcarriers_per_rb", "must be positive");
  require(c.num_rbs >= 1, "system.num_rbs", "must be positive");
  require(c.max_group >= 1 && c.max_group <= c.antennas_x * c.antennas_y, "system.max_group",
          "must be between 1 and the antenna count");
  require(std::isfinite(c.tx_snr_db), "system.tx_snr_db", "must be finite");
  require(c.num_users >= 1, "users.num_users", "must be at least 1");
  require(c.min_height > 0 && c.min_height <= c.max_height, "users.min_height", "need 0 < min_height <= max_height");
  require(c.max_speed_kmh >= 0, "users.max_speed_kmh", "must be non-negative");
  require(c.fixed_speed_kmh <= c.max_speed_kmh, "users.fixed_speed_kmh", "must not exceed max_speed_kmh");
  require(c.ser_max > 0 && c.ser_max < 1, "users.ser_max", "must lie in (0, 1)");
  require(c.rate_min_bits > 0, "users.rate_min_bits", "must be positive");
  require(c.max_nlos_paths >= 1, "channel.max_nlos_paths", "must be at least 1");
  require(c.shadow_sigma_db >= 0, "channel.shadow_sigma_db", "must be non-negative");
  require(c.nlos_keep >= 0 && c.nlos_keep <= 1, "channel.nlos_keep", "must lie in [0, 1]");
  require(c.nlos_birth >= 0 && c.nlos_birth <= 1, "channel.nlos_birth", "must lie in [0, 1]");
  require(c.reflection_loss_db >= 0, "channel.reflection_loss_db", "must be non-negative");
  require(c.fading_correlation >= 0 && c.fading_correlation <= 1, "channel.fading_correlation",
          "must lie in [0, 1]");
  require(c.area_x > 0 && c.area_y > 0, "scene.area_x", "area must be positive");
  require(c.obstacle_density >= 0 && c.obstacle_density < 0.9, "scene.obstacle_density", "must lie in [0, 0.9)");
  require(c.bs_y < 0, "scene.bs_y", "base station must sit outside the service area, in front of it (y < 0)");
  require(c.camera_fov_deg > 0 && c.camera_fov_deg < 180, "scene.camera_fov_deg", "must lie in (0, 180)");
  require(c.image_width >= 1 && c.image_height >= 1, "scene.image_width", "image size must be positive");
  require(c.miss_probability >= 0 && c.miss_probability < 1, "scene.miss_probability", "must lie in [0, 1)");
  require(c.pixel_sigma >= 0, "scene.pixel_sigma", "must be non-negative");
  require(c.depth_sigma >= 0, "scene.depth_sigma", "must be non-negative");
  require(c.slots >= 2, "run.slots", "must be at least 2");
  require(c.window >= 1 && c.window < c.slots, "run.window", "must lie in [1, slots)");
  require(c.lambda >= 0, "run.lambda", "must be non-negative");
  require(parse_policy(c.policy).has_value(), "run.policy", "unknown policy '" + c.policy + "'");
  require(std::find(std::begin(kPredictorNames), std::end(kPredictorNames), c.predictor) != std::end(kPredictorNames),
          "run.predictor", "unknown predictor '" + c.predictor + "'");
  require(c.predictor != "external" || !c.endpoint_url.empty(), "run.endpoint_url",
          "required by the external predictor");
  require(c.endpoint_deadline_ms >= 1, "run.endpoint_deadline_ms", "must be positive");
  require(c.pf_alpha > 0 && c.pf_alpha <= 1, "run.pf_alpha", "must lie in (0, 1]");
  require(c.ar_order >= 1, "run.ar_order", "must be at least 1");
  require(c.path_threshold_db >= 0, "run.path_threshold_db", "must be non-negative");
}

ScenarioConfig parse_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.message() + " at line " + std::to_string(e.line()));
  }
  ScenarioConfig c;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("key outside any section: " + section);
    for (const auto& [key, value] : body) {
      const Field* f = find_field(section, key);
      if (f == nullptr) throw ConfigError("unknown key: " + section + "." + key);
      assign(c, *f, value.data());
    }
  }
  validate(c);
  return c;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::string serialize_config(const ScenarioConfig& config) {
  std::string out;
  std::string current;
  for (const auto& f : kFields) {
    if (current != f.section) {
      if (!current.empty()) out += "\n";
      current = f.section;
      out += "[" + current + "]\n";
    }
    out += std::string(f.key) + " = " + render(config, f) + "\n";
  }
  return out;
}

void set_config_value(ScenarioConfig& config, const std::string& key, const std::string& value) {
  const auto dot = key.find('.');
  const std::string section = dot == std::string::npos ? "" : key.substr(0, dot);
  const std::string name = dot == std::string::npos ? key : key.substr(dot + 1);
  const Field* f = find_field(section, name);
  if (f == nullptr) throw ConfigError("unknown key: " + key);
  assign(config, *f, value);
}

McsTable load_mcs_table(const ScenarioConfig& config) {
  if (config.mcs_table.empty()) return McsTable::nr_256qam();
  try {
    return McsTable::load_csv(config.mcs_table);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("run.mcs_table: ") + e.what());
  }
}

}  // namespace preempt
