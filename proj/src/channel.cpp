// SPDX-License-Identifier: Apache-2.0

#include "preempt/channel.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace preempt {

ChannelVector array_response(const ArrayGeometry& geom, double azimuth, double elevation) {
  ChannelVector a(geom.size());
  const double u = std::sin(azimuth) * std::cos(elevation);
  const double v = std::sin(elevation);
  const double k = 2.0 * std::numbers::pi * geom.spacing;
  for (int p = 0; p < geom.nx; ++p) {
    for (int q = 0; q < geom.ny; ++q) {
      a(p * geom.ny + q) = std::polar(1.0, k * (p * u + q * v));
    }
  }
  return a;
}

Complex propagation_phase(double distance, double carrier_hz) {
  // Reduce the cycle count before forming the angle to keep precision at
  // tens of thousands of wavelengths.
  const double cycles = distance * carrier_hz / kSpeedOfLight;
  const double frac = cycles - std::floor(cycles);
  return std::polar(1.0, -2.0 * std::numbers::pi * frac);
}

double path_loss_db(double distance, double carrier_hz) {
  if (!(distance > 0.0)) throw std::domain_error("path loss distance must be positive");
  return -(31.84 + 21.5 * std::log10(distance) + 19.0 * std::log10(carrier_hz / 1e9));
}

double large_scale_gain(double distance, double carrier_hz, double shadow_z, double shadow_sigma_db) {
  const double beta_db = path_loss_db(distance, carrier_hz) + shadow_z * shadow_sigma_db;
  return std::sqrt(std::pow(10.0, beta_db / 10.0));
}

ChannelVector compose_channel(const ChannelParams& params, const ArrayGeometry& geom) {
  ChannelVector h = ChannelVector::Zero(geom.size());
  auto add = [&](const PathParams& p) {
    h += (p.gain * propagation_phase(p.distance, geom.carrier_hz)) *
         array_response(geom, p.azimuth, p.elevation);
  };
  if (params.los) add(params.los_path);
  for (const auto& p : params.nlos) add(p);
  return h;
}

PathParams bounce_path(const Vec3& bs, const Vec3& scatterer, const Vec3& user) {
  PathParams p;
  p.distance = (scatterer - bs).norm() + (user - scatterer).norm();
  const Angles a = direction_angles(bs, scatterer);
  p.azimuth = a.azimuth;
  p.elevation = a.elevation;
  return p;
}

ScattererField::Scatterer ScattererField::fresh(Rng& rng) const {
  Scatterer s;
  s.position = {uniform(rng, area_.x_min, area_.x_max), uniform(rng, area_.y_min, area_.y_max),
                uniform(rng, settings_.scatterer_min_height, settings_.scatterer_max_height)};
  s.fading = complex_normal(rng);
  return s;
}

std::vector<PathParams> ScattererField::spawn_paths(const Vec3& bs, const Vec3& user,
                                                    double shadow_z, double carrier_hz,
                                                    double shadow_sigma_db, Rng& rng) {
  const int lmax = settings_.max_paths;
  if (!seeded_) {
    const int initial = std::uniform_int_distribution<int>(1, lmax)(rng);
    for (int i = 0; i < initial; ++i) scatterers_.push_back(fresh(rng));
    seeded_ = true;
  } else {
    std::vector<Scatterer> kept;
    for (auto& s : scatterers_) {
      if (uniform(rng, 0.0, 1.0) < settings_.keep_probability) kept.push_back(s);
    }
    scatterers_ = std::move(kept);
    if (static_cast<int>(scatterers_.size()) < lmax &&
        uniform(rng, 0.0, 1.0) < settings_.birth_probability) {
      scatterers_.push_back(fresh(rng));
    }
    if (scatterers_.empty()) scatterers_.push_back(fresh(rng));
    const double rho = settings_.gain_correlation;
    const double innov = std::sqrt(1.0 - rho * rho);
    for (auto& s : scatterers_) s.fading = rho * s.fading + innov * complex_normal(rng);
  }

  const double reflection = std::pow(10.0, -settings_.reflection_loss_db / 20.0);
  std::vector<PathParams> paths;
  paths.reserve(scatterers_.size());
  for (const auto& s : scatterers_) {
    PathParams p = bounce_path(bs, s.position, user);
    p.gain = large_scale_gain(p.distance, carrier_hz, shadow_z, shadow_sigma_db) * reflection *
             s.fading;
    paths.push_back(p);
  }
  return paths;
}

ChannelProcess::ChannelProcess(const ChannelSettings& settings, const SceneState& scene,
                               std::uint64_t seed)
    : settings_(settings), rng_(seed) {
  for (std::size_t k = 0; k < scene.users.size(); ++k) {
    shadow_.push_back(standard_normal(rng_));
    los_fading_.push_back(complex_normal(rng_));
    fields_.emplace_back(settings.nlos, scene.area);
  }
}

std::vector<ChannelParams> ChannelProcess::advance(const SceneState& scene) {
  const double rho = settings_.nlos.gain_correlation;
  const double innov = std::sqrt(1.0 - rho * rho);
  if (started_) {
    for (auto& f : los_fading_) f = rho * f + innov * complex_normal(rng_);
  }
  started_ = true;

  const double fc = settings_.array.carrier_hz;
  std::vector<ChannelParams> out;
  out.reserve(scene.users.size());
  for (std::size_t k = 0; k < scene.users.size(); ++k) {
    const auto& u = scene.users[k];
    ChannelParams cp;
    cp.user_id = u.id;
    cp.los = los_visible(scene.base_station, u.position, scene.obstacles);
    const Angles a = direction_angles(scene.base_station, u.position);
    cp.los_path.distance = (u.position - scene.base_station).norm();
    cp.los_path.azimuth = a.azimuth;
    cp.los_path.elevation = a.elevation;
    cp.los_path.gain =
        large_scale_gain(cp.los_path.distance, fc, shadow_[k], settings_.shadow_sigma_db) *
        los_fading_[k];
    cp.nlos = fields_[k].spawn_paths(scene.base_station, u.position, shadow_[k], fc,
                                     settings_.shadow_sigma_db, rng_);
    out.push_back(std::move(cp));
  }
  return out;
}

}  // namespace preempt
