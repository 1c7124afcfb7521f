// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "preempt/geometry.hpp"
#include "preempt/rng.hpp"
#include "preempt/scene.hpp"

namespace preempt {

using Complex = std::complex<double>;
using ChannelVector = Eigen::VectorXcd;

inline constexpr double kSpeedOfLight = 299792458.0;

/// Uniform planar array in the x-z plane, facing +y.
struct ArrayGeometry {
  int nx = 8;
  int ny = 8;
  double spacing = 0.5;  // in carrier wavelengths
  double carrier_hz = 28e9;

  int size() const { return nx * ny; }
  double wavelength() const { return kSpeedOfLight / carrier_hz; }
};

struct PathParams {
  Complex gain;
  double distance = 1.0;
  double azimuth = 0.0;
  double elevation = 0.0;
};

struct ChannelParams {
  int user_id = 0;
  bool los = false;
  PathParams los_path;  // meaningful only when los is set
  std::vector<PathParams> nlos;
};

/// Steering vector; entry p * ny + q is
/// exp(j 2 pi d (p sin(az) cos(el) + q sin(el))).
ChannelVector array_response(const ArrayGeometry& geom, double azimuth, double elevation);

/// exp(-j 2 pi f_c r / c)
Complex propagation_phase(double distance, double carrier_hz);

/// Path loss in dB (a negative number) for the 3GPP-style model with f_c in GHz.
double path_loss_db(double distance, double carrier_hz);

/// sqrt(beta_L) for distance r, carrier f_c and a standard-normal shadow
/// draw. Throws std::domain_error for r <= 0.
double large_scale_gain(double distance, double carrier_hz, double shadow_z,
                        double shadow_sigma_db = 4.0);

/// h = los * a_L e^{-j2pi f r_L/c} a(az_L, el_L) + sum_l a_l e^{-j2pi f r_l/c} a(az_l, el_l)
ChannelVector compose_channel(const ChannelParams& params, const ArrayGeometry& geom);

struct NlosSettings {
  int max_paths = 3;
  double keep_probability = 0.9;
  double birth_probability = 0.3;
  double reflection_loss_db = 10.0;
  double gain_correlation = 0.95;  // AR(1) coefficient of small-scale fading
  double scatterer_min_height = 0.5;
  double scatterer_max_height = 3.0;
};

/// Per-user virtual scatterers with slot-correlated small-scale fading.
class ScattererField {
 public:
  struct Scatterer {
    Vec3 position;
    Complex fading;  // beta_S, CN(0,1) marginally
  };

  ScattererField() = default;
  ScattererField(const NlosSettings& settings, const ServiceArea& area)
      : settings_(settings), area_(area) {}

  /// Survival / birth step followed by path synthesis for one user.
  /// The first call for a user seeds between 1 and max_paths scatterers.
  std::vector<PathParams> spawn_paths(const Vec3& bs, const Vec3& user, double shadow_z,
                                      double carrier_hz, double shadow_sigma_db, Rng& rng);

  const std::vector<Scatterer>& scatterers() const { return scatterers_; }
  std::vector<Scatterer>& scatterers() { return scatterers_; }

 private:
  Scatterer fresh(Rng& rng) const;

  NlosSettings settings_;
  ServiceArea area_;
  std::vector<Scatterer> scatterers_;
  bool seeded_ = false;
};

/// Path geometry for a single bounce via a scatterer point.
PathParams bounce_path(const Vec3& bs, const Vec3& scatterer, const Vec3& user);

struct ChannelSettings {
  ArrayGeometry array;
  NlosSettings nlos;
  double shadow_sigma_db = 4.0;
};

/// Ground-truth channel process for every user of a scene: shadowing drawn
/// once per user, LoS fading and scatterers evolving slot to slot.
class ChannelProcess {
 public:
  ChannelProcess(const ChannelSettings& settings, const SceneState& scene, std::uint64_t seed);

  /// Parameters for the scene's current slot. Call once per slot, in order.
  std::vector<ChannelParams> advance(const SceneState& scene);

  const ChannelSettings& settings() const { return settings_; }

 private:
  ChannelSettings settings_;
  Rng rng_;
  std::vector<double> shadow_;
  std::vector<Complex> los_fading_;
  std::vector<ScattererField> fields_;
  bool started_ = false;
};

}  // namespace preempt
