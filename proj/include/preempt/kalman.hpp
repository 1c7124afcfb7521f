// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>

#include <Eigen/Dense>

namespace preempt {

/// Constant-velocity Kalman filter on one coordinate with a Sage-Husa
/// adaptive estimate of the measurement noise variance. Time is measured in
/// slots.
class SageHusaFilter {
 public:
  struct Params {
    double accel_variance = 1.0;  // process noise, units^2 / slot^4
    double initial_noise = 1.0;   // measurement noise variance before adaptation
    double min_noise = 1e-6;
    double forgetting = 0.98;
  };

  SageHusaFilter() = default;
  explicit SageHusaFilter(const Params& params) : params_(params), noise_(params.initial_noise) {}

  /// Two-point start: position z1, velocity (z1 - z0) / dt.
  void initialize(double z0, double z1, double dt);

  void predict(double dt);
  void update(double z);

  /// Position dt slots ahead of the current state, without mutating it.
  double forecast(double dt) const;

  bool initialized() const { return initialized_; }
  double position() const { return x_(0); }
  double velocity() const { return x_(1); }
  double measurement_noise() const { return noise_; }

 private:
  Params params_;
  Eigen::Vector2d x_ = Eigen::Vector2d::Zero();
  Eigen::Matrix2d p_ = Eigen::Matrix2d::Identity();
  double noise_ = 1.0;
  int updates_ = 0;
  bool initialized_ = false;
};

}  // namespace preempt
