// SPDX-License-Identifier: Apache-2.0

#include "preempt/kalman.hpp"

#include <algorithm>
#include <cmath>

namespace preempt {

void SageHusaFilter::initialize(double z0, double z1, double dt) {
  const double r = params_.initial_noise;
  x_ << z1, (z1 - z0) / dt;
  p_ << r, r / dt, r / dt, 2.0 * r / (dt * dt);
  noise_ = r;
  updates_ = 0;
  initialized_ = true;
}

void SageHusaFilter::predict(double dt) {
  Eigen::Matrix2d f;
  f << 1.0, dt, 0.0, 1.0;
  const double q = params_.accel_variance;
  const double dt2 = dt * dt;
  Eigen::Matrix2d qm;
  qm << dt2 * dt2 / 4.0 * q, dt2 * dt / 2.0 * q, dt2 * dt / 2.0 * q, dt2 * q;
  x_ = f * x_;
  p_ = f * p_ * f.transpose() + qm;
}

void SageHusaFilter::update(double z) {
  const double innovation = z - x_(0);
  const double b = params_.forgetting;
  const double d = (1.0 - b) / (1.0 - std::pow(b, updates_ + 1));
  noise_ = (1.0 - d) * noise_ + d * (innovation * innovation - p_(0, 0));
  noise_ = std::max(noise_, params_.min_noise);
  const double s = p_(0, 0) + noise_;
  const Eigen::Vector2d k = p_.col(0) / s;
  x_ += k * innovation;
  Eigen::Matrix2d ikh = Eigen::Matrix2d::Identity();
  ikh(0, 0) -= k(0);
  ikh(1, 0) -= k(1);
  p_ = ikh * p_;
  ++updates_;
}

double SageHusaFilter::forecast(double dt) const { return x_(0) + dt * x_(1); }

}  // namespace preempt
