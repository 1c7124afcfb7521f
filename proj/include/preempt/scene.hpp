// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "preempt/geometry.hpp"
#include "preempt/rng.hpp"

namespace preempt {

struct UserState {
  int id = 0;
  Vec3 position;
  Vec3 velocity;  // m/s, horizontal
  double height = 1.0;
  double speed = 0.0;
};

/// Axis-aligned obstacle: width along x, depth along y, height along z.
/// The center z is half the height (boxes stand on the floor).
struct Obstacle {
  int id = 0;
  Vec3 center;
  double width = 1.0;
  double depth = 1.0;
  double height = 1.0;

  Aabb box() const {
    return {{center.x - width / 2, center.y - depth / 2, center.z - height / 2},
            {center.x + width / 2, center.y + depth / 2, center.z + height / 2}};
  }
};

struct Pixel {
  double x = 0.0;
  double y = 0.0;
};

/// Angular pinhole camera. Pixel offsets are the tangent of the angular
/// offset from boresight, scaled by the focal length, separately per axis.
struct CameraModel {
  Vec3 position;
  double boresight_azimuth = 0.0;
  double boresight_elevation = 0.0;
  double focal_px = 960.0;
  double cx = 960.0;
  double cy = 540.0;
  int width_px = 1920;
  int height_px = 1080;

  static CameraModel from_fov(const Vec3& position, double azimuth, double elevation,
                              double horizontal_fov, int width_px, int height_px);

  bool inside_image(const Pixel& p) const {
    return p.x >= 0.0 && p.x < width_px && p.y >= 0.0 && p.y < height_px;
  }
};

/// Inverse of pixel_to_angle; nullopt when the direction is behind the
/// image plane on either axis.
std::optional<Pixel> angle_to_pixel(const CameraModel& camera, const Angles& angles);

Angles pixel_to_angle(const CameraModel& camera, const Pixel& pixel);

/// Projection of a world point; nullopt when outside the image.
std::optional<Pixel> project_point(const CameraModel& camera, const Vec3& point);

struct Detection {
  enum class Kind { User, Obstacle };
  Kind kind = Kind::User;
  int id = 0;  // ground-truth label, used for scoring only
  Pixel pixel;
  double w_img = 0.0;
  double h_img = 0.0;
  double depth = 0.0;  // range from the camera in meters
  bool visible = true;
};

struct ServiceArea {
  double x_min = 0.0;
  double x_max = 20.0;
  double y_min = 0.0;
  double y_max = 20.0;

  bool contains(const Vec3& p) const {
    return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max;
  }
  double area() const { return (x_max - x_min) * (y_max - y_min); }
};

struct SceneState {
  int slot = 0;
  std::vector<UserState> users;
  std::vector<Obstacle> obstacles;
  CameraModel camera;
  Vec3 base_station;
  ServiceArea area;
};

/// Advance every user by velocity * slot_s. A user that would leave the
/// service area draws a new heading uniformly from the inward half-plane of
/// the crossed edge, keeping its speed.
SceneState step_mobility(const SceneState& state, double slot_s, std::uint64_t seed);

struct DetectorParams {
  double miss_probability = 0.045;
  double pixel_sigma = 1.0;
  double depth_sigma = 0.0;
};

/// Synthetic detector standing in for the camera and object detector.
/// Occluded users are reported with visible = false; missed users are
/// dropped. User detections come back in shuffled order.
std::vector<Detection> project_and_detect(const SceneState& state, const DetectorParams& params,
                                          std::uint64_t seed);

/// Ground-truth LoS status: true iff the segment bs -> user misses every box.
bool los_visible(const Vec3& bs, const Vec3& user, std::span<const Obstacle> obstacles);

struct SceneSpec {
  ServiceArea area;
  int num_users = 10;
  double min_height = 0.5;
  double max_height = 2.0;
  double max_speed = 25.0 / 3.6;
  double fixed_speed = -1.0;  // when >= 0 every user moves at this speed
  double obstacle_density = 0.2;
  double obstacle_min_side = 0.5;
  double obstacle_max_side = 3.0;
  double obstacle_min_height = 1.5;
  double obstacle_max_height = 3.0;
  Vec3 base_station{10.0, -11.0, 3.0};
  CameraModel camera;
};

/// Place non-overlapping boxes until the XY coverage reaches the density.
std::vector<Obstacle> generate_obstacles(const SceneSpec& spec, Rng& rng);

SceneState make_scene(const SceneSpec& spec, std::uint64_t seed);

}  // namespace preempt
