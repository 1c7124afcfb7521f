// SPDX-License-Identifier: Apache-2.0

#include "preempt/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace preempt {
namespace {

double wrap_angle(double a) { return std::remainder(a, 2.0 * std::numbers::pi); }

Vec3 heading(double angle, double speed) {
  return {speed * std::cos(angle), speed * std::sin(angle), 0.0};
}

// Inward half-plane heading for whichever edges p has crossed. At a corner
// the draw is restricted to the inward quadrant.
double inward_heading(const ServiceArea& area, const Vec3& p, Rng& rng) {
  double nx = 0.0;
  double ny = 0.0;
  if (p.x < area.x_min) nx += 1.0;
  if (p.x > area.x_max) nx -= 1.0;
  if (p.y < area.y_min) ny += 1.0;
  if (p.y > area.y_max) ny -= 1.0;
  const double center = std::atan2(ny, nx);
  const double half = (nx != 0.0 && ny != 0.0) ? std::numbers::pi / 4 : std::numbers::pi / 2;
  return center + uniform(rng, -half, half);
}

Vec3 clamp_to(const ServiceArea& area, Vec3 p) {
  p.x = std::clamp(p.x, area.x_min, area.x_max);
  p.y = std::clamp(p.y, area.y_min, area.y_max);
  return p;
}

}  // namespace

CameraModel CameraModel::from_fov(const Vec3& position, double azimuth, double elevation,
                                  double horizontal_fov, int width_px, int height_px) {
  CameraModel cam;
  cam.position = position;
  cam.boresight_azimuth = azimuth;
  cam.boresight_elevation = elevation;
  cam.width_px = width_px;
  cam.height_px = height_px;
  cam.cx = width_px / 2.0;
  cam.cy = height_px / 2.0;
  cam.focal_px = (width_px / 2.0) / std::tan(horizontal_fov / 2.0);
  return cam;
}

Angles pixel_to_angle(const CameraModel& camera, const Pixel& pixel) {
  return {camera.boresight_azimuth + std::atan((pixel.x - camera.cx) / camera.focal_px),
          camera.boresight_elevation + std::atan((camera.cy - pixel.y) / camera.focal_px)};
}

std::optional<Pixel> angle_to_pixel(const CameraModel& camera, const Angles& angles) {
  const double daz = wrap_angle(angles.azimuth - camera.boresight_azimuth);
  const double del = angles.elevation - camera.boresight_elevation;
  constexpr double kLimit = std::numbers::pi / 2;
  if (std::abs(daz) >= kLimit || std::abs(del) >= kLimit) return std::nullopt;
  return Pixel{camera.cx + camera.focal_px * std::tan(daz),
               camera.cy - camera.focal_px * std::tan(del)};
}

std::optional<Pixel> project_point(const CameraModel& camera, const Vec3& point) {
  auto px = angle_to_pixel(camera, direction_angles(camera.position, point));
  if (!px || !camera.inside_image(*px)) return std::nullopt;
  return px;
}

bool los_visible(const Vec3& bs, const Vec3& user, std::span<const Obstacle> obstacles) {
  return std::none_of(obstacles.begin(), obstacles.end(), [&](const Obstacle& o) {
    return segment_intersects(o.box(), bs, user);
  });
}

SceneState step_mobility(const SceneState& state, double slot_s, std::uint64_t seed) {
  Rng rng(seed);
  SceneState next = state;
  next.slot = state.slot + 1;
  for (auto& u : next.users) {
    Vec3 p = u.position + u.velocity * slot_s;
    if (!state.area.contains(p)) {
      // A few redraws always suffice from an inside start; clamp as a last resort.
      for (int attempt = 0; attempt < 16 && !state.area.contains(p); ++attempt) {
        u.velocity = heading(inward_heading(state.area, p, rng), u.speed);
        p = u.position + u.velocity * slot_s;
      }
      p = clamp_to(state.area, p);
    }
    u.position = p;
  }
  return next;
}

std::vector<Detection> project_and_detect(const SceneState& state, const DetectorParams& params,
                                          std::uint64_t seed) {
  Rng rng(seed);
  const CameraModel& cam = state.camera;
  std::vector<Detection> users;
  for (const auto& u : state.users) {
    // Fixed draw count per user keeps the stream aligned across scenes.
    const double nx = standard_normal(rng);
    const double ny = standard_normal(rng);
    const double nr = standard_normal(rng);
    const bool missed = uniform(rng, 0.0, 1.0) < params.miss_probability;

    auto px = project_point(cam, u.position);
    if (!px) continue;
    Detection d;
    d.kind = Detection::Kind::User;
    d.id = u.id;
    d.pixel = *px;
    d.depth = (u.position - cam.position).norm();
    d.visible = los_visible(cam.position, u.position, state.obstacles);
    if (d.visible) {
      if (missed) continue;
      d.pixel.x = std::clamp(d.pixel.x + params.pixel_sigma * nx, 0.0, cam.width_px - 1e-9);
      d.pixel.y = std::clamp(d.pixel.y + params.pixel_sigma * ny, 0.0, cam.height_px - 1e-9);
      d.depth = std::max(1e-3, d.depth + params.depth_sigma * nr);
    }
    users.push_back(d);
  }
  std::shuffle(users.begin(), users.end(), rng);

  std::vector<Detection> out = std::move(users);
  for (const auto& o : state.obstacles) {
    const Aabb b = o.box();
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    bool ok = true;
    for (int c = 0; c < 8 && ok; ++c) {
      const Vec3 corner{(c & 1) ? b.hi.x : b.lo.x, (c & 2) ? b.hi.y : b.lo.y,
                        (c & 4) ? b.hi.z : b.lo.z};
      auto px = angle_to_pixel(cam, direction_angles(cam.position, corner));
      if (!px) {
        ok = false;
        break;
      }
      x0 = std::min(x0, px->x);
      x1 = std::max(x1, px->x);
      y0 = std::min(y0, px->y);
      y1 = std::max(y1, px->y);
    }
    if (!ok) continue;
    x0 = std::max(x0, 0.0);
    y0 = std::max(y0, 0.0);
    x1 = std::min(x1, static_cast<double>(cam.width_px));
    y1 = std::min(y1, static_cast<double>(cam.height_px));
    if (x1 <= x0 || y1 <= y0) continue;
    Detection d;
    d.kind = Detection::Kind::Obstacle;
    d.id = o.id;
    d.pixel = {(x0 + x1) / 2, (y0 + y1) / 2};
    d.w_img = x1 - x0;
    d.h_img = y1 - y0;
    d.depth = b.distance_to(cam.position);
    out.push_back(d);
  }
  return out;
}

std::vector<Obstacle> generate_obstacles(const SceneSpec& spec, Rng& rng) {
  std::vector<Obstacle> obstacles;
  const double target = spec.obstacle_density * spec.area.area();
  double covered = 0.0;
  int failures = 0;
  while (covered < target && failures < 10000) {
    Obstacle o;
    o.width = uniform(rng, spec.obstacle_min_side, spec.obstacle_max_side);
    o.depth = uniform(rng, spec.obstacle_min_side, spec.obstacle_max_side);
    o.height = uniform(rng, spec.obstacle_min_height, spec.obstacle_max_height);
    // Shrink the last box so coverage lands on the target instead of overshooting.
    const double remaining = target - covered;
    if (o.width * o.depth > remaining) o.depth = std::max(remaining / o.width, 0.05);
    o.center = {uniform(rng, spec.area.x_min + o.width / 2, spec.area.x_max - o.width / 2),
                uniform(rng, spec.area.y_min + o.depth / 2, spec.area.y_max - o.depth / 2),
                o.height / 2};
    const Aabb b = o.box();
    const bool overlaps = std::any_of(obstacles.begin(), obstacles.end(), [&](const Obstacle& other) {
      const Aabb a = other.box();
      return b.lo.x < a.hi.x && a.lo.x < b.hi.x && b.lo.y < a.hi.y && a.lo.y < b.hi.y;
    });
    const bool covers_bs = spec.base_station.x >= b.lo.x && spec.base_station.x <= b.hi.x &&
                           spec.base_station.y >= b.lo.y && spec.base_station.y <= b.hi.y;
    if (overlaps || covers_bs) {
      ++failures;
      continue;
    }
    o.id = static_cast<int>(obstacles.size());
    covered += o.width * o.depth;
    obstacles.push_back(o);
  }
  return obstacles;
}

SceneState make_scene(const SceneSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  SceneState s;
  s.area = spec.area;
  s.base_station = spec.base_station;
  s.camera = spec.camera;
  s.obstacles = generate_obstacles(spec, rng);
  for (int k = 0; k < spec.num_users; ++k) {
    UserState u;
    u.id = k;
    u.height = uniform(rng, spec.min_height, spec.max_height);
    u.speed = spec.fixed_speed >= 0.0 ? spec.fixed_speed : uniform(rng, 0.0, spec.max_speed);
    u.velocity = heading(uniform(rng, -std::numbers::pi, std::numbers::pi), u.speed);
    // Users start outside obstacle footprints.
    for (int attempt = 0; attempt < 1000; ++attempt) {
      u.position = {uniform(rng, spec.area.x_min, spec.area.x_max),
                    uniform(rng, spec.area.y_min, spec.area.y_max), u.height};
      const bool inside = std::any_of(s.obstacles.begin(), s.obstacles.end(),
                                      [&](const Obstacle& o) { return o.box().contains(u.position); });
      if (!inside) break;
    }
    s.users.push_back(u);
  }
  return s;
}

}  // namespace preempt
