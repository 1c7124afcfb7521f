// SPDX-License-Identifier: Apache-2.0

#include "preempt/predict.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/QR>

namespace preempt {

Trajectory::Trajectory(int user_id, std::size_t capacity) : user_id_(user_id), capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("trajectory capacity must be positive");
}

void Trajectory::push(const TrajectoryPoint& point) {
  if (!points_.empty() && point.slot <= points_.back().slot)
    throw std::invalid_argument("trajectory slots must increase");
  points_.push_back(point);
  while (points_.size() > capacity_) points_.pop_front();
}

std::vector<TrajectoryPoint> Trajectory::visible_points() const {
  std::vector<TrajectoryPoint> out;
  for (const auto& p : points_)
    if (p.visible) out.push_back(p);
  return out;
}

const char* to_string(PredictMethod method) {
  switch (method) {
    case PredictMethod::Linear: return "linear";
    case PredictMethod::Kalman: return "kalman";
    case PredictMethod::External: return "external";
  }
  return "?";
}

const char* to_string(MethodUsed method) {
  switch (method) {
    case MethodUsed::Linear: return "linear";
    case MethodUsed::Kalman: return "kalman";
    case MethodUsed::External: return "external";
    case MethodUsed::ExternalRetry: return "external_retry";
    case MethodUsed::Hold: return "hold";
  }
  return "?";
}

std::optional<PredictMethod> parse_predict_method(std::string_view name) {
  if (name == "linear") return PredictMethod::Linear;
  if (name == "kalman") return PredictMethod::Kalman;
  if (name == "external") return PredictMethod::External;
  return std::nullopt;
}

PlausibilityGate plausibility_gate(double max_speed, double slot_s, double focal_px, double distance) {
  PlausibilityGate gate;
  gate.meters = 3.0 * max_speed * slot_s;
  gate.pixels = gate.meters * focal_px / std::max(distance, 1e-3);
  return gate;
}

namespace {

struct Sample {
  int slot;
  double value;
};

struct ScalarForecast {
  double value;
  MethodUsed used;
  bool degraded;
};

ScalarForecast linear_forecast(std::span<const Sample> s, int target) {
  if (s.empty()) return {0.0, MethodUsed::Hold, true};
  if (s.size() == 1) return {s.back().value, MethodUsed::Hold, true};
  const Sample& a = s[s.size() - 2];
  const Sample& b = s.back();
  const double scale = static_cast<double>(target - b.slot) / (b.slot - a.slot);
  return {b.value + (b.value - a.value) * scale, MethodUsed::Linear, false};
}

ScalarForecast kalman_forecast(std::span<const Sample> s, int target, const SageHusaFilter::Params& params) {
  if (s.empty()) return {0.0, MethodUsed::Hold, true};
  if (s.size() == 1) return {s.back().value, MethodUsed::Hold, true};
  SageHusaFilter filter(params);
  filter.initialize(s[0].value, s[1].value, s[1].slot - s[0].slot);
  for (std::size_t i = 2; i < s.size(); ++i) {
    filter.predict(s[i].slot - s[i - 1].slot);
    filter.update(s[i].value);
  }
  return {filter.forecast(target - s.back().slot), MethodUsed::Kalman, false};
}

std::vector<Sample> column(std::span<const TrajectoryPoint> pts, double (*get)(const TrajectoryPoint&)) {
  std::vector<Sample> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back({p.slot, get(p)});
  return out;
}

double get_x(const TrajectoryPoint& p) { return p.pixel.x; }
double get_y(const TrajectoryPoint& p) { return p.pixel.y; }
double get_r(const TrajectoryPoint& p) { return p.distance; }

struct ExternalOutcome {
  MethodUsed used = MethodUsed::External;
  bool ok = false;
};

// One prompt, then one retry on an implausible answer. parse returns
// nullopt on failure; plausible checks the parsed value.
template <class T, class Parse, class Plausible>
ExternalOutcome ask_external(PredictionEndpoint& endpoint, PromptRecord first, PromptRecord retry,
                             Parse parse, Plausible plausible, T& out) {
  auto answer = endpoint.query(first);
  std::optional<T> value = answer ? parse(*answer) : std::nullopt;
  if (!value) return {};
  if (plausible(*value)) {
    out = *value;
    return {MethodUsed::External, true};
  }
  answer = endpoint.query(retry);
  value = answer ? parse(*answer) : std::nullopt;
  if (!value || !plausible(*value)) return {};
  out = *value;
  return {MethodUsed::ExternalRetry, true};
}

}  // namespace

PromptRecord build_prompt(const Trajectory& traj, PromptKind kind) {
  const auto pts = traj.visible_points();
  PromptRecord rec;
  rec.kind = kind;
  rec.user_id = traj.user_id();
  rec.slot = traj.last_slot() + 1;
  if (kind == PromptKind::Angles) {
    std::vector<Pixel> px;
    for (const auto& p : pts) px.push_back(p.pixel);
    rec.text = angles_prompt(px);
  } else {
    std::vector<double> r;
    for (const auto& p : pts) r.push_back(p.distance);
    rec.text = distance_prompt(r);
  }
  return rec;
}

StatePrediction predict_next_state(const Trajectory& traj, PredictMethod method, int target_slot,
                                   const PredictorContext& ctx) {
  const auto pts = traj.visible_points();
  const auto xs = column(pts, get_x);
  const auto ys = column(pts, get_y);
  const auto rs = column(pts, get_r);

  StatePrediction out;
  auto linear_all = [&] {
    const auto fx = linear_forecast(xs, target_slot);
    const auto fy = linear_forecast(ys, target_slot);
    const auto fr = linear_forecast(rs, target_slot);
    out.pixel = {fx.value, fy.value};
    out.distance = fr.value;
    out.pixel_method = fx.used;
    out.distance_method = fr.used;
    out.degraded = fx.degraded;
  };

  switch (method) {
    case PredictMethod::Linear:
      linear_all();
      break;
    case PredictMethod::Kalman: {
      const auto fx = kalman_forecast(xs, target_slot, ctx.kalman);
      const auto fy = kalman_forecast(ys, target_slot, ctx.kalman);
      const auto fr = kalman_forecast(rs, target_slot, ctx.kalman);
      out.pixel = {fx.value, fy.value};
      out.distance = fr.value;
      out.pixel_method = fx.used;
      out.distance_method = fr.used;
      out.degraded = fx.degraded;
      break;
    }
    case PredictMethod::External: {
      linear_all();
      if (pts.empty()) break;
      if (ctx.endpoint == nullptr) {
        out.fell_back = true;
        break;
      }
      const auto& last = pts.back();
      const double steps = target_slot - last.slot;

      std::vector<Pixel> px;
      std::vector<double> rv;
      for (const auto& p : pts) {
        px.push_back(p.pixel);
        rv.push_back(p.distance);
      }
      PromptRecord first = build_prompt(traj, PromptKind::Angles);
      first.slot = target_slot;
      PromptRecord retry = first;
      retry.text = angles_retry_prompt(px);

      Pixel pixel;
      const auto pix = ask_external<Pixel>(
          *ctx.endpoint, first, retry, parse_pair_response,
          [&](const Pixel& p) {
            return std::hypot(p.x - last.pixel.x, p.y - last.pixel.y) <= ctx.gate.pixels * steps;
          },
          pixel);
      if (pix.ok) {
        out.pixel = pixel;
        out.pixel_method = pix.used;
      } else {
        out.fell_back = true;
      }

      first = build_prompt(traj, PromptKind::Distance);
      first.slot = target_slot;
      retry = first;
      retry.text = distance_retry_prompt(rv);
      double distance = 0.0;
      const auto dist = ask_external<double>(
          *ctx.endpoint, first, retry, parse_distance_response,
          [&](double r) { return r > 0.0 && std::abs(r - last.distance) <= ctx.gate.meters * steps; },
          distance);
      if (dist.ok) {
        out.distance = distance;
        out.distance_method = dist.used;
      } else {
        out.fell_back = true;
      }
      break;
    }
  }
  return out;
}

BlockagePrediction predict_blockage(std::span<const PositionPrediction> users,
                                    std::span<const Detection> obstacles) {
  BlockagePrediction out;
  out.los.assign(users.size(), 1);
  for (std::size_t k = 0; k < users.size(); ++k) {
    const auto& u = users[k];
    for (const auto& o : obstacles) {
      if (o.kind != Detection::Kind::Obstacle) continue;
      const bool inside = std::abs(u.pixel.x - o.pixel.x) <= o.w_img / 2 &&
                          std::abs(u.pixel.y - o.pixel.y) <= o.h_img / 2;
      if (!inside) continue;
      out.overlaps.pairs.emplace_back(u.user_id, o.id);
      if (u.distance >= o.depth) out.los[k] = 0;
    }
  }
  return out;
}

Complex ar_predict(std::span<const Complex> series, int order, int steps) {
  if (series.empty()) throw std::invalid_argument("ar_predict needs at least one sample");
  if (steps < 1) throw std::invalid_argument("ar_predict steps must be positive");
  const int n = static_cast<int>(series.size());
  double peak = 0.0;
  for (const auto& x : series) peak = std::max(peak, std::abs(x));

  for (int p = std::min(order, n - 1); p >= 1; --p) {
    const int eqs = n - p;
    if (eqs < p) continue;
    Eigen::MatrixXcd a(eqs, p);
    Eigen::VectorXcd b(eqs);
    for (int t = p; t < n; ++t) {
      for (int i = 0; i < p; ++i) a(t - p, i) = series[static_cast<std::size_t>(t - 1 - i)];
      b(t - p) = series[static_cast<std::size_t>(t)];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXcd> qr(a);
    if (qr.rank() < p) continue;
    const Eigen::VectorXcd c = qr.solve(b);

    std::vector<Complex> ext(series.begin(), series.end());
    for (int s = 0; s < steps; ++s) {
      Complex next{0.0, 0.0};
      for (int i = 0; i < p; ++i) next += c(i) * ext[ext.size() - 1 - static_cast<std::size_t>(i)];
      ext.push_back(next);
    }
    if (std::isfinite(std::abs(ext.back())) && std::abs(ext.back()) <= 2.0 * peak) return ext.back();
    break;
  }

  // Contracting order-1 fit, then hold.
  Complex num{0.0, 0.0};
  double den = 0.0;
  for (int t = 1; t < n; ++t) {
    num += series[static_cast<std::size_t>(t)] * std::conj(series[static_cast<std::size_t>(t - 1)]);
    den += std::norm(series[static_cast<std::size_t>(t - 1)]);
  }
  if (den <= 0.0) return series.back();
  Complex c = num / den;
  if (std::abs(c) > 1.0) c /= std::abs(c);
  return std::pow(c, steps) * series.back();
}

namespace {

struct PathTrack {
  std::vector<int> slots;
  std::vector<PathParams> paths;
};

double angle_gap(const PathParams& a, const PathParams& b) {
  return std::hypot(a.azimuth - b.azimuth, a.elevation - b.elevation);
}

double extrapolate(double a, int sa, double b, int sb, int target) {
  return b + (b - a) * static_cast<double>(target - sb) / (sb - sa);
}

}  // namespace

ParamPrediction predict_params(std::span<const ParamObservation> history, int target_slot,
                               const ParamSettings& settings) {
  ParamPrediction out;
  if (history.empty()) return out;

  std::vector<Complex> los;
  int los_slot = 0;
  for (const auto& obs : history) {
    if (obs.los_gain) {
      los.push_back(*obs.los_gain);
      los_slot = obs.slot;
    }
  }
  if (!los.empty()) out.los_gain = ar_predict(los, settings.order, std::max(1, target_slot - los_slot));

  std::vector<PathTrack> tracks;
  for (const auto& obs : history) {
    std::vector<PathParams> paths = obs.nlos;
    std::sort(paths.begin(), paths.end(),
              [](const PathParams& a, const PathParams& b) { return std::norm(a.gain) > std::norm(b.gain); });
    std::vector<bool> taken(tracks.size(), false);
    for (const auto& path : paths) {
      int best = -1;
      double best_gap = settings.association_gate_rad;
      for (std::size_t t = 0; t < tracks.size(); ++t) {
        if (taken[t]) continue;
        const double gap = angle_gap(tracks[t].paths.back(), path);
        if (gap <= best_gap) {
          best_gap = gap;
          best = static_cast<int>(t);
        }
      }
      if (best < 0) {
        tracks.push_back({});
        taken.push_back(false);
        best = static_cast<int>(tracks.size()) - 1;
      }
      taken[static_cast<std::size_t>(best)] = true;
      tracks[static_cast<std::size_t>(best)].slots.push_back(obs.slot);
      tracks[static_cast<std::size_t>(best)].paths.push_back(path);
    }
  }

  const int latest = history.back().slot;
  std::vector<ScoredPath> predicted;
  for (const auto& tr : tracks) {
    if (tr.slots.back() != latest) continue;
    std::vector<Complex> gains;
    for (const auto& p : tr.paths) gains.push_back(p.gain);
    PathParams next = tr.paths.back();
    next.gain = ar_predict(gains, settings.order, std::max(1, target_slot - latest));
    if (tr.paths.size() >= 2) {
      const auto& a = tr.paths[tr.paths.size() - 2];
      const auto& b = tr.paths.back();
      const int sa = tr.slots[tr.slots.size() - 2];
      next.distance = std::max(1e-3, extrapolate(a.distance, sa, b.distance, latest, target_slot));
      next.azimuth = extrapolate(a.azimuth, sa, b.azimuth, latest, target_slot);
      next.elevation = extrapolate(a.elevation, sa, b.elevation, latest, target_slot);
    }
    predicted.push_back({next, std::norm(next.gain)});
  }
  std::sort(predicted.begin(), predicted.end(),
            [](const ScoredPath& a, const ScoredPath& b) { return a.score > b.score; });
  if (predicted.empty() || predicted.front().score <= 0.0) return out;

  const double strongest = predicted.front().score;
  const double floor = std::pow(10.0, -settings.path_threshold_db / 10.0);
  for (auto& p : predicted) {
    p.score /= strongest;
    if (p.score < floor) break;
    if (static_cast<int>(out.nlos.size()) >= settings.max_paths) break;
    out.nlos.push_back(p);
  }
  return out;
}

ChannelVector reconstruct_channel(const PredictionRecord& prediction, const ArrayGeometry& geom) {
  ChannelParams params;
  params.user_id = prediction.user_id;
  params.los = prediction.los == 1;
  params.los_path = {prediction.los_gain, prediction.distance, prediction.azimuth, prediction.elevation};
  params.nlos.reserve(prediction.nlos.size());
  for (const auto& p : prediction.nlos) params.nlos.push_back(p.path);
  return compose_channel(params, geom);
}

PredictionRecord record_from_params(const ChannelParams& params) {
  PredictionRecord rec;
  rec.user_id = params.user_id;
  rec.los = params.los ? 1 : 0;
  rec.los_gain = params.los_path.gain;
  rec.distance = params.los_path.distance;
  rec.azimuth = params.los_path.azimuth;
  rec.elevation = params.los_path.elevation;
  double strongest = 0.0;
  for (const auto& p : params.nlos) strongest = std::max(strongest, std::norm(p.gain));
  for (const auto& p : params.nlos)
    rec.nlos.push_back({p, strongest > 0.0 ? std::norm(p.gain) / strongest : 0.0});
  return rec;
}

double regression_loss(std::span<const double> truth, std::span<const double> predicted, double lambda) {
  if (truth.size() != predicted.size()) throw std::invalid_argument("loss operands differ in size");
  double sq = 0.0;
  double abs = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double d = truth[i] - predicted[i];
    sq += d * d;
    abs += std::abs(d);
  }
  return sq + lambda * abs;
}

std::vector<double> flatten_gain(Complex gain) { return {gain.real(), gain.imag()}; }

std::vector<double> flatten_nlos(std::span<const PathParams> paths, int max_paths) {
  if (static_cast<int>(paths.size()) > max_paths)
    throw std::invalid_argument("more paths than the flattening allows");
  std::vector<double> out(static_cast<std::size_t>(5 * max_paths), 0.0);
  for (std::size_t l = 0; l < paths.size(); ++l) {
    const auto& p = paths[l];
    const double v[5] = {p.gain.real(), p.gain.imag(), p.azimuth, p.elevation, p.distance};
    std::copy(v, v + 5, out.begin() + static_cast<std::ptrdiff_t>(5 * l));
  }
  return out;
}

PredictionLosses prediction_losses(const ChannelParams& truth, const PredictionRecord& predicted,
                                   int max_paths, double lambda) {
  const Complex zero{0.0, 0.0};
  PredictionLosses out;
  out.los = regression_loss(flatten_gain(truth.los ? truth.los_path.gain : zero),
                            flatten_gain(predicted.los == 1 ? predicted.los_gain : zero), lambda);

  auto by_power = [](const PathParams& a, const PathParams& b) { return std::norm(a.gain) > std::norm(b.gain); };
  std::vector<PathParams> t = truth.nlos;
  std::vector<PathParams> p;
  for (const auto& s : predicted.nlos) p.push_back(s.path);
  std::sort(t.begin(), t.end(), by_power);
  std::sort(p.begin(), p.end(), by_power);
  out.nlos = regression_loss(flatten_nlos(t, max_paths), flatten_nlos(p, max_paths), lambda);
  return out;
}

std::optional<double> nmse_db(const ChannelVector& h, const ChannelVector& h_hat) {
  if (h.size() != h_hat.size()) throw std::invalid_argument("nmse operands differ in size");
  const double den = h.squaredNorm();
  if (den == 0.0) return std::nullopt;
  const double num = (h - h_hat).squaredNorm();
  if (num == 0.0) return -std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(num / den);
}

}  // namespace preempt
