// SPDX-License-Identifier: Apache-2.0

#include "preempt/simulation.hpp"

#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <memory>
#include <numbers>

#include "preempt/estimation.hpp"
#include "preempt/identify.hpp"
#include "preempt/predict.hpp"
#include "preempt/rng.hpp"

namespace preempt {
namespace {

enum Stream : std::uint64_t { kScene = 1, kMobility, kChannel, kPilot, kDetect };

enum class PredictorKind { Oracle, Kalman, Linear, External, LastValue, Zero };

PredictorKind predictor_kind(const std::string& name) {
  if (name == "oracle") return PredictorKind::Oracle;
  if (name == "kalman") return PredictorKind::Kalman;
  if (name == "linear") return PredictorKind::Linear;
  if (name == "external") return PredictorKind::External;
  if (name == "last_value") return PredictorKind::LastValue;
  if (name == "zero") return PredictorKind::Zero;
  throw ConfigError("run.predictor: unknown predictor '" + name + "'");
}

bool geometric(PredictorKind k) {
  return k == PredictorKind::Kalman || k == PredictorKind::Linear || k == PredictorKind::External;
}

// Ground truth for slots 1..T, independent of policy and predictor.
struct GroundTruth {
  std::vector<SceneState> scenes;
  std::vector<std::vector<ChannelParams>> params;
  std::vector<std::vector<ChannelVector>> channels;
};

GroundTruth simulate_truth(const ScenarioConfig& cfg) {
  const auto geom = cfg.array();
  GroundTruth gt;
  gt.scenes.resize(static_cast<std::size_t>(cfg.slots + 1));
  gt.params.resize(gt.scenes.size());
  gt.channels.resize(gt.scenes.size());
  gt.scenes[1] = make_scene(cfg.scene_spec(), derive_seed(cfg.seed, kScene));
  gt.scenes[1].slot = 1;
  ChannelProcess process(cfg.channel_settings(), gt.scenes[1], derive_seed(cfg.seed, kChannel));
  for (int t = 1; t <= cfg.slots; ++t) {
    const auto ut = static_cast<std::size_t>(t);
    if (t > 1) {
      gt.scenes[ut] = step_mobility(gt.scenes[ut - 1], cfg.slot_s, derive_seed(cfg.seed, kMobility, ut));
      gt.scenes[ut].slot = t;
    }
    gt.params[ut] = process.advance(gt.scenes[ut]);
    for (const auto& p : gt.params[ut]) gt.channels[ut].push_back(compose_channel(p, geom));
  }
  return gt;
}

// Camera-frame pixel and range to array-frame geometry.
LosGeometry array_geometry(const SceneState& scene, const Pixel& pixel, double range) {
  const Vec3 point = point_along(scene.camera.position, pixel_to_angle(scene.camera, pixel), range);
  const Angles a = direction_angles(scene.base_station, point);
  return {(point - scene.base_station).norm(), a.azimuth, a.elevation};
}

std::unique_ptr<PredictionEndpoint> make_endpoint(const ScenarioConfig& cfg, const RunHooks& hooks) {
  if (cfg.endpoint_url.empty()) return nullptr;
  return std::make_unique<HttpEndpoint>(cfg.endpoint_url, std::chrono::milliseconds(cfg.endpoint_deadline_ms),
                                        hooks.on_event);
}

}  // namespace

nlohmann::json scene_snapshot(const SceneState& scene) {
  nlohmann::json users = nlohmann::json::array();
  for (const auto& u : scene.users) {
    users.push_back({{"id", u.id},
                     {"position", {u.position.x, u.position.y, u.position.z}},
                     {"velocity", {u.velocity.x, u.velocity.y, u.velocity.z}}});
  }
  nlohmann::json obstacles = nlohmann::json::array();
  for (const auto& o : scene.obstacles) {
    obstacles.push_back({{"id", o.id},
                         {"center", {o.center.x, o.center.y, o.center.z}},
                         {"size", {o.width, o.depth, o.height}}});
  }
  return {{"event", "scene"}, {"slot", scene.slot}, {"users", users}, {"obstacles", obstacles}};
}

void summarize(RunResult& r) {
  r.total_bits = 0.0;
  r.violation_count = 0;
  int samples = 0;
  int hits = 0;
  int nmse_count = 0;
  double nmse_sum = 0.0;
  for (const auto& row : r.rows) {
    r.total_bits += row.bits;
    r.violation_count += row.violation;
    if (row.los_predicted >= 0) {
      ++samples;
      hits += row.los_predicted == row.los_true;
    }
    if (row.nmse_db) {
      ++nmse_count;
      nmse_sum += std::pow(10.0, *row.nmse_db / 10.0);
    }
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  r.blockage_accuracy = samples > 0 ? static_cast<double>(hits) / samples : nan;
  r.mean_nmse_db = nmse_count > 0 ? 10.0 * std::log10(nmse_sum / nmse_count) : nan;
}

RunResult run_scenario(const ScenarioConfig& cfg, const RunHooks& hooks) {
  validate(cfg);
  const PredictorKind kind = predictor_kind(cfg.predictor);
  const Policy policy = *parse_policy(cfg.policy);
  const McsTable table = load_mcs_table(cfg);
  const ArrayGeometry geom = cfg.array();
  const SchedulerConfig sched = cfg.scheduler();
  const DetectorParams detector = cfg.detector();
  const int K = cfg.num_users;
  const auto uK = static_cast<std::size_t>(K);

  const GroundTruth gt = simulate_truth(cfg);
  const CameraModel& camera = gt.scenes[1].camera;
  const Vec3 bs = gt.scenes[1].base_station;

  std::unique_ptr<PredictionEndpoint> owned;
  PredictorContext ctx;
  if (kind == PredictorKind::External) {
    if (hooks.endpoint != nullptr) {
      ctx.endpoint = hooks.endpoint;
    } else {
      owned = make_endpoint(cfg, hooks);
      ctx.endpoint = owned.get();
    }
  }
  const PredictMethod method = kind == PredictorKind::Linear   ? PredictMethod::Linear
                               : kind == PredictorKind::External ? PredictMethod::External
                                                                 : PredictMethod::Kalman;

  const AngularGrid grid(geom);
  const BeamCodebook codebook =
      BeamCodebook::grid(geom, -std::numbers::pi / 3, std::numbers::pi / 3, 32, -0.6, 0.1, 12, bs.z,
                         0.5 * (cfg.min_height + cfg.max_height), 60.0);
  const double pilot_power = sched.tx_power;
  const Complex pilot{std::sqrt(pilot_power), 0.0};
  const double energy_floor = 10.0 * sched.noise_power / pilot_power;
  ParamSettings param_settings;
  param_settings.order = cfg.ar_order;
  param_settings.max_paths = cfg.max_nlos_paths;
  param_settings.path_threshold_db = cfg.path_threshold_db;

  std::vector<Trajectory> trajectories;
  std::vector<std::deque<ParamObservation>> param_history(uK);
  for (int k = 0; k < K; ++k) trajectories.emplace_back(k, static_cast<std::size_t>(cfg.window));
  std::vector<double> prior_snr(uK, std::numeric_limits<double>::infinity());
  std::vector<double> average_rate(uK, 1.0);

  RunResult result;
  result.policy = cfg.policy;
  result.predictor = cfg.predictor;
  result.seed = cfg.seed;

  auto emit = [&](const nlohmann::json& j) {
    if (hooks.on_event) hooks.on_event(j);
  };
  emit(scene_snapshot(gt.scenes[1]));

  for (int t = 1; t <= cfg.slots; ++t) {
    const auto ut = static_cast<std::size_t>(t);
    const SceneState& scene = gt.scenes[ut];

    // Observe slot t: pilots, camera, identification, estimation.
    Rng pilot_rng(derive_seed(cfg.seed, kPilot, ut));
    std::vector<PilotObservation> obs;
    std::vector<ChannelVector> estimates;
    for (int k = 0; k < K; ++k) {
      obs.push_back(receive_pilot(gt.channels[ut][static_cast<std::size_t>(k)], pilot, sched.noise_power, pilot_rng));
      estimates.push_back(estimate_channel(obs.back(), prior_snr[static_cast<std::size_t>(k)]));
      prior_snr[static_cast<std::size_t>(k)] = measured_snr(obs.back());
    }

    const auto detections = project_and_detect(scene, detector, derive_seed(cfg.seed, kDetect, ut));
    std::vector<Detection> seen;
    std::vector<Detection> obstacles;
    for (const auto& d : detections) {
      if (d.kind == Detection::Kind::Obstacle) obstacles.push_back(d);
      else if (d.visible) seen.push_back(d);
    }
    std::vector<std::optional<Detection>> det_of_user(uK);
    if (!seen.empty()) {
      std::vector<ChannelVector> beams;
      for (const auto& d : seen) {
        const LosGeometry g = array_geometry(scene, d.pixel, d.depth);
        beams.push_back(array_response(geom, g.azimuth, g.elevation));
      }
      // Match on direction alone: unit-norm estimates keep a strong user's
      // sidelobe from outbidding a weak user's main lobe.
      std::vector<ChannelVector> directions;
      for (const auto& e : estimates) {
        const double n = e.norm();
        directions.push_back(n > 0.0 ? ChannelVector(e / n) : e);
      }
      const IdMatch match = hungarian_match(correlation_matrix(beams, directions));
      int correct = 0;
      for (std::size_t i = 0; i < seen.size(); ++i) {
        const int k = match.user_of_detection[i];
        if (k < 0) continue;
        det_of_user[static_cast<std::size_t>(k)] = seen[i];
        correct += seen[i].id == k;
      }
      emit({{"event", "identify"}, {"slot", t}, {"detections", seen.size()}, {"correct", correct}});
    }

    std::vector<ChannelEstimate> decomposed(uK);
    for (int k = 0; k < K; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      const auto& det = det_of_user[uk];
      std::optional<LosGeometry> los;
      double nominal = 0.0;
      if (det) {
        los = array_geometry(scene, det->pixel, det->depth);
        nominal = los->distance;
        trajectories[uk].push({t, det->pixel, det->depth, true});
      } else {
        const CodebookHit hit = codebook_fallback(codebook, obs[uk].y);
        nominal = hit.distance;
        trajectories[uk].push({t, {}, 0.0, false});
        emit({{"event", "codebook_fallback"}, {"slot", t}, {"user", k}, {"codeword", hit.index}});
      }
      if (!geometric(kind)) continue;
      decomposed[uk] = decompose(obs[uk], estimates[uk], los, geom);
      ParamObservation po;
      po.slot = t;
      if (decomposed[uk].has_los) po.los_gain = decomposed[uk].los_gain;
      po.nlos = extract_paths(decomposed[uk].nlos, grid, cfg.max_nlos_paths, energy_floor, nominal);
      param_history[uk].push_back(std::move(po));
      while (static_cast<int>(param_history[uk].size()) > cfg.window) param_history[uk].pop_front();
    }

    if (t == cfg.slots) break;
    const int next = t + 1;
    const auto un = static_cast<std::size_t>(next);

    // Predict slot t + 1.
    // The oracle needs no history; every other predictor waits for a full window.
    const bool window_full = kind == PredictorKind::Oracle || t >= cfg.window;
    std::vector<ChannelVector> predicted(uK);
    std::vector<int> los_hat(uK, -1);
    if (window_full) {
      switch (kind) {
        case PredictorKind::Oracle:
          for (int k = 0; k < K; ++k) {
            const auto& truth = gt.params[un][static_cast<std::size_t>(k)];
            predicted[static_cast<std::size_t>(k)] = reconstruct_channel(record_from_params(truth), geom);
            los_hat[static_cast<std::size_t>(k)] = truth.los ? 1 : 0;
          }
          break;
        case PredictorKind::LastValue:
          for (int k = 0; k < K; ++k) {
            predicted[static_cast<std::size_t>(k)] = estimates[static_cast<std::size_t>(k)];
            los_hat[static_cast<std::size_t>(k)] = det_of_user[static_cast<std::size_t>(k)] ? 1 : 0;
          }
          break;
        case PredictorKind::Zero:
          for (int k = 0; k < K; ++k) predicted[static_cast<std::size_t>(k)] = ChannelVector::Zero(geom.size());
          break;
        default: {
          std::vector<StatePrediction> states(uK);
          std::vector<PositionPrediction> positions;
          std::vector<int> position_user;
          for (int k = 0; k < K; ++k) {
            const auto uk = static_cast<std::size_t>(k);
            const auto pts = trajectories[uk].visible_points();
            if (pts.empty()) continue;
            PredictorContext uctx = ctx;
            uctx.gate = plausibility_gate(cfg.max_speed(), cfg.slot_s, camera.focal_px, pts.back().distance);
            states[uk] = predict_next_state(trajectories[uk], method, next, uctx);
            positions.push_back({k, states[uk].pixel, states[uk].distance});
            position_user.push_back(k);
            if (states[uk].fell_back)
              emit({{"event", "predictor_fallback"}, {"slot", next}, {"user", k}});
          }
          const BlockagePrediction blockage = predict_blockage(positions, obstacles);
          std::vector<int> seen_user(uK, 0);
          for (std::size_t i = 0; i < position_user.size(); ++i) {
            los_hat[static_cast<std::size_t>(position_user[i])] = blockage.los[i];
            seen_user[static_cast<std::size_t>(position_user[i])] = 1;
          }
          for (int k = 0; k < K; ++k) {
            const auto uk = static_cast<std::size_t>(k);
            const std::vector<ParamObservation> hist(param_history[uk].begin(), param_history[uk].end());
            const ParamPrediction params = predict_params(hist, next, param_settings);
            PredictionRecord rec;
            rec.user_id = k;
            rec.los = seen_user[uk] ? los_hat[uk] : 0;
            los_hat[uk] = rec.los;
            if (seen_user[uk]) {
              rec.pixel = states[uk].pixel;
              const LosGeometry g = array_geometry(scene, states[uk].pixel, std::max(states[uk].distance, 0.1));
              rec.distance = g.distance;
              rec.azimuth = g.azimuth;
              rec.elevation = g.elevation;
              rec.los_gain = params.los_gain ? *params.los_gain
                                             : Complex{large_scale_gain(g.distance, geom.carrier_hz, 0.0,
                                                                        cfg.shadow_sigma_db),
                                                       0.0};
            }
            rec.nlos = params.nlos;
            predicted[uk] = reconstruct_channel(rec, geom);
          }
          break;
        }
      }
    }

    // Schedule slot t + 1 on the policy's view of the channel.
    std::vector<SchedulerUser> users(uK);
    for (int k = 0; k < K; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      users[uk].user_id = k;
      users[uk].average_rate = average_rate[uk];
      users[uk].channel = policy == Policy::Preemptive && window_full ? predicted[uk] : estimates[uk];
    }
    const ScheduleDecision decision = schedule(users, policy, sched, table, next);
    const ThroughputReport report = realized_throughput(decision, gt.channels[un], sched, table);
    ++result.decisions;
    if (hooks.on_decision) hooks.on_decision(next, users, decision, report);
    emit({{"event", "slot"}, {"slot", next}, {"decision", to_json(decision)}, {"report", to_json(report)}});

    for (int k = 0; k < K; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      average_rate[uk] = update_average_rate(average_rate[uk], report.bits[uk], cfg.pf_alpha);
      SlotUserRow row;
      row.slot = next;
      row.user_id = k;
      if (window_full) row.nmse_db = nmse_db(gt.channels[un][uk], predicted[uk]);
      row.los_predicted = los_hat[uk];
      row.los_true = gt.params[un][uk].los ? 1 : 0;
      row.rbs = decision.allocation.user_count(k);
      row.mcs = decision.mcs[uk];
      row.bits = report.bits[uk];
      row.violation = report.violation[uk];
      result.rows.push_back(row);
    }
  }
  summarize(result);
  return result;
}

}  // namespace preempt
