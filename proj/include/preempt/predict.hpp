// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <deque>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "preempt/channel.hpp"
#include "preempt/endpoint.hpp"
#include "preempt/kalman.hpp"
#include "preempt/prompt.hpp"
#include "preempt/scene.hpp"

namespace preempt {

struct TrajectoryPoint {
  int slot = 0;
  Pixel pixel;
  double distance = 0.0;
  bool visible = false;  // pixel and distance are meaningful only when set
};

/// Ring buffer of a user's most recent observations, slots strictly
/// increasing, at most capacity entries.
class Trajectory {
 public:
  explicit Trajectory(int user_id = 0, std::size_t capacity = 3);

  /// Throws std::invalid_argument if slot does not exceed the last one.
  void push(const TrajectoryPoint& point);

  int user_id() const { return user_id_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const std::deque<TrajectoryPoint>& points() const { return points_; }
  std::vector<TrajectoryPoint> visible_points() const;
  int last_slot() const { return points_.empty() ? -1 : points_.back().slot; }

 private:
  int user_id_;
  std::size_t capacity_;
  std::deque<TrajectoryPoint> points_;
};

enum class PredictMethod { Linear, Kalman, External };
enum class MethodUsed { Linear, Kalman, External, ExternalRetry, Hold };

const char* to_string(PredictMethod method);
const char* to_string(MethodUsed method);
std::optional<PredictMethod> parse_predict_method(std::string_view name);

/// Largest believable one-slot movement of a prediction.
struct PlausibilityGate {
  double pixels = 1e300;
  double meters = 1e300;
};

/// 3 v_max tau in meters, mapped to pixels at the given range.
PlausibilityGate plausibility_gate(double max_speed, double slot_s, double focal_px, double distance);

struct PredictorContext {
  PredictionEndpoint* endpoint = nullptr;
  PlausibilityGate gate;
  SageHusaFilter::Params kalman;
};

struct StatePrediction {
  Pixel pixel;
  double distance = 0.0;
  MethodUsed pixel_method = MethodUsed::Hold;
  MethodUsed distance_method = MethodUsed::Hold;
  bool degraded = false;     // not enough history for the requested method
  bool fell_back = false;    // external endpoint failed or answered implausibly
};

/// Next-slot pixel and distance at target_slot. Never throws for lack of
/// history: with no visible point the result is a degraded hold of zeros.
StatePrediction predict_next_state(const Trajectory& traj, PredictMethod method, int target_slot,
                                   const PredictorContext& ctx = {});

/// Canonical prompt over the visible history, stamped with the next slot.
PromptRecord build_prompt(const Trajectory& traj, PromptKind kind);

/// Which obstacles each predicted user pixel falls inside.
struct OverlapSet {
  std::vector<std::pair<int, int>> pairs;  // (user id, obstacle id)
};

struct PositionPrediction {
  int user_id = 0;
  Pixel pixel;
  double distance = 0.0;
};

struct BlockagePrediction {
  std::vector<int> los;  // per input user, 1 = LoS predicted
  OverlapSet overlaps;
};

/// A user overlapping an obstacle bbox is blocked iff it is not strictly
/// in front of that obstacle. Non-obstacle detections are ignored.
BlockagePrediction predict_blockage(std::span<const PositionPrediction> users,
                                    std::span<const Detection> obstacles);

/// Least-squares complex AR forecast steps ahead of the last sample. The
/// order shrinks until the fit is overdetermined and full rank; forecasts
/// that blow up fall back to a contracting order-1 fit, then to holding.
Complex ar_predict(std::span<const Complex> series, int order, int steps = 1);

struct ScoredPath {
  PathParams path;
  double score = 1.0;  // predicted power over the strongest predicted path
};

/// Decomposed channel parameters seen at one slot.
struct ParamObservation {
  int slot = 0;
  std::optional<Complex> los_gain;
  std::vector<PathParams> nlos;
};

struct ParamSettings {
  int order = 2;
  int max_paths = 3;
  double path_threshold_db = 20.0;
  double association_gate_rad = 5.0 * 3.14159265358979323846 / 180.0;
};

struct ParamPrediction {
  std::optional<Complex> los_gain;
  std::vector<ScoredPath> nlos;  // strongest first
};

/// LoS gain by AR over the slots where it was seen; NLoS paths associated
/// across slots by nearest angle, gains by AR, geometry extrapolated.
ParamPrediction predict_params(std::span<const ParamObservation> history, int target_slot,
                               const ParamSettings& settings = {});

struct PredictionRecord {
  int user_id = 0;
  Pixel pixel;
  double azimuth = 0.0;  // array frame
  double elevation = 0.0;
  double distance = 1.0;
  int los = 1;
  Complex los_gain{0.0, 0.0};
  std::vector<ScoredPath> nlos;
};

ChannelVector reconstruct_channel(const PredictionRecord& prediction, const ArrayGeometry& geom);

/// The record that reproduces a known parameter set exactly.
PredictionRecord record_from_params(const ChannelParams& params);

/// sum |d|^2 + lambda sum |d|; throws std::invalid_argument on size mismatch.
double regression_loss(std::span<const double> truth, std::span<const double> predicted, double lambda);

/// (Re, Im) of a gain.
std::vector<double> flatten_gain(Complex gain);

/// (Re, Im, az, el, r) per path, zero padded to max_paths.
std::vector<double> flatten_nlos(std::span<const PathParams> paths, int max_paths);

struct PredictionLosses {
  double los = 0.0;
  double nlos = 0.0;
};

PredictionLosses prediction_losses(const ChannelParams& truth, const PredictionRecord& predicted,
                                   int max_paths, double lambda);

/// 10 log10(|h - h_hat|^2 / |h|^2); nullopt when h is zero, -inf when exact.
std::optional<double> nmse_db(const ChannelVector& h, const ChannelVector& h_hat);

}  // namespace preempt
