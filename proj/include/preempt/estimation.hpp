// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <complex>
#include <filesystem>
#include <optional>
#include <vector>

#include "preempt/channel.hpp"
#include "preempt/rng.hpp"

namespace preempt {

struct PilotObservation {
  ChannelVector y;
  Complex pilot{1.0, 0.0};
  double noise_power = 0.0;
};

/// y = h s + n, n ~ CN(0, noise_power I).
PilotObservation receive_pilot(const ChannelVector& h, Complex pilot, double noise_power, Rng& rng);

/// Scaled LS with a scalar Wiener shrink gamma / (1 + gamma). An infinite
/// prior SNR gives plain LS.
ChannelVector estimate_channel(const PilotObservation& obs, double prior_snr);

/// Per-antenna SNR implied by a pilot, floored at zero.
double measured_snr(const PilotObservation& obs);

/// Large-scale LoS geometry taken from the camera (or the codebook).
struct LosGeometry {
  double distance = 1.0;
  double azimuth = 0.0;
  double elevation = 0.0;
};

/// LS estimate of the LoS path gain given its geometry:
/// e^{j 2 pi f r / c} a^+ y s* / |s|^2.
Complex ls_los_gain(const PilotObservation& obs, const LosGeometry& los, const ArrayGeometry& geom);

struct ChannelEstimate {
  ChannelVector full;
  ChannelVector los;
  ChannelVector nlos;
  Complex los_gain{0.0, 0.0};
  bool has_los = false;
};

/// Split an estimate into LoS and NLoS parts. Without LoS geometry the
/// whole estimate is attributed to NLoS. nlos = full - los by construction.
ChannelEstimate decompose(const PilotObservation& obs, const ChannelVector& h_hat,
                          const std::optional<LosGeometry>& los, const ArrayGeometry& geom);

/// Gaussian tail probability.
double q_function(double x);

/// Square M-QAM symbol error rate at per-symbol SNR (Es/N0) with
/// M = 2^bits. Throws std::domain_error on negative SNR or unsupported bits.
double ser_from_snr(double snr, int bits);

struct McsEntry {
  int index = 0;
  int bits = 2;
  double spectral_efficiency = 0.0;  // bits per resource element
};

class McsTable {
 public:
  McsTable() = default;
  explicit McsTable(std::vector<McsEntry> entries);

  /// 256-QAM table (indices 0..27).
  static McsTable nr_256qam();
  /// CSV with header m,bits,spectral_efficiency.
  static McsTable load_csv(const std::filesystem::path& path);

  const McsEntry& at(int m) const { return entries_.at(static_cast<std::size_t>(m)); }
  int top_index() const { return static_cast<int>(entries_.size()) - 1; }
  std::size_t size() const { return entries_.size(); }
  const std::vector<McsEntry>& entries() const { return entries_; }

  /// Modulation bits for an index of the 256-QAM order table.
  static int expected_bits(int m);

 private:
  std::vector<McsEntry> entries_;
};

/// ceil(rate / (f(m) N_RE N_SDM)); nullopt when f(m) is zero.
std::optional<int> min_rb_count(double rate_min_bits, int mcs, const McsTable& table, int n_re,
                                int n_sdm = 1);

/// Steering vectors on a grid of direction cosines (u = sin(az) cos(el),
/// v = sin(el)), oversampled relative to the array resolution.
class AngularGrid {
 public:
  explicit AngularGrid(const ArrayGeometry& geom, int oversampling = 4);

  const ArrayGeometry& geometry() const { return geom_; }
  const Eigen::MatrixXcd& atoms() const { return atoms_; }
  double step() const { return step_; }
  std::pair<double, double> cosines(Eigen::Index i) const { return cosines_[static_cast<std::size_t>(i)]; }

 private:
  ArrayGeometry geom_;
  double step_ = 0.0;
  std::vector<std::pair<double, double>> cosines_;
  Eigen::MatrixXcd atoms_;
};

ChannelVector steering_from_cosines(const ArrayGeometry& geom, double u, double v);

/// Orthogonal matching pursuit of an NLoS residual over the grid with a
/// local pattern search per atom. Atoms whose energy |c|^2 N falls below
/// energy_floor end the search. Distances are set to nominal_distance with
/// the propagation phase folded back into the gain.
std::vector<PathParams> extract_paths(const ChannelVector& residual, const AngularGrid& grid,
                                      int max_paths, double energy_floor, double nominal_distance);

}  // namespace preempt
