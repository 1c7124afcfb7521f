// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "preempt/channel.hpp"
#include "preempt/estimation.hpp"

namespace preempt {

/// Rectangular min-cost assignment (rows <= cols) by the shortest
/// augmenting path form of the Hungarian method, O(rows^2 cols).
/// Returns the column chosen for each row.
struct Assignment {
  std::vector<int> column_of_row;
  double total_cost = 0.0;
};

Assignment solve_assignment(const Eigen::MatrixXd& cost);

/// R(i, k) = |h_k^H f_i| for detection beams f_i and channel estimates h_k.
Eigen::MatrixXd correlation_matrix(std::span<const ChannelVector> beams,
                                   std::span<const ChannelVector> estimates);

inline constexpr double kCorrelationEpsilon = 1e-12;

/// Result of matching detections to user ids. user_of_detection is -1 for a
/// detection left on a dummy column (all-zero correlation row, or more
/// detections than users).
struct IdMatch {
  std::vector<int> user_of_detection;
  double total_cost = 0.0;
};

/// Minimum total inverse-correlation matching of detections to users.
IdMatch hungarian_match(const Eigen::MatrixXd& correlation);

struct Codeword {
  ChannelVector vector;  // unit norm
  double azimuth = 0.0;
  double elevation = 0.0;
  double distance = 0.0;  // where the beam meets the nominal user-height plane
};

struct BeamCodebook {
  std::vector<Codeword> codewords;

  /// Uniform az x el grid. Nominal distance is the range at which the beam
  /// axis reaches user_height from an array mounted at bs_height, capped
  /// at max_distance.
  static BeamCodebook grid(const ArrayGeometry& geom, double az_min, double az_max, int n_az,
                           double el_min, double el_max, int n_el, double bs_height,
                           double user_height, double max_distance);
};

struct CodebookHit {
  int index = 0;
  double azimuth = 0.0;
  double elevation = 0.0;
  double distance = 0.0;
};

/// Codeword maximizing |c^H y|^2; ties go to the lowest index.
CodebookHit codebook_fallback(const BeamCodebook& codebook, const ChannelVector& y);

}  // namespace preempt
