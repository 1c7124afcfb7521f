// SPDX-License-Identifier: Apache-2.0

#include "preempt/identify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace preempt {

Assignment solve_assignment(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  const int m = static_cast<int>(cost.cols());
  if (n > m) throw std::invalid_argument("assignment needs rows <= cols; pad the columns");
  Assignment result;
  result.column_of_row.assign(static_cast<std::size_t>(n), -1);
  if (n == 0) return result;

  constexpr double kInf = std::numeric_limits<double>::infinity();
  // 1-based potentials; p[j] is the row matched to column j, 0 = free.
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  for (int j = 1; j <= m; ++j) {
    if (p[j] != 0) result.column_of_row[static_cast<std::size_t>(p[j] - 1)] = j - 1;
  }
  for (int i = 0; i < n; ++i) result.total_cost += cost(i, result.column_of_row[static_cast<std::size_t>(i)]);
  return result;
}

Eigen::MatrixXd correlation_matrix(std::span<const ChannelVector> beams,
                                   std::span<const ChannelVector> estimates) {
  Eigen::MatrixXd r(static_cast<Eigen::Index>(beams.size()), static_cast<Eigen::Index>(estimates.size()));
  for (std::size_t i = 0; i < beams.size(); ++i)
    for (std::size_t k = 0; k < estimates.size(); ++k)
      r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = std::abs(estimates[k].dot(beams[i]));
  return r;
}

IdMatch hungarian_match(const Eigen::MatrixXd& correlation) {
  const Eigen::Index rows = correlation.rows();
  const Eigen::Index users = correlation.cols();
  IdMatch match;
  match.user_of_detection.assign(static_cast<std::size_t>(rows), -1);

  std::vector<Eigen::Index> live;
  for (Eigen::Index i = 0; i < rows; ++i) {
    if ((correlation.row(i).array() > 0.0).any()) live.push_back(i);
  }
  if (live.empty() || users == 0) return match;

  const Eigen::Index n = static_cast<Eigen::Index>(live.size());
  Eigen::MatrixXd cost(n, users);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index k = 0; k < users; ++k)
      cost(r, k) = 1.0 / (correlation(live[static_cast<std::size_t>(r)], k) + kCorrelationEpsilon);

  // Spurious detections beyond the user count land on dummy columns.
  const Eigen::Index dummies = std::max<Eigen::Index>(0, n - users);
  Eigen::MatrixXd padded(n, users + dummies);
  padded.leftCols(users) = cost;
  if (dummies > 0) padded.rightCols(dummies).setConstant(cost.maxCoeff() * 10.0);

  const Assignment a = solve_assignment(padded);
  for (Eigen::Index r = 0; r < n; ++r) {
    const int col = a.column_of_row[static_cast<std::size_t>(r)];
    if (col < users) {
      match.user_of_detection[static_cast<std::size_t>(live[static_cast<std::size_t>(r)])] = col;
      match.total_cost += cost(r, col);
    }
  }
  return match;
}

BeamCodebook BeamCodebook::grid(const ArrayGeometry& geom, double az_min, double az_max, int n_az,
                                double el_min, double el_max, int n_el, double bs_height,
                                double user_height, double max_distance) {
  BeamCodebook book;
  const double norm = std::sqrt(static_cast<double>(geom.size()));
  for (int i = 0; i < n_az; ++i) {
    const double az = n_az == 1 ? az_min : az_min + (az_max - az_min) * i / (n_az - 1);
    for (int j = 0; j < n_el; ++j) {
      const double el = n_el == 1 ? el_min : el_min + (el_max - el_min) * j / (n_el - 1);
      Codeword c;
      c.azimuth = az;
      c.elevation = el;
      c.vector = array_response(geom, az, el) / norm;
      const double drop = bs_height - user_height;
      c.distance = (el < 0.0 && drop > 0.0) ? std::min(max_distance, drop / std::sin(-el)) : max_distance;
      book.codewords.push_back(std::move(c));
    }
  }
  return book;
}

CodebookHit codebook_fallback(const BeamCodebook& codebook, const ChannelVector& y) {
  if (codebook.codewords.empty()) throw std::invalid_argument("empty beam codebook");
  CodebookHit hit;
  double best = -1.0;
  for (std::size_t i = 0; i < codebook.codewords.size(); ++i) {
    const double p = std::norm(codebook.codewords[i].vector.dot(y));
    if (p > best) {
      best = p;
      hit.index = static_cast<int>(i);
    }
  }
  const auto& c = codebook.codewords[static_cast<std::size_t>(hit.index)];
  hit.azimuth = c.azimuth;
  hit.elevation = c.elevation;
  hit.distance = c.distance;
  return hit;
}

}  // namespace preempt
