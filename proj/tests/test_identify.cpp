// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "oracles.hpp"
#include "preempt/identify.hpp"

using namespace preempt;

TEST_CASE("assignment small cases") {
  Eigen::MatrixXd c(2, 2);
  c << 1, 2, 2, 1;
  const Assignment a = solve_assignment(c);
  CHECK(a.column_of_row == std::vector<int>{0, 1});
  CHECK(a.total_cost == 2.0);

  Eigen::MatrixXd row(1, 5);
  row << 4, 3, 0.5, 7, 0.9;
  CHECK(solve_assignment(row).column_of_row[0] == 2);
  CHECK_THROWS(solve_assignment(Eigen::MatrixXd::Ones(3, 2)));
}

TEST_CASE("assignment equals exhaustive search") {
  Rng rng(10);
  for (int trial = 0; trial < 300; ++trial) {
    const int rows = 1 + static_cast<int>(rng() % 6);
    const int cols = rows + static_cast<int>(rng() % (9 - rows));
    Eigen::MatrixXd c(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) c(i, j) = uniform(rng, 0.0, 10.0);
    const Assignment a = solve_assignment(c);
    std::vector<int> cols_used = a.column_of_row;
    std::sort(cols_used.begin(), cols_used.end());
    CHECK(std::adjacent_find(cols_used.begin(), cols_used.end()) == cols_used.end());
    CHECK(a.total_cost == doctest::Approx(oracle::brute_force_assignment(c)).epsilon(1e-12));
  }
}

TEST_CASE("correlation matrix basics") {
  const ArrayGeometry g;
  const ChannelVector f = array_response(g, 0.3, -0.1);
  const std::vector<ChannelVector> beams{f};
  const std::vector<ChannelVector> est{f};
  CHECK(correlation_matrix(beams, est)(0, 0) == doctest::Approx(64.0));

  // Two DFT-orthogonal directions: u differs by 1 / (nx d).
  const ChannelVector a = array_response(g, 0.0, 0.0);
  const ChannelVector b = array_response(g, std::asin(0.25), 0.0);
  const std::vector<ChannelVector> two{a, b};
  const Eigen::MatrixXd r = correlation_matrix(two, two);
  CHECK(r(0, 1) < 1e-9);
  CHECK(r(1, 0) < 1e-9);
}

TEST_CASE("noiseless separated users are identified") {
  const ArrayGeometry g;
  Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    // Three users three beamwidths apart in azimuth. Estimates carry a
    // random phase but unit magnitude, as the caller normalizes them.
    const double base = uniform(rng, -0.6, 0.2);
    std::vector<ChannelVector> beams, est;
    for (int k = 0; k < 3; ++k) {
      const double az = base + k * 0.5;
      const double el = uniform(rng, -0.3, 0.0);
      beams.push_back(array_response(g, az, el));
      est.push_back(std::polar(1.0, uniform(rng, 0, 2 * std::numbers::pi)) * array_response(g, az, el));
    }
    std::vector<int> perm{2, 0, 1};
    std::vector<ChannelVector> shuffled;
    for (int k : perm) shuffled.push_back(est[static_cast<std::size_t>(k)]);
    const Eigen::MatrixXd r = correlation_matrix(beams, shuffled);
    for (int i = 0; i < 3; ++i) {
      Eigen::Index best = 0;
      r.row(i).maxCoeff(&best);
      CHECK(perm[static_cast<std::size_t>(best)] == i);
    }
    const IdMatch m = hungarian_match(r);
    for (int i = 0; i < 3; ++i) CHECK(perm[static_cast<std::size_t>(m.user_of_detection[static_cast<std::size_t>(i)])] == i);
  }
}

TEST_CASE("spurious and empty detections stay unidentified") {
  Eigen::MatrixXd r(3, 2);
  r << 5, 1, 0, 0, 1, 4;
  const IdMatch m = hungarian_match(r);
  CHECK(m.user_of_detection == std::vector<int>{0, -1, 1});

  Eigen::MatrixXd extra(3, 2);
  extra << 5, 1, 4, 0.5, 1, 4;
  const IdMatch e = hungarian_match(extra);
  CHECK(e.user_of_detection[0] == 0);
  CHECK(e.user_of_detection[1] == -1);
  CHECK(e.user_of_detection[2] == 1);
}

TEST_CASE("permuting users permutes the match") {
  Rng rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::MatrixXd r(4, 6);
    for (int i = 0; i < 4; ++i)
      for (int k = 0; k < 6; ++k) r(i, k) = uniform(rng, 0.1, 10.0);
    std::vector<int> perm(6);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Eigen::MatrixXd p(4, 6);
    for (int k = 0; k < 6; ++k) p.col(k) = r.col(perm[static_cast<std::size_t>(k)]);
    const IdMatch a = hungarian_match(r);
    const IdMatch b = hungarian_match(p);
    for (int i = 0; i < 4; ++i)
      CHECK(perm[static_cast<std::size_t>(b.user_of_detection[static_cast<std::size_t>(i)])] ==
            a.user_of_detection[static_cast<std::size_t>(i)]);
  }
}

TEST_CASE("codebook fallback") {
  const ArrayGeometry g;
  const BeamCodebook book = BeamCodebook::grid(g, -0.6, 0.6, 16, -0.5, 0.1, 16, 3.0, 1.25, 40.0);
  REQUIRE(book.codewords.size() == 256);
  for (const auto& c : book.codewords) CHECK(c.vector.norm() == doctest::Approx(1.0));

  const auto& target = book.codewords[37];
  const CodebookHit exact = codebook_fallback(book, target.vector * Complex{0.0, 3.0});
  CHECK(exact.index == 37);
  CHECK(exact.azimuth == target.azimuth);
  CHECK(exact.distance == target.distance);

  CHECK(codebook_fallback(book, ChannelVector::Zero(64)).index == 0);
}

TEST_CASE("DFT-style codebook resolves to half a step") {
  // 16 x 16 codewords uniform in direction cosines, four times oversampled.
  const ArrayGeometry g;
  const double step = 1.0 / (g.spacing * g.nx * 4);
  BeamCodebook book;
  for (int i = 0; i < 16; ++i) {
    for (int j = 0; j < 16; ++j) {
      const double u = (i - 7.5) * step;
      const double v = (j - 7.5) * step;
      Codeword c;
      c.elevation = std::asin(v);
      c.azimuth = std::asin(u / std::cos(c.elevation));
      c.vector = array_response(g, c.azimuth, c.elevation) / 8.0;
      book.codewords.push_back(c);
    }
  }
  Rng rng(14);
  for (int trial = 0; trial < 500; ++trial) {
    const double u = uniform(rng, -7.5 * step, 7.5 * step);
    const double v = uniform(rng, -7.5 * step, 7.5 * step);
    const double el = std::asin(v);
    const double az = std::asin(u / std::cos(el));
    const CodebookHit hit = codebook_fallback(book, complex_normal(rng) * array_response(g, az, el));
    const double hu = std::sin(hit.azimuth) * std::cos(hit.elevation);
    const double hv = std::sin(hit.elevation);
    CHECK(std::abs(hu - u) <= step / 2 + 1e-12);
    CHECK(std::abs(hv - v) <= step / 2 + 1e-12);
  }
}
