// SPDX-License-Identifier: Apache-2.0
//
// Reference computations shared by the unit tests and the acceptance run.
// None of them call into the code they check.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "preempt/estimation.hpp"
#include "preempt/scheduler.hpp"

namespace oracle {

/// Gray code of a PAM level index.
inline int gray(int i) { return i ^ (i >> 1); }

/// Symbol error rate of Gray-mapped square 2^bits-QAM over AWGN at Es/N0
/// = snr, by simulation. Symbols are drawn as label pairs, mapped through
/// the Gray code to amplitude levels, and detected by nearest level.
inline double qam_ser_monte_carlo(int bits, double snr, long symbols, std::uint64_t seed) {
  const int side = 1 << (bits / 2);
  // Levels -(side-1), ..., side-1 in steps of 2; average energy per symbol
  // of the 2-D constellation is 2 (side^2 - 1) / 3.
  const double es = 2.0 * (side * side - 1) / 3.0;
  const double sigma = std::sqrt(es / snr / 2.0);
  std::vector<int> level_of_label(static_cast<std::size_t>(side));
  for (int i = 0; i < side; ++i) level_of_label[static_cast<std::size_t>(gray(i))] = 2 * i - (side - 1);

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> label(0, side - 1);
  std::normal_distribution<double> noise(0.0, sigma);
  auto detect = [&](double r) {
    const int i = static_cast<int>(std::lround((r + (side - 1)) / 2.0));
    return gray(std::clamp(i, 0, side - 1));
  };
  long errors = 0;
  for (long s = 0; s < symbols; ++s) {
    const int li = label(rng);
    const int lq = label(rng);
    const double ri = level_of_label[static_cast<std::size_t>(li)] + noise(rng);
    const double rq = level_of_label[static_cast<std::size_t>(lq)] + noise(rng);
    if (detect(ri) != li || detect(rq) != lq) ++errors;
  }
  return static_cast<double>(errors) / static_cast<double>(symbols);
}

/// Minimum total cost over every injective row -> column map.
inline double brute_force_assignment(const Eigen::MatrixXd& cost) {
  const int rows = static_cast<int>(cost.rows());
  const int cols = static_cast<int>(cost.cols());
  std::vector<char> used(static_cast<std::size_t>(cols), 0);
  double best = std::numeric_limits<double>::infinity();
  auto rec = [&](auto&& self, int r, double acc) -> void {
    if (r == rows) {
      best = std::min(best, acc);
      return;
    }
    for (int c = 0; c < cols; ++c) {
      if (used[static_cast<std::size_t>(c)]) continue;
      used[static_cast<std::size_t>(c)] = 1;
      self(self, r + 1, acc + cost(r, c));
      used[static_cast<std::size_t>(c)] = 0;
    }
  };
  rec(rec, 0, 0.0);
  return best;
}

/// Constraint check of one scheduling decision. Returns the list of
/// violated rules, empty when the decision is valid.
///   rate:  each admitted user of a rate-enforcing policy holds at least its
///          minimum RB count
///   group: no RB carries more users than min(antennas, group cap)
///   mcs:   a user holds exactly one MCS index iff it holds RBs
///   ser:   the chosen MCS meets the SER target at the decision SINR
/// When decision-time channels are supplied, the decision SINR is also
/// recomputed from the precoders.
inline std::vector<std::string> validate_decision(const preempt::ScheduleDecision& d,
                                                  const preempt::SchedulerConfig& cfg,
                                                  const preempt::McsTable& table, int antennas,
                                                  std::span<const preempt::ChannelVector> channels = {}) {
  std::vector<std::string> bad;
  const auto& x = d.allocation;
  const int K = x.users();
  const int B = x.rbs();
  const int cap = std::min(antennas, cfg.max_group);
  std::vector<int> held(static_cast<std::size_t>(K), 0);
  std::vector<double> worst(static_cast<std::size_t>(K), std::numeric_limits<double>::infinity());

  for (int b = 0; b < B; ++b) {
    std::vector<int> group;
    for (int k = 0; k < K; ++k)
      if (x.at(b, k)) group.push_back(k);
    for (int k : group) ++held[static_cast<std::size_t>(k)];
    if (static_cast<int>(group.size()) > cap) bad.push_back("group: RB " + std::to_string(b) + " overloaded");
    if (group.empty() || channels.empty()) continue;
    const auto& w = d.precoders[static_cast<std::size_t>(b)];
    if (w.cols() != static_cast<Eigen::Index>(group.size())) {
      bad.push_back("precoder: RB " + std::to_string(b) + " has wrong column count");
      continue;
    }
    const double p = cfg.tx_power / static_cast<double>(group.size());
    for (std::size_t i = 0; i < group.size(); ++i) {
      const auto& h = channels[static_cast<std::size_t>(group[i])];
      double signal = 0.0;
      double leak = 0.0;
      for (std::size_t j = 0; j < group.size(); ++j) {
        std::complex<double> g{0.0, 0.0};
        for (Eigen::Index n = 0; n < h.size(); ++n) g += std::conj(h(n)) * w(n, static_cast<Eigen::Index>(j));
        (i == j ? signal : leak) += std::norm(g);
      }
      const double sinr = p * signal / (cfg.noise_power + p * leak);
      auto& slot = worst[static_cast<std::size_t>(group[i])];
      slot = std::min(slot, sinr);
    }
  }

  for (int k = 0; k < K; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    const std::string who = "user " + std::to_string(d.user_ids[ku]);
    const int m = d.mcs[ku];
    if (held[ku] > 0 && (m < 0 || m > table.top_index())) bad.push_back("mcs: " + who + " holds RBs without an MCS");
    if (held[ku] == 0 && m != -1) bad.push_back("mcs: " + who + " has an MCS but no RBs");
    if (d.rate_enforced && d.admitted[ku] && held[ku] < d.min_rbs[ku]) bad.push_back("rate: " + who + " below minimum");
    if (d.rate_enforced && held[ku] > 0 && !d.admitted[ku]) bad.push_back("rate: " + who + " served but not admitted");
    if (held[ku] == 0 || m < 0 || m > table.top_index()) continue;
    const int bits = table.at(m).bits;
    const int side = 1 << (bits / 2);
    // Square-QAM SER written out from the Gaussian tail, independent of the library.
    auto ser = [&](double snr) {
      const double q = 0.5 * std::erfc(std::sqrt(3.0 * snr / (side * side - 1.0)) / std::sqrt(2.0));
      const double p = 2.0 * (side - 1.0) / side * q;
      return 1.0 - (1.0 - p) * (1.0 - p);
    };
    if (ser(d.decision_sinr[ku]) > cfg.ser_max * (1.0 + 1e-12)) bad.push_back("ser: " + who + " exceeds target");
    if (!channels.empty()) {
      const double w = worst[ku];
      if (std::abs(w - d.decision_sinr[ku]) > 1e-9 * std::max(1.0, w)) bad.push_back("sinr: " + who + " mismatch");
    }
  }
  return bad;
}

}  // namespace oracle
