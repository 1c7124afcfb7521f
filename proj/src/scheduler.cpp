// SPDX-License-Identifier: Apache-2.0

#include "preempt/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <Eigen/QR>

namespace preempt {

const char* to_string(Policy policy) {
  switch (policy) {
    case Policy::Preemptive: return "preemptive";
    case Policy::PfReactive: return "pf_reactive";
    case Policy::RoundRobin: return "round_robin";
    case Policy::MaxSnr: return "max_snr";
  }
  return "?";
}

std::optional<Policy> parse_policy(std::string_view name) {
  if (name == "preemptive") return Policy::Preemptive;
  if (name == "pf_reactive") return Policy::PfReactive;
  if (name == "round_robin") return Policy::RoundRobin;
  if (name == "max_snr") return Policy::MaxSnr;
  return std::nullopt;
}

double pf_metric(double predicted_rate, double average_rate) {
  if (!(average_rate > 0.0)) throw std::domain_error("average rate must be positive");
  return predicted_rate / average_rate;
}

double update_average_rate(double average, double realized, double alpha, double floor) {
  return std::max(floor, (1.0 - alpha) * average + alpha * realized);
}

McsChoice select_mcs(double snr, double ser_max, const McsTable& table) {
  if (!(snr >= 0.0)) snr = 0.0;
  for (int m = table.top_index(); m >= 0; --m) {
    if (ser_from_snr(snr, table.at(m).bits) <= ser_max) return {m, true};
  }
  return {0, false};
}

std::optional<Eigen::MatrixXcd> zf_precoders(const Eigen::MatrixXcd& h) {
  if (h.cols() == 0) return Eigen::MatrixXcd(h.rows(), 0);
  if (h.cols() > h.rows()) return std::nullopt;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXcd> qr(h);
  qr.setThreshold(1e-10);
  if (qr.rank() < h.cols()) return std::nullopt;
  const Eigen::MatrixXcd gram = h.adjoint() * h;
  Eigen::MatrixXcd w = h * gram.ldlt().solve(Eigen::MatrixXcd::Identity(h.cols(), h.cols()));
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    const double n = w.col(j).norm();
    if (!(n > 0.0) || !std::isfinite(n)) return std::nullopt;
    w.col(j) /= n;
  }
  return w;
}

std::vector<double> post_precoding_sinr(const Eigen::MatrixXcd& h, const Eigen::MatrixXcd& w,
                                        double power_per_user, double noise_power) {
  if (h.cols() != w.cols() || h.rows() != w.rows()) throw std::invalid_argument("channel and precoder shapes differ");
  const Eigen::MatrixXcd gains = h.adjoint() * w;  // (k, j) = h_k^H w_j
  std::vector<double> out(static_cast<std::size_t>(h.cols()));
  for (Eigen::Index k = 0; k < h.cols(); ++k) {
    double interference = 0.0;
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      if (j != k) interference += std::norm(gains(k, j));
    out[static_cast<std::size_t>(k)] =
        power_per_user * std::norm(gains(k, k)) / (noise_power + power_per_user * interference);
  }
  return out;
}

int RbAllocation::rb_load(int b) const {
  int n = 0;
  for (int k = 0; k < users_; ++k) n += at(b, k);
  return n;
}

int RbAllocation::user_count(int k) const {
  int n = 0;
  for (int b = 0; b < rbs_; ++b) n += at(b, k);
  return n;
}

std::vector<int> RbAllocation::users_on(int b) const {
  std::vector<int> out;
  for (int k = 0; k < users_; ++k)
    if (at(b, k)) out.push_back(k);
  return out;
}

namespace {

// Put user k on `count` distinct RBs with spare room, least loaded first,
// ties to the lowest index. Returns how many were placed.
int place_on_least_loaded(RbAllocation& x, int k, int count, int cap) {
  std::vector<std::pair<int, int>> cand;  // (load, b)
  for (int b = 0; b < x.rbs(); ++b) {
    const int load = x.rb_load(b);
    if (load < cap && !x.at(b, k)) cand.emplace_back(load, b);
  }
  std::sort(cand.begin(), cand.end());
  const int n = std::min(count, static_cast<int>(cand.size()));
  for (int i = 0; i < n; ++i) x.set(cand[static_cast<std::size_t>(i)].second, k, true);
  return n;
}

void fill_all_free(RbAllocation& x, int k, int cap) {
  for (int b = 0; b < x.rbs(); ++b)
    if (!x.at(b, k) && x.rb_load(b) < cap) x.set(b, k, true);
}

void remove_user(RbAllocation& x, int k) {
  for (int b = 0; b < x.rbs(); ++b) x.set(b, k, false);
}

Eigen::MatrixXcd stack(std::span<const ChannelVector> channels, const std::vector<int>& group, Eigen::Index n) {
  Eigen::MatrixXcd h(n, static_cast<Eigen::Index>(group.size()));
  for (std::size_t j = 0; j < group.size(); ++j) h.col(static_cast<Eigen::Index>(j)) = channels[static_cast<std::size_t>(group[j])];
  return h;
}

}  // namespace

ScheduleDecision schedule(std::span<const SchedulerUser> users, Policy policy, const SchedulerConfig& config,
                          const McsTable& table, int slot) {
  const int K = static_cast<int>(users.size());
  const int B = config.num_rbs;
  const int G = config.max_group;
  if (B <= 0 || G <= 0) throw std::invalid_argument("scheduler needs positive RB count and group size");

  ScheduleDecision d;
  d.policy = policy;
  d.rate_enforced = enforces_rate(policy);
  d.allocation = RbAllocation(B, K);
  d.user_ids.resize(static_cast<std::size_t>(K));
  d.mcs.assign(static_cast<std::size_t>(K), -1);
  d.admitted.assign(static_cast<std::size_t>(K), 0);
  d.min_rbs.assign(static_cast<std::size_t>(K), 0);
  d.pf.assign(static_cast<std::size_t>(K), 0.0);
  d.decision_sinr.assign(static_cast<std::size_t>(K), 0.0);
  d.precoders.assign(static_cast<std::size_t>(B), Eigen::MatrixXcd());
  if (K == 0) return d;

  const Eigen::Index n_ant = users[0].channel.size();
  std::vector<ChannelVector> channels;
  channels.reserve(users.size());
  for (const auto& u : users) {
    if (u.channel.size() != n_ant) throw std::invalid_argument("channels differ in length");
    channels.push_back(u.channel);
  }

  // Nominal per-user SNR assumes a full group sharing the RB power.
  std::vector<double> snr(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    d.user_ids[ku] = users[ku].user_id;
    snr[ku] = config.tx_power / G * channels[ku].squaredNorm() / config.noise_power;
    const McsChoice c = select_mcs(snr[ku], config.ser_max, table);
    if (!c.feasible) continue;
    const auto need = min_rb_count(config.rate_min_bits, c.mcs, table, config.n_re, config.n_sdm);
    if (!need) continue;
    const double rate = table.at(c.mcs).spectral_efficiency * config.n_re * config.n_sdm;
    d.pf[ku] = pf_metric(rate, users[ku].average_rate);
    d.min_rbs[ku] = *need;
    d.admitted[ku] = 1;
  }

  std::vector<int> by_pf(static_cast<std::size_t>(K));
  std::iota(by_pf.begin(), by_pf.end(), 0);
  std::stable_sort(by_pf.begin(), by_pf.end(),
                   [&](int a, int b) { return d.pf[static_cast<std::size_t>(a)] > d.pf[static_cast<std::size_t>(b)]; });
  auto admitted_in = [&](const std::vector<int>& order) {
    std::vector<int> out;
    for (int k : order)
      if (d.admitted[static_cast<std::size_t>(k)]) out.push_back(k);
    return out;
  };
  auto unadmit = [&](int k) {
    d.admitted[static_cast<std::size_t>(k)] = 0;
    d.min_rbs[static_cast<std::size_t>(k)] = 0;
    d.mcs[static_cast<std::size_t>(k)] = -1;
    remove_user(d.allocation, k);
  };

  RbAllocation& x = d.allocation;
  switch (policy) {
    case Policy::Preemptive:
    case Policy::PfReactive: {
      for (int k : admitted_in(by_pf))
        if (d.min_rbs[static_cast<std::size_t>(k)] > B) unadmit(k);
      auto order = admitted_in(by_pf);
      long demand = 0;
      for (int k : order) demand += d.min_rbs[static_cast<std::size_t>(k)];
      while (!order.empty() && demand > static_cast<long>(B) * G) {
        demand -= d.min_rbs[static_cast<std::size_t>(order.back())];
        unadmit(order.back());
        order.pop_back();
      }
      for (int k : order) {
        const int need = d.min_rbs[static_cast<std::size_t>(k)];
        if (place_on_least_loaded(x, k, need, G) < need) unadmit(k);
      }
      for (int k : admitted_in(by_pf)) fill_all_free(x, k, G);
      break;
    }
    case Policy::RoundRobin: {
      std::vector<int> order(static_cast<std::size_t>(K));
      std::iota(order.begin(), order.end(), 0);
      order = admitted_in(order);
      const int n = static_cast<int>(order.size());
      if (n == 0) break;
      std::rotate(order.begin(), order.begin() + (slot % n + n) % n, order.end());
      const int slots = B * std::min(G, n);
      for (int i = 0; i < n; ++i) {
        const int share = slots / n + (i < slots % n ? 1 : 0);
        place_on_least_loaded(x, order[static_cast<std::size_t>(i)], share, G);
      }
      break;
    }
    case Policy::MaxSnr: {
      std::vector<int> by_snr(static_cast<std::size_t>(K));
      std::iota(by_snr.begin(), by_snr.end(), 0);
      std::stable_sort(by_snr.begin(), by_snr.end(),
                       [&](int a, int b) { return snr[static_cast<std::size_t>(a)] > snr[static_cast<std::size_t>(b)]; });
      for (int k : admitted_in(by_snr)) fill_all_free(x, k, G);
      break;
    }
  }

  // Precode, then settle MCS on the decision-time SINR. Dropping a user
  // changes the groups it shared, so repeat until nothing moves.
  for (bool changed = true; changed;) {
    changed = false;
    for (int b = 0; b < B; ++b) {
      auto group = x.users_on(b);
      for (;;) {
        auto w = zf_precoders(stack(channels, group, n_ant));
        if (w) {
          d.precoders[static_cast<std::size_t>(b)] = std::move(*w);
          break;
        }
        const auto worst = std::min_element(group.begin(), group.end(), [&](int a, int c) {
          return d.pf[static_cast<std::size_t>(a)] < d.pf[static_cast<std::size_t>(c)];
        });
        x.set(b, *worst, false);
        group.erase(worst);
      }
    }
    if (d.rate_enforced) {
      for (int k = 0; k < K; ++k) {
        if (d.admitted[static_cast<std::size_t>(k)] && x.user_count(k) < d.min_rbs[static_cast<std::size_t>(k)]) {
          unadmit(k);
          changed = true;
        }
      }
      if (changed) continue;
    }

    std::vector<double> worst(static_cast<std::size_t>(K), std::numeric_limits<double>::infinity());
    for (int b = 0; b < B; ++b) {
      const auto group = x.users_on(b);
      if (group.empty()) continue;
      const auto& w = d.precoders[static_cast<std::size_t>(b)];
      const auto s = post_precoding_sinr(stack(channels, group, n_ant), w,
                                         config.tx_power / static_cast<double>(group.size()), config.noise_power);
      for (std::size_t j = 0; j < group.size(); ++j)
        worst[static_cast<std::size_t>(group[j])] = std::min(worst[static_cast<std::size_t>(group[j])], s[j]);
    }
    for (int k = 0; k < K; ++k) {
      const auto ku = static_cast<std::size_t>(k);
      if (x.user_count(k) == 0) {
        d.mcs[ku] = -1;
        d.decision_sinr[ku] = 0.0;
        continue;
      }
      const McsChoice c = select_mcs(worst[ku], config.ser_max, table);
      if (!c.feasible) {
        unadmit(k);
        changed = true;
        continue;
      }
      d.mcs[ku] = c.mcs;
      d.decision_sinr[ku] = worst[ku];
    }
  }
  return d;
}

ThroughputReport realized_throughput(const ScheduleDecision& decision, std::span<const ChannelVector> channels,
                                     const SchedulerConfig& config, const McsTable& table) {
  const auto& x = decision.allocation;
  const int K = x.users();
  if (static_cast<int>(channels.size()) != K) throw std::invalid_argument("one channel per scheduled user expected");

  ThroughputReport r;
  r.user_ids = decision.user_ids;
  r.bits.assign(static_cast<std::size_t>(K), 0.0);
  r.ser.assign(static_cast<std::size_t>(K), 0.0);
  r.violation.assign(static_cast<std::size_t>(K), 0);
  if (K == 0) return r;
  const Eigen::Index n_ant = channels[0].size();

  for (int b = 0; b < x.rbs(); ++b) {
    const auto group = x.users_on(b);
    if (group.empty()) continue;
    const auto s = post_precoding_sinr(stack(channels, group, n_ant), decision.precoders[static_cast<std::size_t>(b)],
                                       config.tx_power / static_cast<double>(group.size()), config.noise_power);
    for (std::size_t j = 0; j < group.size(); ++j) {
      const auto k = static_cast<std::size_t>(group[j]);
      const McsEntry& e = table.at(decision.mcs[k]);
      const double ser = ser_from_snr(std::max(0.0, s[j]), e.bits);
      r.ser[k] = std::max(r.ser[k], ser);
      r.bits[k] += std::pow(1.0 - ser, config.n_symbols) * e.spectral_efficiency * config.n_re * config.n_sdm;
    }
  }
  for (int k = 0; k < K; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    if (x.user_count(k) > 0 && r.ser[ku] > config.ser_max) {
      r.violation[ku] = 1;
      ++r.violation_count;
    }
    r.total += r.bits[ku];
  }
  return r;
}

nlohmann::json to_json(const ScheduleDecision& decision) {
  nlohmann::json users = nlohmann::json::array();
  for (std::size_t k = 0; k < decision.user_ids.size(); ++k) {
    users.push_back({{"id", decision.user_ids[k]},
                     {"admitted", decision.admitted[k] != 0},
                     {"min_rbs", decision.min_rbs[k]},
                     {"rbs", decision.allocation.user_count(static_cast<int>(k))},
                     {"mcs", decision.mcs[k]},
                     {"pf", decision.pf[k]},
                     {"sinr", decision.decision_sinr[k]}});
  }
  return {{"policy", to_string(decision.policy)}, {"rate_enforced", decision.rate_enforced}, {"users", users}};
}

nlohmann::json to_json(const ThroughputReport& report) {
  nlohmann::json users = nlohmann::json::array();
  for (std::size_t k = 0; k < report.user_ids.size(); ++k) {
    users.push_back({{"id", report.user_ids[k]},
                     {"bits", report.bits[k]},
                     {"ser", report.ser[k]},
                     {"violation", report.violation[k] != 0}});
  }
  return {{"total_bits", report.total}, {"violations", report.violation_count}, {"users", users}};
}

}  // namespace preempt
