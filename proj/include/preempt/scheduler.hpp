// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "preempt/channel.hpp"
#include "preempt/estimation.hpp"

namespace preempt {

enum class Policy { Preemptive, PfReactive, RoundRobin, MaxSnr };

const char* to_string(Policy policy);
std::optional<Policy> parse_policy(std::string_view name);

/// Rate-aware policies enforce every admitted user's minimum RB count.
inline bool enforces_rate(Policy p) { return p == Policy::Preemptive || p == Policy::PfReactive; }

struct SchedulerConfig {
  int num_rbs = 70;
  int max_group = 4;          // users per RB, at most the antenna count
  double tx_power = 1.0;      // linear, same units as noise_power
  double noise_power = 1.0;
  double ser_max = 0.1;
  double rate_min_bits = 1000.0;
  int n_re = 168;
  int n_symbols = 14;
  int n_sdm = 1;
};

double pf_metric(double predicted_rate, double average_rate);

/// R <- (1 - alpha) R + alpha realized, floored.
double update_average_rate(double average, double realized, double alpha = 0.1, double floor = 1.0);

struct McsChoice {
  int mcs = 0;
  bool feasible = false;
};

/// Largest index whose SER at this SNR stays within ser_max.
McsChoice select_mcs(double snr, double ser_max, const McsTable& table);

/// Zero-forcing precoders for the channel columns of h (N x G): normalized
/// columns of the pseudo-inverse. nullopt when h lacks full column rank.
std::optional<Eigen::MatrixXcd> zf_precoders(const Eigen::MatrixXcd& h);

/// SINR of each column user of h under precoders w with power_per_user on
/// every stream; interference from the other streams is included.
std::vector<double> post_precoding_sinr(const Eigen::MatrixXcd& h, const Eigen::MatrixXcd& w,
                                        double power_per_user, double noise_power);

/// Binary B x K allocation matrix.
class RbAllocation {
 public:
  RbAllocation() = default;
  RbAllocation(int rbs, int users) : rbs_(rbs), users_(users), x_(static_cast<std::size_t>(rbs * users), 0) {}

  int rbs() const { return rbs_; }
  int users() const { return users_; }
  bool at(int b, int k) const { return x_[index(b, k)] != 0; }
  void set(int b, int k, bool v) { x_[index(b, k)] = v ? 1 : 0; }
  int rb_load(int b) const;
  int user_count(int k) const;
  std::vector<int> users_on(int b) const;

 private:
  std::size_t index(int b, int k) const { return static_cast<std::size_t>(b * users_ + k); }
  int rbs_ = 0;
  int users_ = 0;
  std::vector<std::uint8_t> x_;
};

struct SchedulerUser {
  int user_id = 0;
  ChannelVector channel;  // the policy's view: predicted or stale
  double average_rate = 1.0;
};

struct ScheduleDecision {
  Policy policy = Policy::Preemptive;
  RbAllocation allocation;
  std::vector<int> user_ids;
  std::vector<int> mcs;              // -1 when not scheduled
  std::vector<int> admitted;         // 1 when admitted
  std::vector<int> min_rbs;          // 0 when not admitted
  std::vector<double> pf;
  std::vector<double> decision_sinr; // per user minimum over its RBs
  std::vector<Eigen::MatrixXcd> precoders;  // per RB, columns follow users_on(b), power P / G each
  bool rate_enforced = true;
};

ScheduleDecision schedule(std::span<const SchedulerUser> users, Policy policy, const SchedulerConfig& config,
                          const McsTable& table, int slot);

struct ThroughputReport {
  std::vector<int> user_ids;
  std::vector<double> bits;
  std::vector<double> ser;  // worst realized SER over the user's RBs
  std::vector<int> violation;
  double total = 0.0;
  int violation_count = 0;
};

/// Bits delivered when the decision's precoders meet the given channels,
/// indexed like the decision's users.
ThroughputReport realized_throughput(const ScheduleDecision& decision, std::span<const ChannelVector> channels,
                                     const SchedulerConfig& config, const McsTable& table);

nlohmann::json to_json(const ScheduleDecision& decision);
nlohmann::json to_json(const ThroughputReport& report);

}  // namespace preempt
