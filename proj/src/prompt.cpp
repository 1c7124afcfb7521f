// SPDX-License-Identifier: Apache-2.0

#include "preempt/prompt.hpp"

#include <cstdio>
#include <regex>

namespace preempt {
namespace {

std::string fixed1(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

std::string pair_list(std::span<const Pixel> history) {
  std::string s;
  for (std::size_t i = 0; i < history.size(); ++i) {
    const auto n = std::to_string(i + 1);
    if (i > 0) s += ", ";
    s += "(x_" + n + ", y_" + n + ") = (" + fixed1(history[i].x) + ", " + fixed1(history[i].y) + ")";
  }
  return s;
}

std::string distance_list(std::span<const double> history) {
  std::string s;
  for (std::size_t i = 0; i < history.size(); ++i) {
    if (i > 0) s += ", ";
    s += "r_" + std::to_string(i + 1) + " = " + fixed1(history[i]);
  }
  return s;
}

std::string next_index(std::size_t n) { return std::to_string(n + 1); }

const std::regex& number_pattern() {
  static const std::regex re(R"((?:^|[^\w.])(-?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)(?![\w.]))");
  return re;
}

}  // namespace

const char* to_string(PromptKind kind) { return kind == PromptKind::Angles ? "angles" : "distance"; }

std::string angles_prompt(std::span<const Pixel> history) {
  const auto n = next_index(history.size());
  return "Using the sequence of past x-y coordinate pairs: " + pair_list(history) +
         ", predict the next pair (x_" + n + ", y_" + n + ")";
}

std::string distance_prompt(std::span<const double> history) {
  return "Using the sequence of past distance values: " + distance_list(history) +
         ", predict the next distance value r_" + next_index(history.size());
}

std::string angles_retry_prompt(std::span<const Pixel> history) {
  const auto n = next_index(history.size());
  return "If the predicted pair is physically implausible, predict the next pair (x_" + n + ", y_" +
         n + ") from the longer sequence: " + pair_list(history);
}

std::string distance_retry_prompt(std::span<const double> history) {
  return "If the predicted distance is physically implausible, predict the next distance value r_" +
         next_index(history.size()) + " from the longer sequence: " + distance_list(history);
}

std::optional<Pixel> parse_pair_response(const std::string& text) {
  static const std::regex re(
      R"(\(\s*(-?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)\s*,\s*(-?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)\s*\))");
  std::smatch m;
  if (!std::regex_search(text, m, re)) return std::nullopt;
  return Pixel{std::stod(m[1].str()), std::stod(m[2].str())};
}

std::optional<double> parse_distance_response(const std::string& text) {
  std::smatch m;
  if (!std::regex_search(text, m, number_pattern())) return std::nullopt;
  return std::stod(m[1].str());
}

}  // namespace preempt
