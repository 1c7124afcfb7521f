// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <string>

#include "preempt/scene.hpp"

namespace preempt {

enum class PromptKind { Angles, Distance };

const char* to_string(PromptKind kind);

struct PromptRecord {
  std::string text;
  PromptKind kind = PromptKind::Angles;
  int user_id = 0;
  int slot = 0;
};

/// Canonical next-pair prompt over the given pixel history, numbers with
/// one decimal place.
std::string angles_prompt(std::span<const Pixel> history);
std::string distance_prompt(std::span<const double> history);

/// Follow-up prompt used when a first answer was physically implausible.
std::string angles_retry_prompt(std::span<const Pixel> history);
std::string distance_retry_prompt(std::span<const double> history);

/// First "(number, number)" pair in free text.
std::optional<Pixel> parse_pair_response(const std::string& text);

/// First number that is not glued to a word (so "r_4 = 9.4" yields 9.4).
std::optional<double> parse_distance_response(const std::string& text);

}  // namespace preempt
