// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "preempt/prompt.hpp"

namespace preempt {

/// Something that answers a canonical prompt with free text. nullopt means
/// the call failed or missed its deadline.
class PredictionEndpoint {
 public:
  virtual ~PredictionEndpoint() = default;
  virtual std::optional<std::string> query(const PromptRecord& prompt) = 0;
};

using AuditSink = std::function<void(const nlohmann::json&)>;

/// POST {"kind": ..., "prompt": ...} to a URL, expecting {"text": ...}.
/// Every exchange is reported to the audit sink, failures included.
class HttpEndpoint final : public PredictionEndpoint {
 public:
  HttpEndpoint(std::string url, std::chrono::milliseconds deadline, AuditSink audit = {});
  ~HttpEndpoint() override;

  std::optional<std::string> query(const PromptRecord& prompt) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::string path_;
  std::chrono::milliseconds deadline_;
  AuditSink audit_;
  std::mutex mutex_;
};

}  // namespace preempt
