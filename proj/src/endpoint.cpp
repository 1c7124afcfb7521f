// SPDX-License-Identifier: Apache-2.0

#include "preempt/endpoint.hpp"

#include <stdexcept>

#include <httplib.h>

namespace preempt {

struct HttpEndpoint::Impl {
  explicit Impl(const std::string& base) : client(base) {}
  httplib::Client client;
};

namespace {

// Split "http://host:port/path" into the scheme-host-port part and the path.
std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw std::invalid_argument("endpoint URL needs a scheme: " + url);
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

}  // namespace

HttpEndpoint::HttpEndpoint(std::string url, std::chrono::milliseconds deadline, AuditSink audit)
    : deadline_(deadline), audit_(std::move(audit)) {
  auto [base, path] = split_url(url);
  path_ = path;
  impl_ = std::make_unique<Impl>(base);
  const auto sec = static_cast<time_t>(deadline.count() / 1000);
  const auto usec = static_cast<time_t>((deadline.count() % 1000) * 1000);
  impl_->client.set_connection_timeout(sec, usec);
  impl_->client.set_read_timeout(sec, usec);
  impl_->client.set_write_timeout(sec, usec);
}

HttpEndpoint::~HttpEndpoint() = default;

std::optional<std::string> HttpEndpoint::query(const PromptRecord& prompt) {
  std::lock_guard lock(mutex_);
  const nlohmann::json body = {{"kind", to_string(prompt.kind)}, {"prompt", prompt.text}};
  nlohmann::json record = {{"event", "predictor_query"}, {"slot", prompt.slot},
                           {"user", prompt.user_id},     {"kind", to_string(prompt.kind)},
                           {"prompt", prompt.text}};

  std::optional<std::string> text;
  auto res = impl_->client.Post(path_, body.dump(), "application/json");
  if (!res) {
    record["error"] = httplib::to_string(res.error());
  } else if (res->status != 200) {
    record["error"] = "status " + std::to_string(res->status);
  } else {
    try {
      const auto reply = nlohmann::json::parse(res->body);
      text = reply.at("text").get<std::string>();
      record["response"] = *text;
    } catch (const std::exception& e) {
      record["error"] = std::string("bad response: ") + e.what();
    }
  }
  if (audit_) audit_(record);
  return text;
}

}  // namespace preempt
