// Copyright 2026 The featuremark Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "featuremark/errors.hpp"
#include "featuremark/generator.hpp"

namespace featuremark {

struct RemoteGeneratorConfig {
  /// Server root such as "http://localhost:8000" or with a path prefix
  /// ("http://host/v1"). Requests go to <prefix>/chat/completions, with
  /// "/v1" as the default prefix.
  std::string api_base;
  std::string api_key;
  std::string model = "default";
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::seconds timeout{120};

  /// Fills api_base and api_key from FEATUREMARK_API_BASE / FEATUREMARK_API_KEY.
  static RemoteGeneratorConfig from_env() {
    RemoteGeneratorConfig c;
    if (const char* base = std::getenv("FEATUREMARK_API_BASE")) c.api_base = base;
    if (const char* key = std::getenv("FEATUREMARK_API_KEY")) c.api_key = key;
    return c;
  }
};

namespace detail {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // without trailing '/'
};

inline SplitUrl split_url(std::string_view url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) {
    throw Error(Errc::config_invalid, "URL '" + std::string(url) + "' has no scheme");
  }
  const std::string_view scheme = url.substr(0, scheme_end);
  if (scheme != "http") {
    throw Error(Errc::config_invalid,
                "only http:// endpoints are supported (this build has no TLS): " +
                    std::string(url));
  }
  const auto path_begin = url.find('/', scheme_end + 3);
  SplitUrl out;
  out.origin = std::string(url.substr(0, path_begin));
  if (path_begin != std::string_view::npos) out.path = std::string(url.substr(path_begin));
  while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  return out;
}

inline bool retryable_status(int status) { return status == 429 || status >= 500; }

}  // namespace detail

/// OpenAI-compatible chat-completions client. Each call sends the full
/// context as a single user message and asks for `n` choices.
class RemoteGenerator final : public GeneratorAdapter {
 public:
  explicit RemoteGenerator(RemoteGeneratorConfig config) : config_(std::move(config)) {
    if (config_.api_base.empty()) {
      throw Error(Errc::config_invalid, "remote generator needs an API base URL");
    }
    const auto url = detail::split_url(config_.api_base);
    origin_ = url.origin;
    endpoint_ = (url.path.empty() ? std::string("/v1") : url.path) + "/chat/completions";
  }

  std::string id() const override { return "remote:" + config_.api_base + "#" + config_.model; }
  bool supports_parallel() const override { return true; }

  std::vector<std::string> generate(const GenerationRequest& request) override {
    require(request.n >= 1, Errc::invalid_argument, "candidate count must be positive");
    std::vector<std::string> out;
    // Servers may cap n; keep asking for the remainder.
    for (int round = 0; out.size() < request.n; ++round) {
      if (round > static_cast<int>(request.n)) {
        throw Error(Errc::generator_unavailable, "server keeps returning no choices");
      }
      auto batch = complete(request, request.n - out.size());
      for (auto& c : batch) {
        if (out.size() < request.n) out.push_back(std::move(c));
      }
    }
    return out;
  }

  const std::string& endpoint() const { return endpoint_; }

 private:
  std::vector<std::string> complete(const GenerationRequest& request, std::size_t n) {
    const nlohmann::json body = {
        {"model", config_.model},
        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", request.context}}})},
        {"n", n},
        {"temperature", request.temperature},
        {"max_tokens", request.max_new_tokens},
    };
    const std::string payload = body.dump();
    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

    std::string last_error;
    auto backoff = config_.initial_backoff;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(backoff);
        backoff *= 2;
      }
      httplib::Client client(origin_);
      client.set_connection_timeout(config_.timeout);
      client.set_read_timeout(config_.timeout);
      client.set_write_timeout(config_.timeout);
      auto res = client.Post(endpoint_, headers, payload, "application/json");
      if (!res) {
        last_error = "transport error: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status == 200) return parse_choices(res->body);
      last_error = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200);
      if (!detail::retryable_status(res->status)) break;
    }
    throw Error(Errc::generator_unavailable, "chat completion failed: " + last_error);
  }

  static std::vector<std::string> parse_choices(const std::string& body) {
    try {
      const auto j = nlohmann::json::parse(body);
      std::vector<std::string> out;
      for (const auto& choice : j.at("choices")) {
        out.push_back(choice.at("message").at("content").get<std::string>());
      }
      return out;
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::generator_unavailable, std::string("malformed completion: ") + e.what());
    }
  }

  RemoteGeneratorConfig config_;
  std::string origin_;
  std::string endpoint_;
};

}  // namespace featuremark
