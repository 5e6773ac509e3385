// Copyright 2026 The featuremark Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <istream>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "featuremark/errors.hpp"
#include "featuremark/features.hpp"
#include "featuremark/remote_generator.hpp"
#include "featuremark/tokenize.hpp"

namespace featuremark {

// Wire format, shared by HTTP (POST /extract) and stdio (one document per line):
//   request  {"text": "<unit>"}
//   response {"dim": D, "tokens": [...], "rows": [{"indices": [...], "values": [...]}, ...]}

inline nlohmann::json extract_request(std::string_view text) {
  return {{"text", std::string(text)}};
}

/// Server side: runs `extractor` and renders the response document.
inline nlohmann::json extract_response(const FeatureExtractor& extractor, std::string_view text) {
  const ActivationMatrix acts = extractor.extract(text);
  nlohmann::json tokens = nlohmann::json::array();
  for (const Token& t : tokenize(text)) tokens.push_back(std::string(t.text));
  nlohmann::json rows = nlohmann::json::array();
  for (const SparseRow& r : acts.rows) rows.push_back({{"indices", r.indices}, {"values", r.values}});
  return {{"dim", acts.dim}, {"tokens", std::move(tokens)}, {"rows", std::move(rows)}};
}

/// Client side: validates a response document. Throws ProtocolError.
inline ActivationMatrix parse_extract_response(const nlohmann::json& j,
                                               std::optional<std::uint32_t> expected_dim = {}) {
  ActivationMatrix acts;
  try {
    if (j.contains("error")) {
      throw Error(Errc::protocol_error, "extractor error: " + j.at("error").dump());
    }
    acts.dim = j.at("dim").get<std::uint32_t>();
    const auto& rows = j.at("rows");
    if (j.contains("tokens") && j.at("tokens").size() != rows.size()) {
      throw Error(Errc::protocol_error, "tokens and rows differ in length");
    }
    for (const auto& r : rows) {
      acts.rows.push_back({r.at("indices").get<std::vector<FeatureIndex>>(),
                           r.at("values").get<std::vector<double>>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::protocol_error, std::string("malformed extract response: ") + e.what());
  }
  acts.validate();
  if (expected_dim && acts.dim != *expected_dim) {
    throw Error(Errc::protocol_error, "extractor reported dim " + std::to_string(acts.dim) +
                                          ", expected " + std::to_string(*expected_dim));
  }
  if (acts.rows.empty()) throw Error(Errc::empty_unit, "extractor returned no tokens");
  return acts;
}

/// Extractor behind an HTTP endpoint speaking the wire format.
class HttpExtractor final : public FeatureExtractor {
 public:
  /// `id` must identify the served model so calibrations bind correctly.
  HttpExtractor(std::string base_url, std::string id, std::uint32_t dim,
                std::chrono::seconds timeout = std::chrono::seconds(60))
      : id_(std::move(id)), dim_(dim), timeout_(timeout) {
    const auto url = detail::split_url(base_url);
    origin_ = url.origin;
    path_ = url.path + "/extract";
  }

  std::string id() const override { return id_; }
  std::uint32_t dim() const override { return dim_; }

  ActivationMatrix extract(std::string_view unit_text) const override {
    httplib::Client client(origin_);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    auto res = client.Post(path_, extract_request(unit_text).dump(), "application/json");
    if (!res) {
      throw Error(Errc::protocol_error, "extractor transport error: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
      throw Error(Errc::protocol_error, "extractor returned HTTP " + std::to_string(res->status));
    }
    try {
      return parse_extract_response(nlohmann::json::parse(res->body), dim_);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(Errc::protocol_error, std::string("extractor sent invalid JSON: ") + e.what());
    }
  }

 private:
  std::string id_;
  std::uint32_t dim_;
  std::chrono::seconds timeout_;
  std::string origin_;
  std::string path_;
};

/// Extractor reached through a pair of line-oriented streams (for example a
/// child process's stdout and stdin). Calls are serialized.
class StreamExtractor final : public FeatureExtractor {
 public:
  StreamExtractor(std::istream& from_server, std::ostream& to_server, std::string id,
                  std::uint32_t dim)
      : in_(from_server), out_(to_server), id_(std::move(id)), dim_(dim) {}

  std::string id() const override { return id_; }
  std::uint32_t dim() const override { return dim_; }
  bool concurrent() const override { return false; }

  ActivationMatrix extract(std::string_view unit_text) const override {
    std::lock_guard lock(mutex_);
    out_ << extract_request(unit_text).dump() << '\n' << std::flush;
    std::string line;
    if (!std::getline(in_, line)) throw Error(Errc::protocol_error, "extractor stream closed");
    try {
      return parse_extract_response(nlohmann::json::parse(line), dim_);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(Errc::protocol_error, std::string("extractor sent invalid JSON: ") + e.what());
    }
  }

 private:
  std::istream& in_;
  std::ostream& out_;
  std::string id_;
  std::uint32_t dim_;
  mutable std::mutex mutex_;
};

namespace detail {

inline nlohmann::json handle_extract(const FeatureExtractor& extractor, const std::string& body,
                                     int& status) {
  try {
    const auto req = nlohmann::json::parse(body);
    status = 200;
    return extract_response(extractor, req.at("text").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    status = 400;
    return {{"error", std::string("bad request: ") + e.what()}};
  } catch (const Error& e) {
    status = 422;
    return {{"error", e.what()}, {"code", std::string(to_string(e.code()))}};
  }
}

}  // namespace detail

/// Answers wire-format requests read line by line from `in` until EOF.
inline void serve_stream(const FeatureExtractor& extractor, std::istream& in, std::ostream& out) {
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    int status = 0;
    out << detail::handle_extract(extractor, line, status).dump() << '\n' << std::flush;
  }
}

/// HTTP server exposing an extractor at POST /extract and GET /healthz.
class ExtractServer {
 public:
  explicit ExtractServer(const FeatureExtractor& extractor) : extractor_(extractor) {
    server_.Post("/extract", [this](const httplib::Request& req, httplib::Response& res) {
      int status = 0;
      const auto body = detail::handle_extract(extractor_, req.body, status);
      res.status = status;
      res.set_content(body.dump(), "application/json");
    });
    server_.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
      const nlohmann::json body = {{"dim", extractor_.dim()}, {"extractor_id", extractor_.id()}};
      res.set_content(body.dump(), "application/json");
    });
  }

  ~ExtractServer() { stop(); }

  /// Binds (port 0 picks a free port), starts serving on a background thread
  /// and returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0) {
    const int bound = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw Error(Errc::io_error, "cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return bound;
  }

  /// Blocks serving on the calling thread.
  void listen(const std::string& host, int port) {
    if (!server_.listen(host, port)) {
      throw Error(Errc::io_error, "cannot listen on " + host + ":" + std::to_string(port));
    }
  }

  void stop() {
    if (server_.is_running()) server_.stop();
    if (thread_.joinable()) thread_.join();
  }

 private:
  const FeatureExtractor& extractor_;
  httplib::Server server_;
  std::thread thread_;
};

}  // namespace featuremark
