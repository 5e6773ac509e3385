// Copyright 2026 The featuremark Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <atomic>
#include <mutex>
#include <sstream>
#include <thread>

#include "featuremark/remote_extractor.hpp"
#include "featuremark/remote_generator.hpp"

namespace fm = featuremark;

namespace {

// Local stand-in for a chat-completions server. Serves at most `cap`
// choices per request and fails the first `failures` requests with
// `failure_status`.
class FakeChatServer {
 public:
  FakeChatServer(std::size_t cap, int failures, int failure_status)
      : cap_(cap), failures_left_(failures), failure_status_(failure_status) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      handle(req, res);
    });
    server_.Post("/custom/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      handle(req, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeChatServer() {
    server_.stop();
    thread_.join();
  }

  std::string base() const { return "http://127.0.0.1:" + std::to_string(port_); }
  int requests() const { return requests_; }
  std::string last_authorization() {
    std::lock_guard lock(mutex_);
    return auth_;
  }
  std::vector<std::size_t> requested_n() {
    std::lock_guard lock(mutex_);
    return ns_;
  }

 private:
  void handle(const httplib::Request& req, httplib::Response& res) {
    ++requests_;
    {
      std::lock_guard lock(mutex_);
      auth_ = req.get_header_value("Authorization");
    }
    if (failures_left_ > 0) {
      --failures_left_;
      res.status = failure_status_;
      res.set_content("{\"error\": \"nope\"}", "application/json");
      return;
    }
    const auto body = nlohmann::json::parse(req.body);
    const auto n = body.at("n").get<std::size_t>();
    {
      std::lock_guard lock(mutex_);
      ns_.push_back(n);
    }
    const auto content = body.at("messages").at(0).at("content").get<std::string>();
    nlohmann::json choices = nlohmann::json::array();
    for (std::size_t i = 0; i < std::min(n, cap_); ++i) {
      choices.push_back({{"index", i},
                         {"message", {{"role", "assistant"},
                                      {"content", content + " reply " + std::to_string(served_++) + "."}}}});
    }
    res.set_content(nlohmann::json{{"choices", choices}}.dump(), "application/json");
  }

  httplib::Server server_;
  std::thread thread_;
  int port_ = -1;
  std::size_t cap_;
  std::atomic<int> failures_left_;
  int failure_status_;
  std::atomic<int> requests_{0};
  std::atomic<std::size_t> served_{0};
  std::mutex mutex_;
  std::string auth_;
  std::vector<std::size_t> ns_;
};

fm::RemoteGeneratorConfig config_for(const std::string& base) {
  fm::RemoteGeneratorConfig c;
  c.api_base = base;
  c.api_key = "sk-test";
  c.initial_backoff = std::chrono::milliseconds(1);
  c.timeout = std::chrono::seconds(5);
  return c;
}

fm::Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const fm::Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return fm::Errc::invalid_argument;
}

// Runs a fixed response body behind POST /extract.
class CannedExtractServer {
 public:
  CannedExtractServer(int status, std::string body) {
    server_.Post("/extract", [status, body](const httplib::Request&, httplib::Response& res) {
      res.status = status;
      res.set_content(body, "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~CannedExtractServer() {
    server_.stop();
    thread_.join();
  }
  std::string base() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = -1;
};

}  // namespace

TEST(RemoteGenerator, ReturnsExactlyNAndSendsBearer) {
  FakeChatServer server(100, 0, 200);
  fm::RemoteGenerator gen(config_for(server.base()));
  EXPECT_EQ(gen.endpoint(), "/v1/chat/completions");
  const auto out = gen.generate({"Tell me.", 5, 0.7, 20, 0});
  ASSERT_EQ(out.size(), 5u);
  EXPECT_EQ(out[0], "Tell me. reply 0.");
  EXPECT_EQ(server.last_authorization(), "Bearer sk-test");
  EXPECT_EQ(server.requested_n(), (std::vector<std::size_t>{5}));
}

TEST(RemoteGenerator, LoopsForTheRemainderWhenServerCapsN) {
  FakeChatServer server(2, 0, 200);
  fm::RemoteGenerator gen(config_for(server.base()));
  const auto out = gen.generate({"ctx", 5, 0.7, 20, 0});
  EXPECT_EQ(out.size(), 5u);
  EXPECT_EQ(server.requested_n(), (std::vector<std::size_t>{5, 3, 1}));
}

TEST(RemoteGenerator, ZeroChoicesEventuallyFail) {
  FakeChatServer server(0, 0, 200);
  fm::RemoteGenerator gen(config_for(server.base()));
  EXPECT_EQ(code_of([&] { gen.generate({"ctx", 2, 0.7, 20, 0}); }), fm::Errc::generator_unavailable);
}

TEST(RemoteGenerator, RetriesRateLimitsAndServerErrors) {
  for (int status : {429, 500, 503}) {
    FakeChatServer server(10, 2, status);
    fm::RemoteGenerator gen(config_for(server.base()));
    EXPECT_EQ(gen.generate({"ctx", 3, 0.7, 20, 0}).size(), 3u);
    EXPECT_EQ(server.requests(), 3);
  }
  FakeChatServer exhausted(10, 10, 500);
  fm::RemoteGenerator gen(config_for(exhausted.base()));
  EXPECT_EQ(code_of([&] { gen.generate({"ctx", 1, 0.7, 20, 0}); }), fm::Errc::generator_unavailable);
  EXPECT_EQ(exhausted.requests(), 4);
}

TEST(RemoteGenerator, ClientErrorsAreNotRetried) {
  FakeChatServer server(10, 1, 400);
  fm::RemoteGenerator gen(config_for(server.base()));
  EXPECT_EQ(code_of([&] { gen.generate({"ctx", 1, 0.7, 20, 0}); }), fm::Errc::generator_unavailable);
  EXPECT_EQ(server.requests(), 1);
}

TEST(RemoteGenerator, PathPrefixAndUrlValidation) {
  FakeChatServer server(10, 0, 200);
  fm::RemoteGenerator gen(config_for(server.base() + "/custom/"));
  EXPECT_EQ(gen.endpoint(), "/custom/chat/completions");
  EXPECT_EQ(gen.generate({"ctx", 1, 0.7, 20, 0}).size(), 1u);
  EXPECT_EQ(code_of([] { fm::RemoteGenerator g(config_for("https://api.example.com")); }),
            fm::Errc::config_invalid);
  EXPECT_EQ(code_of([] { fm::RemoteGenerator g(config_for("localhost:8000")); }),
            fm::Errc::config_invalid);
  EXPECT_EQ(code_of([] { fm::RemoteGenerator g(config_for("")); }), fm::Errc::config_invalid);
}

TEST(RemoteGenerator, UnreachableServer) {
  auto c = config_for("http://127.0.0.1:1");
  c.max_retries = 1;
  fm::RemoteGenerator gen(c);
  EXPECT_EQ(code_of([&] { gen.generate({"ctx", 1, 0.7, 20, 0}); }), fm::Errc::generator_unavailable);
}

TEST(WireFormat, ResponseMatchesExtractor) {
  fm::BuiltinExtractor ex;
  const auto j = fm::extract_response(ex, "Hello wide world.");
  EXPECT_EQ(j.at("dim").get<std::uint32_t>(), 1024u);
  EXPECT_EQ(j.at("tokens"), (nlohmann::json{"Hello", "wide", "world."}));
  EXPECT_EQ(fm::parse_extract_response(j, 1024u), ex.extract("Hello wide world."));
}

TEST(WireFormat, ProtocolViolations) {
  const auto parse = [](const char* text) {
    return code_of([&] { fm::parse_extract_response(nlohmann::json::parse(text), 8u); });
  };
  EXPECT_EQ(parse(R"({"dim": 16, "rows": [{"indices": [1], "values": [0.5]}]})"), fm::Errc::protocol_error);
  EXPECT_EQ(parse(R"({"dim": 8, "rows": [{"indices": [3, 1], "values": [0.5, 0.2]}]})"),
            fm::Errc::protocol_error);
  EXPECT_EQ(parse(R"({"dim": 8, "rows": [{"indices": [9], "values": [0.5]}]})"), fm::Errc::protocol_error);
  EXPECT_EQ(parse(R"({"dim": 8, "rows": [{"indices": [1], "values": [-0.5]}]})"), fm::Errc::protocol_error);
  EXPECT_EQ(parse(R"({"dim": 8, "tokens": ["a", "b"], "rows": [{"indices": [1], "values": [0.5]}]})"),
            fm::Errc::protocol_error);
  EXPECT_EQ(parse(R"({"dim": 8, "rows": [{"indices": [1]}]})"), fm::Errc::protocol_error);
  EXPECT_EQ(parse(R"({"error": "model not loaded"})"), fm::Errc::protocol_error);
  EXPECT_EQ(parse(R"({"dim": 8, "rows": []})"), fm::Errc::empty_unit);
}

TEST(HttpExtractor, MatchesBuiltinThroughServer) {
  fm::BuiltinExtractor builtin;
  fm::ExtractServer server(builtin);
  const int port = server.start();
  const std::string base = "http://127.0.0.1:" + std::to_string(port);
  fm::HttpExtractor remote(base, builtin.id(), builtin.dim());
  for (const char* text : {"The quick fox.", "你好世界。", "x"}) {
    EXPECT_EQ(remote.extract(text), builtin.extract(text)) << text;
  }
  httplib::Client client(base);
  const auto health = client.Get("/healthz");
  ASSERT_TRUE(health);
  EXPECT_EQ(nlohmann::json::parse(health->body).at("dim").get<int>(), 1024);
  const auto bad = client.Post("/extract", "{\"txt\": 1}", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
  const auto empty = client.Post("/extract", "{\"text\": \"   \"}", "application/json");
  ASSERT_TRUE(empty);
  EXPECT_EQ(empty->status, 422);
  EXPECT_EQ(code_of([&] { remote.extract("   "); }), fm::Errc::protocol_error);
  fm::HttpExtractor wrong_dim(base, builtin.id(), 512);
  EXPECT_EQ(code_of([&] { wrong_dim.extract("hello"); }), fm::Errc::protocol_error);
  server.stop();
}

TEST(HttpExtractor, ServerSideViolations) {
  CannedExtractServer unsorted(200, R"({"dim": 1024, "rows": [{"indices": [5, 2], "values": [1, 1]}]})");
  fm::HttpExtractor a(unsorted.base(), "x", 1024);
  EXPECT_EQ(code_of([&] { a.extract("t"); }), fm::Errc::protocol_error);
  CannedExtractServer garbage(200, "not json");
  fm::HttpExtractor b(garbage.base(), "x", 1024);
  EXPECT_EQ(code_of([&] { b.extract("t"); }), fm::Errc::protocol_error);
  CannedExtractServer down(503, "{}");
  fm::HttpExtractor c(down.base(), "x", 1024);
  EXPECT_EQ(code_of([&] { c.extract("t"); }), fm::Errc::protocol_error);
}

TEST(StreamExtractor, RoundtripThroughServeStream) {
  fm::BuiltinExtractor builtin;
  std::istringstream requests(fm::extract_request("alpha beta.").dump() + "\n\n" +
                              fm::extract_request("gamma").dump() + "\n" + "{broken\n" +
                              fm::extract_request(" ").dump() + "\n");
  std::ostringstream responses;
  fm::serve_stream(builtin, requests, responses);

  std::istringstream from_server(responses.str());
  std::ostringstream to_server;
  fm::StreamExtractor client(from_server, to_server, builtin.id(), builtin.dim());
  EXPECT_FALSE(client.concurrent());
  EXPECT_EQ(client.extract("alpha beta."), builtin.extract("alpha beta."));
  EXPECT_EQ(client.extract("gamma"), builtin.extract("gamma"));
  EXPECT_EQ(code_of([&] { client.extract("ignored"); }), fm::Errc::protocol_error);
  EXPECT_EQ(code_of([&] { client.extract("ignored"); }), fm::Errc::protocol_error);
  EXPECT_EQ(code_of([&] { client.extract("ignored"); }), fm::Errc::protocol_error);
  EXPECT_EQ(to_server.str().substr(0, to_server.str().find('\n')),
            fm::extract_request("alpha beta.").dump());
}
