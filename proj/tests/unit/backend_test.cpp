#include <gtest/gtest.h>
#include <httplib.h>

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <nlohmann/json.hpp>
#include <thread>

#include "rubricrl/backend.hpp"
#include "rubricrl/errors.hpp"
#include "rubricrl/io.hpp"
#include "test_support.hpp"

namespace {

using namespace rubricrl;
using namespace std::chrono_literals;

BackendRequest request(const std::string& text, double temperature = 0.0) {
  BackendRequest r;
  r.messages.push_back({Message::Role::User, text, std::nullopt});
  r.temperature = temperature;
  r.max_tokens = 64;
  return r;
}

std::string reply(const std::string& content) {
  return nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}, {"finish_reason", "stop"}}}}}
      .dump();
}

// Local chat-completions endpoint on an ephemeral port.
class LocalServer {
 public:
  explicit LocalServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server_.Post("/v1/chat/completions", std::move(handler));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LocalServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions"; }
  int port() const { return port_; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

RemoteConfig fast_config(const std::string& url) {
  RemoteConfig c;
  c.url = url;
  c.model = "judge";
  c.initial_backoff = 5ms;
  c.connect_timeout = 2s;
  c.read_timeout = 5s;
  return c;
}

TEST(RequestDigest, StableAndSensitive) {
  const auto a = request_digest(request("hello"));
  EXPECT_EQ(a, request_digest(request("hello")));
  EXPECT_EQ(a.size(), 64u);
  EXPECT_NE(a, request_digest(request("hello ")));
  EXPECT_NE(a, request_digest(request("hello", 1.0)));
  auto with_image = request("hello");
  with_image.messages[0].image_path = "x.png";
  EXPECT_NE(a, request_digest(with_image));
}

TEST(ScriptedBackend, ReplaysByDigestAndMissesLoudly) {
  ScriptedBackend backend;
  backend.add(request_digest(request("q1")), "Winner: [[A]]");
  EXPECT_EQ(backend.generate(request("q1")).content, "Winner: [[A]]");
  EXPECT_THROW(backend.generate(request("q2")), TranscriptMiss);
}

TEST(ScriptedBackend, RecordedTranscriptRoundTrips) {
  FunctionBackend echo([](const BackendRequest& r) { return BackendResponse{"echo:" + r.messages[0].content, "stop"}; });
  RecordingBackend recorder(echo);
  recorder.generate(request("one"));
  recorder.generate(request("two"));
  test_support::TempDir dir;
  const auto records = recorder.records();
  ASSERT_EQ(records.size(), 2u);
  write_transcript(dir / "t.jsonl", records);
  auto replay = ScriptedBackend::from_file(dir / "t.jsonl");
  EXPECT_EQ(replay.size(), 2u);
  EXPECT_EQ(replay.generate(request("two")).content, "echo:two");
}

TEST(ScriptedBackend, MalformedTranscriptIsSchemaError) {
  test_support::TempDir dir;
  std::ofstream(dir / "t.jsonl") << "{\"digest\":\"x\",\"content\":\"y\"}\n{\"digest\":1}\n";
  try {
    ScriptedBackend::from_file(dir / "t.jsonl");
    FAIL() << "expected SchemaError";
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(ScriptedBackend::from_file(dir / "missing.jsonl"), IoError);
}

TEST(WireFormat, BodyAndImageDataUrl) {
  test_support::TempDir dir;
  std::ofstream(dir / "img.png", std::ios::binary) << "PNGDATA";
  auto r = request("describe");
  r.messages[0].image_path = (dir / "img.png").string();
  const auto body = nlohmann::json::parse(to_wire_body(r, "m"));
  EXPECT_EQ(body["model"], "m");
  EXPECT_EQ(body["max_tokens"], 64);
  const auto& content = body["messages"][0]["content"];
  ASSERT_TRUE(content.is_array());
  EXPECT_EQ(content[0]["text"], "describe");
  EXPECT_EQ(content[1]["image_url"]["url"], "data:image/png;base64," + base64_encode("PNGDATA"));
  EXPECT_EQ(nlohmann::json::parse(to_wire_body(request("plain"), ""))["messages"][0]["content"], "plain");
}

TEST(WireFormat, ResponseParsing) {
  EXPECT_EQ(parse_wire_response(reply("hi")).content, "hi");
  EXPECT_EQ(parse_wire_response(reply("hi")).finish_reason, "stop");
  EXPECT_THROW(parse_wire_response("{}"), TransportError);
  EXPECT_THROW(parse_wire_response("not json"), TransportError);
  EXPECT_THROW(parse_wire_response(reply("")), TransportError);
}

TEST(RemoteBackend, RetriesServerErrorsThenSucceeds) {
  std::atomic<int> calls{0};
  std::string seen_auth;
  std::string seen_body;
  LocalServer server([&](const httplib::Request& req, httplib::Response& res) {
    if (calls++ == 0) {
      res.status = 503;
      return;
    }
    seen_auth = req.get_header_value("Authorization");
    seen_body = req.body;
    res.set_content(reply("Winner: [[B]]"), "application/json");
  });
  ::setenv("RUBRICRL_TEST_KEY", "secret", 1);
  auto cfg = fast_config(server.url());
  cfg.api_key_env = "RUBRICRL_TEST_KEY";
  RemoteBackend backend(cfg);
  EXPECT_EQ(backend.generate(request("judge this")).content, "Winner: [[B]]");
  EXPECT_EQ(calls.load(), 2);
  EXPECT_EQ(seen_auth, "Bearer secret");
  EXPECT_EQ(nlohmann::json::parse(seen_body)["messages"][0]["content"], "judge this");
}

TEST(RemoteBackend, ClientErrorsAreNotRetried) {
  std::atomic<int> calls{0};
  LocalServer server([&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 400;
  });
  RemoteBackend backend(fast_config(server.url()));
  EXPECT_THROW(backend.generate(request("x")), TransportError);
  EXPECT_EQ(calls.load(), 1);
}

TEST(RemoteBackend, PersistentFailureStopsAfterMaxAttempts) {
  std::atomic<int> calls{0};
  LocalServer server([&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 500;
  });
  RemoteBackend backend(fast_config(server.url()));
  EXPECT_THROW(backend.generate(request("x")), TransportError);
  EXPECT_EQ(calls.load(), 3);
}

TEST(RemoteBackend, RefusedConnectionIsTransportError) {
  int port = 0;
  {
    LocalServer probe([](const httplib::Request&, httplib::Response&) {});
    port = probe.port();
  }
  RemoteBackend backend(fast_config("http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions"));
  EXPECT_THROW(backend.generate(request("x")), TransportError);
}

TEST(RemoteBackend, ConfigurationErrors) {
  EXPECT_THROW(RemoteBackend(fast_config("ftp://host/x")), InvalidArgument);
  auto cfg = fast_config("http://127.0.0.1:1/x");
  cfg.max_attempts = 0;
  EXPECT_THROW(RemoteBackend{cfg}, InvalidArgument);
  cfg = fast_config("http://127.0.0.1:1/x");
  cfg.api_key_env = "RUBRICRL_TEST_UNSET_VARIABLE";
  ::unsetenv("RUBRICRL_TEST_UNSET_VARIABLE");
  RemoteBackend backend(cfg);
  EXPECT_THROW(backend.generate(request("x")), TransportError);
}

TEST(GenerateAll, PreservesRequestOrder) {
  std::atomic<int> in_flight{0};
  std::atomic<int> peak{0};
  FunctionBackend slow([&](const BackendRequest& r) {
    const int now = ++in_flight;
    int prev = peak.load();
    while (now > prev && !peak.compare_exchange_weak(prev, now)) {
    }
    std::this_thread::sleep_for(2ms);
    --in_flight;
    return BackendResponse{r.messages[0].content, "stop"};
  });
  std::vector<BackendRequest> reqs;
  for (int i = 0; i < 20; ++i) reqs.push_back(request(std::to_string(i)));
  const auto out = generate_all(slow, reqs, 3);
  ASSERT_EQ(out.size(), 20u);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(out[i].content, std::to_string(i));
  EXPECT_LE(peak.load(), 3);
}

TEST(GenerateAll, RethrowsTheFirstError) {
  FunctionBackend flaky([](const BackendRequest& r) {
    if (r.messages[0].content == "3") throw TransportError("boom");
    return BackendResponse{"ok", "stop"};
  });
  std::vector<BackendRequest> reqs;
  for (int i = 0; i < 6; ++i) reqs.push_back(request(std::to_string(i)));
  EXPECT_THROW(generate_all(flaky, reqs, 2), TransportError);
}

}  // namespace
