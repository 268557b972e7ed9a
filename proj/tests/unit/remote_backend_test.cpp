#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include "support/support.hpp"

using namespace iterfix;
using namespace iterfix::testing;

namespace {

GenerationRequest request(int n) {
  return {"P1", ChatTranscript(ChatMessage{Role::User, "fix me"}), n, "coder-7b"};
}

std::string choices(const std::vector<std::string>& texts, bool reversed_indices = false) {
  nlohmann::json doc;
  doc["choices"] = nlohmann::json::array();
  for (std::size_t k = 0; k < texts.size(); ++k) {
    std::size_t idx = reversed_indices ? texts.size() - 1 - k : k;
    doc["choices"].push_back({{"index", idx}, {"message", {{"role", "assistant"}, {"content", texts[k]}}}});
  }
  return doc.dump();
}

struct FakeServer {
  std::vector<HttpResult> script;
  std::vector<nlohmann::json> bodies;
  std::vector<HttpHeaders> headers;
  std::vector<std::string> paths;
  std::size_t next = 0;

  HttpTransport transport() {
    return [this](const std::string& path, const std::string& body, const HttpHeaders& h) {
      paths.push_back(path);
      bodies.push_back(nlohmann::json::parse(body));
      headers.push_back(h);
      return script.at(next++);
    };
  }
};

RemoteConfig config() {
  RemoteConfig c;
  c.endpoint = "https://llm.example.com/v1/chat/completions";
  c.model_id = "coder-7b";
  c.auth = "secret";
  c.decoding = {{"temperature", 0}, {"use_beam_search", true}};
  return c;
}

}  // namespace

TEST(ParseEndpoint, AcceptsHttpAndHttps) {
  auto e = parse_endpoint("https://llm.example.com/v1/chat/completions");
  EXPECT_EQ(e.scheme, "https");
  EXPECT_EQ(e.host, "llm.example.com");
  EXPECT_EQ(e.port, 443);
  EXPECT_EQ(e.path, "/v1/chat/completions");
  auto local = parse_endpoint("http://127.0.0.1:8080");
  EXPECT_EQ(local.port, 8080);
  EXPECT_EQ(local.path, "/v1/chat/completions");
  EXPECT_THROW(parse_endpoint("ftp://x"), BackendError);
  EXPECT_THROW(parse_endpoint("not a url"), BackendError);
  RemoteConfig bad;
  bad.endpoint = "nope";
  EXPECT_THROW(RemoteBackend{bad}, BackendError);
}

TEST(RemoteBackend, OneWireRequestCarriesMessagesAndN) {
  FakeServer server;
  server.script = {{200, choices({"o1", "o2", "o3"}), {}}};
  RemoteBackend b(config(), server.transport(), [](auto) {});
  auto r = b.generate(request(3));
  EXPECT_EQ(r.outputs, (std::vector<std::string>{"o1", "o2", "o3"}));
  ASSERT_EQ(server.bodies.size(), 1u);
  const auto& body = server.bodies[0];
  EXPECT_EQ(body["model"], "coder-7b");
  EXPECT_EQ(body["n"], 3);
  EXPECT_EQ(body["temperature"], 0);
  EXPECT_EQ(body["use_beam_search"], true);
  EXPECT_EQ(body["messages"], nlohmann::json::parse(R"([{"role":"user","content":"fix me"}])"));
  EXPECT_EQ(server.paths[0], "/v1/chat/completions");
  bool auth = false;
  for (const auto& [k, v] : server.headers[0]) auth |= k == "Authorization" && v == "Bearer secret";
  EXPECT_TRUE(auth);
  EXPECT_EQ(r.backend_metadata.at("retries"), "0");
}

TEST(RemoteBackend, OrdersChoicesByProviderIndex) {
  FakeServer server;
  server.script = {{200, choices({"third", "second", "first"}, true), {}}};
  RemoteBackend b(config(), server.transport(), [](auto) {});
  EXPECT_EQ(b.generate(request(3)).outputs,
            (std::vector<std::string>{"first", "second", "third"}));
}

TEST(RemoteBackend, ShortResponseIsAnError) {
  FakeServer server;
  server.script = {{200, choices({"o1", "o2"}), {}}};
  RemoteBackend b(config(), server.transport(), [](auto) {});
  EXPECT_THROW(b.generate(request(3)), ShortResponseError);
}

TEST(RemoteBackend, RetriesTransientFailuresWithBackoff) {
  FakeServer server;
  server.script = {{503, "busy", {}}, {0, {}, "connection reset"}, {200, choices({"ok"}), {}}};
  std::vector<long long> sleeps;
  RemoteBackend b(config(), server.transport(),
                  [&](std::chrono::milliseconds d) { sleeps.push_back(d.count()); });
  auto r = b.generate(request(1));
  EXPECT_EQ(r.outputs, std::vector<std::string>{"ok"});
  EXPECT_EQ(r.backend_metadata.at("retries"), "2");
  EXPECT_EQ(sleeps, (std::vector<long long>{1000, 2000}));
}

TEST(RemoteBackend, GivesUpAfterThreeAttempts) {
  FakeServer server;
  server.script = {{500, "", {}}, {502, "", {}}, {503, "", {}}, {200, choices({"late"}), {}}};
  RemoteBackend b(config(), server.transport(), [](auto) {});
  EXPECT_THROW(b.generate(request(1)), BackendError);
  EXPECT_EQ(server.next, 3u);

  FakeServer down;
  down.script = {{0, {}, "refused"}, {0, {}, "refused"}, {0, {}, "refused"}};
  RemoteBackend unreachable(config(), down.transport(), [](auto) {});
  try {
    unreachable.generate(request(1));
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_NE(std::string(e.what()).find("unreachable"), std::string::npos);
  }
}

TEST(RemoteBackend, ClientErrorsAreNotRetried) {
  FakeServer server;
  server.script = {{401, "unauthorized", {}}};
  RemoteBackend b(config(), server.transport(), [](auto) {});
  EXPECT_THROW(b.generate(request(1)), BackendError);
  EXPECT_EQ(server.next, 1u);
}

TEST(RemoteBackend, MalformedResponses) {
  for (std::string body : {"not json", "{}", R"({"choices":[{"index":0}]})"}) {
    FakeServer server;
    server.script = {{200, body, {}}};
    RemoteBackend b(config(), server.transport(), [](auto) {});
    EXPECT_THROW(b.generate(request(1)), BackendError) << body;
  }
}

TEST(RemoteBackend, EmulatesNByRepeatsOnlyWhenConfigured) {
  FakeServer server;
  server.script = {{200, choices({"same"}), {}}, {200, choices({"same"}), {}}};
  auto cfg = config();
  cfg.emulate_n_by_repeats = true;
  RemoteBackend b(cfg, server.transport(), [](auto) {});
  auto r = b.generate(request(2));
  EXPECT_EQ(r.outputs, (std::vector<std::string>{"same", "same"}));
  EXPECT_EQ(r.backend_metadata.at("emulated_n"), "true");
  ASSERT_EQ(server.bodies.size(), 2u);
  EXPECT_EQ(server.bodies[0]["n"], 1);
}

TEST(RemoteBackend, DescribeRecordsPinnedDecoding) {
  RemoteBackend b(config(), [](auto&&...) { return HttpResult{}; }, [](auto) {});
  auto d = b.describe();
  EXPECT_EQ(d["kind"], "remote");
  EXPECT_EQ(d["decoding"]["temperature"], 0);
  EXPECT_EQ(d["max_attempts"], 3);
  EXPECT_FALSE(d.contains("auth"));
}

TEST(RemoteBackend, TalksToALocalHttpServer) {
  httplib::Server srv;
  std::atomic<int> hits{0};
  srv.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    auto body = nlohmann::json::parse(req.body);
    if (hits++ == 0) {
      res.status = 503;
      return;
    }
    std::vector<std::string> outs;
    for (int k = 0; k < body["n"].get<int>(); ++k)
      outs.push_back(body["messages"][0]["content"].get<std::string>() + "#" + std::to_string(k));
    res.set_content(choices(outs), "application/json");
  });
  int port = srv.bind_to_any_port("127.0.0.1");
  std::thread t([&] { srv.listen_after_bind(); });
  srv.wait_until_ready();

  auto cfg = config();
  cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
  cfg.initial_backoff = std::chrono::milliseconds(1);
  RemoteBackend b(cfg);
  auto r = b.generate(request(2));
  srv.stop();
  t.join();
  EXPECT_EQ(r.outputs, (std::vector<std::string>{"fix me#0", "fix me#1"}));
  EXPECT_EQ(r.backend_metadata.at("retries"), "1");
}
