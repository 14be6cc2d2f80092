#include <doctest.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "proofsketch/errors.hpp"
#include "proofsketch/generation.hpp"

using namespace proofsketch;
using namespace std::chrono_literals;

namespace {

std::string completion(const std::string& text, int tokens) {
  return nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}},
                        {"usage", {{"completion_tokens", tokens}}}}
      .dump();
}

// Chat-completions stub on an ephemeral port.
struct Stub {
  httplib::Server server;
  int port = 0;
  std::thread thread;
  std::atomic<int> flaky_calls{0};
  std::atomic<int> error_calls{0};
  std::atomic<int> active{0};
  std::atomic<int> peak{0};
  nlohmann::json last_request;
  std::string last_auth;
  std::mutex mu;

  Stub() {
    server.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      {
        std::lock_guard lock(mu);
        last_request = nlohmann::json::parse(req.body);
        last_auth = req.get_header_value("Authorization");
      }
      res.set_content(completion("{\"answer\": \"True\", \"claims\": []}", 7), "application/json");
    });
    server.Post("/flaky", [this](const httplib::Request&, httplib::Response& res) {
      if (flaky_calls++ < 2) {
        res.status = 500;
        return;
      }
      res.set_content(completion("ok", 1), "application/json");
    });
    server.Post("/always500", [this](const httplib::Request&, httplib::Response& res) {
      ++error_calls;
      res.status = 503;
    });
    server.Post("/bad-request", [this](const httplib::Request&, httplib::Response& res) {
      ++error_calls;
      res.status = 400;
    });
    server.Post("/legacy", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"choices":[{"text":"one two three"}]})", "application/json");
    });
    server.Post("/hang", [](const httplib::Request&, httplib::Response& res) {
      std::this_thread::sleep_for(1500ms);
      res.set_content(completion("late", 1), "application/json");
    });
    server.Post("/slow", [this](const httplib::Request&, httplib::Response& res) {
      const int now = ++active;
      for (int p = peak; now > p && !peak.compare_exchange_weak(p, now);) {
      }
      std::this_thread::sleep_for(50ms);
      --active;
      res.set_content(completion("ok", 1), "application/json");
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }

  ~Stub() {
    server.stop();
    thread.join();
  }

  HttpGeneratorConfig config(const std::string& path) const {
    HttpGeneratorConfig c;
    c.endpoint_url = "http://127.0.0.1:" + std::to_string(port) + path;
    c.model_name = "stub-model";
    c.timeout_ms = 5000;
    c.retry.base_backoff_ms = 5;
    c.retry.max_backoff_ms = 20;
    return c;
  }
};

GenerationRequest request() { return {"hello", 120, 0.3, std::nullopt}; }

}  // namespace

TEST_CASE("fixed completion passes through") {
  Stub stub;
  auto cfg = stub.config("/v1/chat/completions");
  cfg.api_key = "sk-test";
  HttpGenerator g(cfg);
  const auto r = g.generate(request());
  CHECK(r.text == "{\"answer\": \"True\", \"claims\": []}");
  CHECK(r.completion_tokens == 7);
  CHECK(r.retries == 0);
  CHECK(r.latency_ms >= 0.0);
  CHECK(g.name() == "http:stub-model");

  std::lock_guard lock(stub.mu);
  CHECK(stub.last_request["model"] == "stub-model");
  CHECK(stub.last_request["max_tokens"] == 120);
  CHECK(stub.last_request["temperature"] == doctest::Approx(0.3));
  REQUIRE(stub.last_request["messages"].size() == 1);
  CHECK(stub.last_request["messages"][0]["role"] == "user");
  CHECK(stub.last_request["messages"][0]["content"] == "hello");
  CHECK_FALSE(stub.last_request.contains("stop"));
  CHECK(stub.last_auth == "Bearer sk-test");
}

TEST_CASE("default path and legacy text field") {
  Stub stub;
  auto cfg = stub.config("");
  HttpGenerator g(cfg);
  CHECK(g.generate(request()).completion_tokens == 7);

  HttpGenerator legacy(stub.config("/legacy"));
  const auto r = legacy.generate(request());
  CHECK(r.text == "one two three");
  CHECK(r.completion_tokens == 3);
}

TEST_CASE("500 twice then 200 records two retries") {
  Stub stub;
  HttpGenerator g(stub.config("/flaky"));
  const auto r = g.generate(request());
  CHECK(r.text == "ok");
  CHECK(r.retries == 2);
  CHECK(stub.flaky_calls == 3);
}

TEST_CASE("retries exhausted") {
  Stub stub;
  HttpGenerator g(stub.config("/always500"));
  try {
    g.generate(request());
    FAIL("expected GeneratorError");
  } catch (const TimeoutError&) {
    FAIL("not a timeout");
  } catch (const GeneratorError& e) {
    CHECK(e.http_status() == 503);
  }
  CHECK(stub.error_calls == 3);
}

TEST_CASE("client errors are not retried") {
  Stub stub;
  HttpGenerator g(stub.config("/bad-request"));
  CHECK_THROWS_AS(g.generate(request()), GeneratorError);
  CHECK(stub.error_calls == 1);
}

TEST_CASE("hanging endpoint raises TimeoutError") {
  Stub stub;
  auto cfg = stub.config("/hang");
  cfg.timeout_ms = 300;
  HttpGenerator g(cfg);
  const auto start = std::chrono::steady_clock::now();
  CHECK_THROWS_AS(g.generate(request()), TimeoutError);
  CHECK(std::chrono::steady_clock::now() - start < 1400ms);
}

TEST_CASE("unreachable endpoint is a transport error") {
  Stub stub;
  auto cfg = stub.config("/v1/chat/completions");
  stub.server.stop();
  cfg.retry.max_retries = 1;
  HttpGenerator g(cfg);
  CHECK_THROWS_AS(g.generate(request()), GeneratorError);
}

TEST_CASE("max_in_flight caps concurrent requests") {
  Stub stub;
  auto cfg = stub.config("/slow");
  cfg.max_in_flight = 2;
  HttpGenerator g(cfg);
  {
    std::vector<std::jthread> threads;
    for (int i = 0; i < 6; ++i) threads.emplace_back([&] { g.generate(request()); });
  }
  CHECK(stub.peak <= 2);
  CHECK(stub.peak >= 1);
}

TEST_CASE("budget is enforced on over-long completions") {
  Stub stub;
  HttpGenerator g(stub.config("/v1/chat/completions"));
  GenerationRequest req = request();
  req.max_tokens = 3;
  const auto r = generate_within_budget(g, req);
  CHECK(r.completion_tokens == 3);
  CHECK(r.text == "{\"answer\": \"True\", \"claims\":");
}

TEST_CASE("config from JSON") {
  setenv("PROOFSKETCH_TEST_KEY", "secret", 1);
  const auto c = http_config_from_json(nlohmann::json::parse(
      R"({"endpoint_url": "http://localhost:8000/v1/chat/completions", "model_name": "m",
          "timeout_ms": 1000, "max_in_flight": 8, "max_retries": 5, "api_key_env": "PROOFSKETCH_TEST_KEY"})"));
  CHECK(c.api_key == "secret");
  CHECK(c.timeout_ms == 1000);
  CHECK(c.max_in_flight == 8);
  CHECK(c.retry.max_retries == 5);
  CHECK_THROWS_AS(http_config_from_json(nlohmann::json::parse(R"({"model_name": "m"})")), ConfigError);
  CHECK_THROWS_AS(HttpGenerator(HttpGeneratorConfig{"ftp://x", "m", "", 1000, 1, {}}), ConfigError);
}
