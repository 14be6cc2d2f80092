#include <chrono>
#include <cstdlib>
#include <regex>
#include <thread>

#include <httplib.h>

#include "proofsketch/errors.hpp"
#include "proofsketch/generation.hpp"

namespace proofsketch {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

bool retryable_status(int status) { return status == 429 || status >= 500; }

class SlotGuard {
 public:
  explicit SlotGuard(std::counting_semaphore<1 << 16>& sem) : sem_(sem) { sem_.acquire(); }
  ~SlotGuard() { sem_.release(); }
  SlotGuard(const SlotGuard&) = delete;
  SlotGuard& operator=(const SlotGuard&) = delete;

 private:
  std::counting_semaphore<1 << 16>& sem_;
};

GenerationResponse decode_completion(const std::string& body) {
  auto doc = nlohmann::json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw GeneratorError("endpoint returned non-JSON body", 200);
  auto choices = doc.find("choices");
  if (choices == doc.end() || !choices->is_array() || choices->empty())
    throw GeneratorError("endpoint response has no choices", 200);
  const auto& first = (*choices)[0];
  GenerationResponse resp;
  if (auto msg = first.find("message"); msg != first.end() && msg->is_object() &&
                                        msg->contains("content") && (*msg)["content"].is_string()) {
    resp.text = (*msg)["content"].get<std::string>();
  } else if (auto text = first.find("text"); text != first.end() && text->is_string()) {
    resp.text = text->get<std::string>();
  } else {
    throw GeneratorError("endpoint response has no completion text", 200);
  }
  resp.completion_tokens = whitespace_token_count(resp.text);
  if (auto usage = doc.find("usage"); usage != doc.end() && usage->is_object()) {
    if (auto ct = usage->find("completion_tokens"); ct != usage->end() && ct->is_number_integer())
      resp.completion_tokens = ct->get<int>();
  }
  return resp;
}

}  // namespace

HttpGenerator::HttpGenerator(HttpGeneratorConfig config)
    : config_(std::move(config)), in_flight_(std::max(1, config_.max_in_flight)) {
  static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)", std::regex::icase);
  std::smatch m;
  if (!std::regex_match(config_.endpoint_url, m, kUrl))
    throw ConfigError("endpoint_url must look like http(s)://host[:port]/path, got '" +
                      config_.endpoint_url + "'");
  scheme_host_ = m[1].str();
  path_ = m[2].matched ? m[2].str() : "/v1/chat/completions";
  if (config_.timeout_ms <= 0) throw ConfigError("timeout_ms must be positive");
  if (config_.retry.max_retries < 0) throw ConfigError("max_retries must be non-negative");
}

GenerationResponse HttpGenerator::generate(const GenerationRequest& request) {
  SlotGuard slot(in_flight_);
  const auto start = Clock::now();

  nlohmann::json payload = {
      {"model", config_.model_name},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", request.prompt}}})},
      {"max_tokens", request.max_tokens},
      {"temperature", request.temperature}};
  if (request.stop_hint) payload["stop"] = nlohmann::json::array({*request.stop_hint});
  const std::string body = payload.dump();

  httplib::Client client(scheme_host_);
  const auto timeout = std::chrono::milliseconds(config_.timeout_ms);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  if (!config_.api_key.empty()) client.set_bearer_token_auth(config_.api_key);

  std::string last_failure;
  int last_status = 0;
  for (int attempt = 0; attempt <= config_.retry.max_retries; ++attempt) {
    if (attempt > 0) {
      double delay = std::min<double>(config_.retry.max_backoff_ms,
                                      config_.retry.base_backoff_ms * static_cast<double>(1 << (attempt - 1)));
      if (config_.retry.jitter) {
        std::lock_guard lock(rng_mu_);
        delay *= std::uniform_real_distribution<double>(0.5, 1.0)(jitter_rng_);
      }
      std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(delay));
    }

    const auto attempt_start = Clock::now();
    auto res = client.Post(path_, body, "application/json");
    if (!res) {
      if (elapsed_ms(attempt_start) >= config_.timeout_ms ||
          res.error() == httplib::Error::ConnectionTimeout)
        throw TimeoutError("request to " + scheme_host_ + " timed out after " +
                           std::to_string(config_.timeout_ms) + " ms");
      last_failure = "transport error: " + httplib::to_string(res.error());
      last_status = 0;
      continue;
    }
    if (res->status == 200) {
      GenerationResponse resp = decode_completion(res->body);
      resp.latency_ms = elapsed_ms(start);
      resp.retries = attempt;
      return resp;
    }
    last_status = res->status;
    last_failure = "HTTP status " + std::to_string(res->status);
    if (!retryable_status(res->status)) break;
  }
  throw GeneratorError(last_failure + " from " + scheme_host_ + path_, last_status);
}

std::shared_ptr<Generator> http_generator(HttpGeneratorConfig config) {
  return std::make_shared<HttpGenerator>(std::move(config));
}

HttpGeneratorConfig http_config_from_json(const nlohmann::json& doc) {
  HttpGeneratorConfig c;
  if (!doc.is_object()) throw ConfigError("backend config must be a JSON object");
  c.endpoint_url = doc.value("endpoint_url", std::string{});
  c.model_name = doc.value("model_name", std::string{});
  c.timeout_ms = doc.value("timeout_ms", c.timeout_ms);
  c.max_in_flight = doc.value("max_in_flight", c.max_in_flight);
  c.retry.max_retries = doc.value("max_retries", c.retry.max_retries);
  c.retry.base_backoff_ms = doc.value("base_backoff_ms", c.retry.base_backoff_ms);
  c.retry.max_backoff_ms = doc.value("max_backoff_ms", c.retry.max_backoff_ms);
  const std::string key_env = doc.value("api_key_env", std::string{"OPENAI_API_KEY"});
  if (const char* key = std::getenv(key_env.c_str())) c.api_key = key;
  if (c.endpoint_url.empty()) throw ConfigError("backend config is missing endpoint_url");
  if (c.model_name.empty()) throw ConfigError("backend config is missing model_name");
  return c;
}

}  // namespace proofsketch
