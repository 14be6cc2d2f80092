#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include "proofsketch/closure.hpp"
#include "proofsketch/theory.hpp"

namespace proofsketch {

struct PipelineConfig;

struct GenerationRequest {
  std::string prompt;
  int max_tokens = 1;  // completion budget
  double temperature = 0.0;
  std::optional<std::string> stop_hint;
};

struct GenerationResponse {
  std::string text;
  int completion_tokens = 0;
  double latency_ms = 0.0;
  int retries = 0;
};

/// Anything that turns a prompt into a completion. Implementations either allow
/// concurrent generate() calls or report is_concurrent() == false, in which case
/// callers wrap them with make_concurrent().
class Generator {
 public:
  virtual ~Generator() = default;
  virtual GenerationResponse generate(const GenerationRequest& request) = 0;
  virtual std::string name() const = 0;
  virtual bool is_concurrent() const { return true; }
};

/// Serializes generate() calls of a generator that is not safe to share.
class SerializedGenerator final : public Generator {
 public:
  explicit SerializedGenerator(std::shared_ptr<Generator> inner) : inner_(std::move(inner)) {}
  GenerationResponse generate(const GenerationRequest& request) override;
  std::string name() const override { return inner_->name(); }

 private:
  std::shared_ptr<Generator> inner_;
  std::mutex mu_;
};

std::shared_ptr<Generator> make_concurrent(std::shared_ptr<Generator> generator);

/// Number of maximal non-whitespace runs.
int whitespace_token_count(std::string_view text);

/// Cuts text after its first max_tokens whitespace tokens.
std::string truncate_to_tokens(std::string_view text, int max_tokens);

/// Calls the generator and clamps the result to the request's budget: over-long
/// completions are truncated at a whitespace-token boundary and recounted.
GenerationResponse generate_within_budget(Generator& generator, const GenerationRequest& request);

// Prompts

inline constexpr std::string_view kPromptTemplateVersion = "proofsketch-prompts/1";

enum class BaselineMode : std::uint8_t { ZeroShot, ShortCoT, LongCoT };

std::string_view to_string(BaselineMode mode) noexcept;

std::string build_sketch_prompt(const Theory& theory, const Question& question);
std::string build_baseline_prompt(const Theory& theory, const Question& question, BaselineMode mode);

// Backends

/// Replays canned texts in order. Strict mode raises ScriptExhausted past the
/// end; otherwise the script cycles.
class ScriptedGenerator final : public Generator {
 public:
  enum class Mode { Cycle, Strict };

  explicit ScriptedGenerator(std::vector<std::string> script, Mode mode = Mode::Strict);
  GenerationResponse generate(const GenerationRequest& request) override;
  std::string name() const override { return "scripted"; }

  std::size_t calls() const;

 private:
  std::vector<std::string> script_;
  Mode mode_;
  mutable std::mutex mu_;
  std::size_t next_ = 0;
};

std::shared_ptr<Generator> scripted_generator(std::vector<std::string> script,
                                              ScriptedGenerator::Mode mode = ScriptedGenerator::Mode::Strict);

struct OracleNoiseConfig {
  double flip_answer_prob = 0.0;
  double corrupt_claim_prob = 0.0;
  double malform_prob = 0.0;
  std::uint64_t seed = 0;
};

/// Simulated model that knows the closure. At zero noise it answers with the
/// closure's label and cites up to three closure literals about the query entity,
/// shallowest first. Noise is drawn from a seeded engine, so equal seeds replay
/// equal byte streams.
class OracleGenerator final : public Generator {
 public:
  OracleGenerator(const Theory& theory, const Question& question, OracleNoiseConfig noise);
  GenerationResponse generate(const GenerationRequest& request) override;
  std::string name() const override { return "oracle"; }

  static constexpr std::size_t kMaxClaims = 3;

 private:
  Label truth_;
  std::vector<Literal> evidence_;
  OracleNoiseConfig noise_;
  std::mutex mu_;
  std::mt19937_64 rng_;
};

std::shared_ptr<Generator> oracle_generator(const Theory& theory, const Question& question,
                                            OracleNoiseConfig noise);

struct RetryPolicy {
  int max_retries = 2;
  int base_backoff_ms = 200;
  int max_backoff_ms = 5000;
  bool jitter = true;
};

struct HttpGeneratorConfig {
  std::string endpoint_url;  // full URL of the chat-completions route
  std::string model_name;
  std::string api_key;       // never logged
  int timeout_ms = 60000;
  int max_in_flight = 4;
  RetryPolicy retry;
};

/// OpenAI-compatible chat-completions client. Retries transport failures and
/// 429/5xx responses; a timeout is reported as TimeoutError without retrying.
class HttpGenerator final : public Generator {
 public:
  explicit HttpGenerator(HttpGeneratorConfig config);
  GenerationResponse generate(const GenerationRequest& request) override;
  std::string name() const override { return "http:" + config_.model_name; }

 private:
  HttpGeneratorConfig config_;
  std::string scheme_host_;
  std::string path_;
  std::counting_semaphore<1 << 16> in_flight_;
  std::mutex rng_mu_;
  std::mt19937 jitter_rng_{0x5eed};
};

std::shared_ptr<Generator> http_generator(HttpGeneratorConfig config);

/// Reads endpoint_url, model_name, timeout_ms, max_in_flight, max_retries,
/// base_backoff_ms and api_key_env (the name of the variable holding the key).
HttpGeneratorConfig http_config_from_json(const nlohmann::json& doc);

/// Pipeline budget: the fixed budget when one is set, else the anchored budget
/// when the query entity already has closure facts, else the unanchored one.
int select_budget(const Closure& closure, const Question& question, const PipelineConfig& config);

}  // namespace proofsketch
