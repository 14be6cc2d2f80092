#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "proofsketch/closure.hpp"
#include "proofsketch/generation.hpp"
#include "proofsketch/sketch.hpp"

namespace proofsketch {

enum class VerdictStatus : std::uint8_t { Verified, Contradicted, Unsupported };

struct ClaimVerdict {
  Literal claim;
  VerdictStatus status = VerdictStatus::Unsupported;
};

/// Lexicographic sketch score; larger is better, fields compared in declaration order.
struct ScoreTuple {
  int cert = 0;
  int verified_count = 0;
  int neg_tokens = 0;
  int consistency = 0;

  auto operator<=>(const ScoreTuple&) const = default;
};

struct ScoredSketch {
  ParsedSketch parsed;
  RawSketch raw;
  std::vector<ClaimVerdict> verdicts;
  ScoreTuple score;
};

enum class Certification : std::uint8_t { Certified, Partial, Uncertified };
enum class AnswerSource : std::uint8_t {
  ClosureShortCircuit,
  CertifiedSketch,
  BestSketch,
  ClosureCorrection
};

struct PipelineConfig {
  int max_sketches = 4;
  int budget_anchored = 120;
  int budget_unanchored = 160;
  double temperature = 0.3;
  bool adaptive_budget = true;
  std::optional<int> fixed_budget;  // ablation mode; requires adaptive_budget == false
  // Extension: certify Unknown when neither polarity of the target is derivable.
  bool certify_unknown_from_closure = false;
  // Ablation: when false, sketches are sampled even if the closure decides the
  // question, and the decision is applied afterwards as a closure correction.
  bool closure_short_circuit = true;

  /// Throws ConfigError on a violated invariant.
  void validate() const;
  PipelineConfig with_fixed_budget(int budget) const;
};

PipelineConfig pipeline_config_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const PipelineConfig& config);

struct PipelineResult {
  Label answer = Label::Unknown;
  std::vector<Literal> verified_claims;
  Certification certification = Certification::Uncertified;
  AnswerSource answer_source = AnswerSource::BestSketch;
  int generator_calls = 0;
  long long total_generated_tokens = 0;
  double latency_ms = 0.0;

  // Audit trail.
  int budget = 0;
  ClosureDecision closure_decision;
  std::vector<ScoredSketch> sketches;
  std::optional<std::size_t> selected;
};

std::string_view to_string(VerdictStatus s) noexcept;
std::string_view to_string(Certification c) noexcept;
std::string_view to_string(AnswerSource s) noexcept;

ClaimVerdict verify_claim(const Literal& claim, const Closure& closure);

ScoredSketch score_sketch(const ParsedSketch& parsed, const RawSketch& raw, const Closure& closure,
                          const Question& question);

/// Lexicographic comparison of two scores; equal scores compare equal and the
/// caller keeps the earlier sketch.
std::strong_ordering compare_scores(const ScoreTuple& a, const ScoreTuple& b);

/// Index of the lexicographically best score, earliest on ties. Empty input → nullopt.
std::optional<std::size_t> select_best(std::span<const ScoredSketch> sketches);

/// Closure short-circuit, adaptive budget, up to K verifier-gated sketches with
/// early stopping on the first certified one, then lexicographic selection and
/// closure correction. GeneratorError propagates with the calls made so far.
PipelineResult run_pipeline(const Theory& theory, const Question& question,
                            const PipelineConfig& config, Generator& generator);

/// JSON form of a result, with per-sketch scores when include_sketches is set.
nlohmann::json to_json(const PipelineResult& result, bool include_sketches = true);

}  // namespace proofsketch
