#include "proofsketch/selector.hpp"

#include <algorithm>
#include <chrono>

#include "proofsketch/errors.hpp"

namespace proofsketch {

std::string_view to_string(VerdictStatus s) noexcept {
  switch (s) {
    case VerdictStatus::Verified:
      return "Verified";
    case VerdictStatus::Contradicted:
      return "Contradicted";
    case VerdictStatus::Unsupported:
      return "Unsupported";
  }
  return "Unsupported";
}

std::string_view to_string(Certification c) noexcept {
  switch (c) {
    case Certification::Certified:
      return "Certified";
    case Certification::Partial:
      return "Partial";
    case Certification::Uncertified:
      return "Uncertified";
  }
  return "Uncertified";
}

std::string_view to_string(AnswerSource s) noexcept {
  switch (s) {
    case AnswerSource::ClosureShortCircuit:
      return "ClosureShortCircuit";
    case AnswerSource::CertifiedSketch:
      return "CertifiedSketch";
    case AnswerSource::BestSketch:
      return "BestSketch";
    case AnswerSource::ClosureCorrection:
      return "ClosureCorrection";
  }
  return "BestSketch";
}

void PipelineConfig::validate() const {
  if (max_sketches < 1) throw ConfigError("max_sketches must be at least 1");
  if (budget_anchored < 1 || budget_unanchored < 1) throw ConfigError("budgets must be positive");
  if (!(temperature >= 0.0)) throw ConfigError("temperature must be non-negative");
  if (fixed_budget) {
    if (*fixed_budget < 1) throw ConfigError("fixed_budget must be positive");
    if (adaptive_budget) throw ConfigError("fixed_budget requires adaptive_budget = false");
  } else if (!adaptive_budget) {
    throw ConfigError("adaptive_budget = false requires a fixed_budget");
  }
}

PipelineConfig PipelineConfig::with_fixed_budget(int budget) const {
  PipelineConfig c = *this;
  c.adaptive_budget = false;
  c.fixed_budget = budget;
  return c;
}

PipelineConfig pipeline_config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("pipeline config must be a JSON object");
  PipelineConfig c;
  try {
    c.max_sketches = doc.value("max_sketches", c.max_sketches);
    c.budget_anchored = doc.value("budget_anchored", c.budget_anchored);
    c.budget_unanchored = doc.value("budget_unanchored", c.budget_unanchored);
    c.temperature = doc.value("temperature", c.temperature);
    c.certify_unknown_from_closure =
        doc.value("certify_unknown_from_closure", c.certify_unknown_from_closure);
    c.closure_short_circuit = doc.value("closure_short_circuit", c.closure_short_circuit);
    if (auto it = doc.find("fixed_budget"); it != doc.end() && !it->is_null()) {
      c.fixed_budget = it->get<int>();
      c.adaptive_budget = false;
    }
    c.adaptive_budget = doc.value("adaptive_budget", c.adaptive_budget);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad pipeline config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json to_json(const PipelineConfig& config) {
  return {{"max_sketches", config.max_sketches},
          {"budget_anchored", config.budget_anchored},
          {"budget_unanchored", config.budget_unanchored},
          {"temperature", config.temperature},
          {"adaptive_budget", config.adaptive_budget},
          {"fixed_budget", config.fixed_budget ? nlohmann::json(*config.fixed_budget) : nlohmann::json()},
          {"certify_unknown_from_closure", config.certify_unknown_from_closure},
          {"closure_short_circuit", config.closure_short_circuit}};
}

ClaimVerdict verify_claim(const Literal& claim, const Closure& closure) {
  // A contradictory closure holds both polarities; Contradicted wins.
  if (closure.contains(negate(claim))) return {claim, VerdictStatus::Contradicted};
  if (closure.contains(claim)) return {claim, VerdictStatus::Verified};
  return {claim, VerdictStatus::Unsupported};
}

ScoredSketch score_sketch(const ParsedSketch& parsed, const RawSketch& raw, const Closure& closure,
                          const Question& question) {
  ScoredSketch s{parsed, raw, {}, {}};
  bool contradicted = false;
  for (const auto& c : parsed.claims) {
    s.verdicts.push_back(verify_claim(c, closure));
    if (s.verdicts.back().status == VerdictStatus::Verified) ++s.score.verified_count;
    if (s.verdicts.back().status == VerdictStatus::Contradicted) contradicted = true;
  }
  const bool all_verified = !parsed.claims.empty() &&
                            s.score.verified_count == static_cast<int>(parsed.claims.size());
  s.score.cert = all_verified ? 1 : 0;
  s.score.neg_tokens = -raw.token_count;
  const ClosureDecision decision = decide_from_closure(closure, question);
  const bool agrees = !decision.decided || parsed.answer == decision.label;
  s.score.consistency = (!contradicted && agrees) ? 1 : 0;
  return s;
}

std::strong_ordering compare_scores(const ScoreTuple& a, const ScoreTuple& b) { return a <=> b; }

std::optional<std::size_t> select_best(std::span<const ScoredSketch> sketches) {
  if (sketches.empty()) return std::nullopt;
  std::size_t best = 0;
  for (std::size_t i = 1; i < sketches.size(); ++i) {
    if (compare_scores(sketches[i].score, sketches[best].score) > 0) best = i;
  }
  return best;
}

PipelineResult run_pipeline(const Theory& theory, const Question& question,
                            const PipelineConfig& config, Generator& generator) {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  auto finish = [&](PipelineResult& r) -> PipelineResult& {
    r.latency_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    return r;
  };
  config.validate();

  PipelineResult result;
  const Closure closure = forward_chain(theory);
  result.closure_decision = decide_from_closure(closure, question);
  const bool closure_answers =
      result.closure_decision.decided || config.certify_unknown_from_closure;
  if (closure_answers && config.closure_short_circuit) {
    result.answer = result.closure_decision.label;
    result.certification = Certification::Certified;
    result.answer_source = AnswerSource::ClosureShortCircuit;
    return std::move(finish(result));
  }

  result.budget = select_budget(closure, question, config);
  const Vocabulary vocabulary = theory.vocabulary();
  GenerationRequest request{build_sketch_prompt(theory, question), result.budget,
                            config.temperature, std::nullopt};

  for (int k = 0; k < config.max_sketches; ++k) {
    GenerationResponse resp;
    try {
      resp = generate_within_budget(generator, request);
    } catch (GeneratorError& e) {
      e.set_partial_accounting(result.generator_calls, result.total_generated_tokens);
      throw;
    }
    ++result.generator_calls;
    result.total_generated_tokens += resp.completion_tokens;

    RawSketch raw{std::move(resp.text), resp.completion_tokens, resp.latency_ms};
    ParsedSketch parsed = parse_sketch(raw, vocabulary, question);
    result.sketches.push_back(score_sketch(parsed, raw, closure, question));

    const ScoredSketch& current = result.sketches.back();
    if (current.score.cert == 1) {
      result.selected = result.sketches.size() - 1;
      result.answer = current.parsed.answer;
      result.verified_claims = current.parsed.claims;
      result.certification = Certification::Certified;
      result.answer_source = AnswerSource::CertifiedSketch;
      return std::move(finish(result));
    }
  }

  result.selected = select_best(result.sketches);
  const ScoredSketch& best = result.sketches[*result.selected];
  // Second closure check before answering. With the short-circuit on, nothing has
  // changed since the first check, so this only fires when it is disabled.
  const ClosureDecision recheck = decide_from_closure(closure, question);
  if (recheck.decided) {
    result.answer = recheck.label;
    result.answer_source = AnswerSource::ClosureCorrection;
  } else {
    result.answer = best.parsed.answer;
    result.answer_source = AnswerSource::BestSketch;
  }
  for (const auto& v : best.verdicts) {
    if (v.status == VerdictStatus::Verified) result.verified_claims.push_back(v.claim);
  }
  result.certification =
      best.score.verified_count >= 1 ? Certification::Partial : Certification::Uncertified;
  return std::move(finish(result));
}

nlohmann::json to_json(const PipelineResult& result, bool include_sketches) {
  nlohmann::json claims = nlohmann::json::array();
  for (const auto& c : result.verified_claims) claims.push_back(to_string(c));
  nlohmann::json out = {
      {"answer", to_string(result.answer)},
      {"verified_claims", std::move(claims)},
      {"certification", to_string(result.certification)},
      {"answer_source", to_string(result.answer_source)},
      {"generator_calls", result.generator_calls},
      {"total_generated_tokens", result.total_generated_tokens},
      {"latency_ms", result.latency_ms},
      {"budget", result.budget},
      {"closure_decision",
       {{"label", to_string(result.closure_decision.label)}, {"decided", result.closure_decision.decided}}},
      {"selected", result.selected ? nlohmann::json(*result.selected) : nlohmann::json()}};
  if (include_sketches) {
    nlohmann::json sketches = nlohmann::json::array();
    for (const auto& s : result.sketches) {
      nlohmann::json verdicts = nlohmann::json::array();
      for (const auto& v : s.verdicts)
        verdicts.push_back({{"claim", to_string(v.claim)}, {"status", to_string(v.status)}});
      sketches.push_back({{"text", s.raw.text},
                          {"token_count", s.raw.token_count},
                          {"parse_status", to_string(s.parsed.parse_status)},
                          {"answer", to_string(s.parsed.answer)},
                          {"dropped_claims", s.parsed.dropped_claims},
                          {"verdicts", std::move(verdicts)},
                          {"score",
                           {s.score.cert, s.score.verified_count, s.score.neg_tokens, s.score.consistency}}});
    }
    out["sketches"] = std::move(sketches);
  }
  return out;
}

}  // namespace proofsketch
