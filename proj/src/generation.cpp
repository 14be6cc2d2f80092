#include "proofsketch/generation.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <sstream>

#include "proofsketch/errors.hpp"
#include "proofsketch/selector.hpp"

namespace proofsketch {

namespace {

// Platform-independent uniform draw in [0, 1).
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::string theory_text(const Theory& theory) {
  return theory.source_text().empty() ? render_theory_nl(theory) : theory.source_text();
}

std::string question_text(const Question& question) {
  return question.raw_text.empty() ? to_string(question.target) + "." : question.raw_text;
}

std::string json_quote(std::string_view s) { return nlohmann::json(std::string(s)).dump(); }

}  // namespace

GenerationResponse SerializedGenerator::generate(const GenerationRequest& request) {
  std::lock_guard lock(mu_);
  return inner_->generate(request);
}

std::shared_ptr<Generator> make_concurrent(std::shared_ptr<Generator> generator) {
  if (generator->is_concurrent()) return generator;
  return std::make_shared<SerializedGenerator>(std::move(generator));
}

int whitespace_token_count(std::string_view text) {
  int n = 0;
  bool in_token = false;
  for (char c : text) {
    const bool space = std::isspace(static_cast<unsigned char>(c));
    if (!space && !in_token) ++n;
    in_token = !space;
  }
  return n;
}

std::string truncate_to_tokens(std::string_view text, int max_tokens) {
  int n = 0;
  bool in_token = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const bool space = std::isspace(static_cast<unsigned char>(text[i]));
    if (!space && !in_token && ++n > max_tokens) {
      std::size_t end = i;
      while (end > 0 && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
      return std::string(text.substr(0, end));
    }
    in_token = !space;
  }
  return std::string(text);
}

GenerationResponse generate_within_budget(Generator& generator, const GenerationRequest& request) {
  GenerationResponse resp = generator.generate(request);
  resp.completion_tokens = std::max(resp.completion_tokens, 0);
  if (resp.completion_tokens > request.max_tokens) {
    resp.text = truncate_to_tokens(resp.text, request.max_tokens);
    resp.completion_tokens = whitespace_token_count(resp.text);
  }
  return resp;
}

std::string_view to_string(BaselineMode mode) noexcept {
  switch (mode) {
    case BaselineMode::ZeroShot:
      return "zero-shot";
    case BaselineMode::ShortCoT:
      return "short-cot";
    case BaselineMode::LongCoT:
      return "long-cot";
  }
  return "zero-shot";
}

std::string build_sketch_prompt(const Theory& theory, const Question& question) {
  std::ostringstream p;
  p << "Theory:\n"
    << theory_text(theory) << "\n\n"
    << "Question: " << question_text(question) << "\n"
    << "Decide whether the question's statement is True, False, or Unknown given only the theory.\n\n"
    << "Reply with a single JSON object and nothing else, using exactly this schema:\n"
    << "{\"answer\": \"True\" | \"False\" | \"Unknown\", \"claims\": [\"<entity> is <attribute>\", ...]}\n\n"
    << "Requirements:\n"
    << "- \"answer\" must be exactly one of True, False, Unknown.\n"
    << "- \"claims\" lists at most 3 short atomic claims supporting the answer.\n"
    << "- Each claim must read \"<entity> is <attribute>\" or \"<entity> is not <attribute>\", "
       "using names from the theory.\n"
    << "- Only make claims about " << question.target.entity.name << ".\n";
  return p.str();
}

std::string build_baseline_prompt(const Theory& theory, const Question& question, BaselineMode mode) {
  std::ostringstream p;
  p << "Theory:\n"
    << theory_text(theory) << "\n\n"
    << "Question: " << question_text(question) << "\n"
    << "Decide whether the question's statement is True, False, or Unknown given only the theory.\n";
  switch (mode) {
    case BaselineMode::ZeroShot:
      p << "Reply with exactly one of True, False, Unknown and nothing else.\n";
      break;
    case BaselineMode::ShortCoT:
      p << "Write at most 3 concise reasoning lines, then a final line \"Answer: <label>\" "
           "where <label> is exactly one of True, False, Unknown.\n";
      break;
    case BaselineMode::LongCoT:
      p << "Reason step by step in at most 10 numbered steps, then a final line \"Answer: <label>\" "
           "where <label> is exactly one of True, False, Unknown.\n";
      break;
  }
  return p.str();
}

ScriptedGenerator::ScriptedGenerator(std::vector<std::string> script, Mode mode)
    : script_(std::move(script)), mode_(mode) {
  if (script_.empty()) throw std::invalid_argument("scripted generator needs at least one response");
}

GenerationResponse ScriptedGenerator::generate(const GenerationRequest&) {
  std::lock_guard lock(mu_);
  if (next_ >= script_.size() && mode_ == Mode::Strict) throw ScriptExhausted(script_.size());
  const std::string& text = script_[next_ % script_.size()];
  ++next_;
  return {text, whitespace_token_count(text), 0.0, 0};
}

std::size_t ScriptedGenerator::calls() const {
  std::lock_guard lock(mu_);
  return next_;
}

std::shared_ptr<Generator> scripted_generator(std::vector<std::string> script,
                                              ScriptedGenerator::Mode mode) {
  return std::make_shared<ScriptedGenerator>(std::move(script), mode);
}

OracleGenerator::OracleGenerator(const Theory& theory, const Question& question,
                                 OracleNoiseConfig noise)
    : noise_(noise), rng_(noise.seed) {
  for (double p : {noise.flip_answer_prob, noise.corrupt_claim_prob, noise.malform_prob}) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("oracle noise probabilities must lie in [0, 1]");
  }
  const Closure closure = forward_chain(theory);
  truth_ = decide_from_closure(closure, question).label;
  if (auto it = closure.entity_index.find(question.target.entity); it != closure.entity_index.end()) {
    evidence_.assign(it->second.begin(), it->second.end());
    std::stable_sort(evidence_.begin(), evidence_.end(), [&](const Literal& a, const Literal& b) {
      return closure.depth.at(a) < closure.depth.at(b);
    });
    if (evidence_.size() > kMaxClaims) evidence_.resize(kMaxClaims);
  }
}

GenerationResponse OracleGenerator::generate(const GenerationRequest&) {
  const auto start = std::chrono::steady_clock::now();
  std::string text;
  {
    std::lock_guard lock(mu_);
    // Fixed number of draws per call keeps streams aligned across noise levels.
    const double u_malform = unit(rng_);
    const double u_variant = unit(rng_);
    const double u_flip = unit(rng_);
    const double u_flip_to = unit(rng_);
    double u_claims[kMaxClaims];
    for (auto& u : u_claims) u = unit(rng_);

    Label answer = truth_;
    if (u_flip < noise_.flip_answer_prob) {
      static constexpr Label kLabels[] = {Label::True, Label::False, Label::Unknown};
      Label others[2];
      int k = 0;
      for (Label l : kLabels)
        if (l != truth_) others[k++] = l;
      answer = others[u_flip_to < 0.5 ? 0 : 1];
    }

    std::vector<std::string> claims;
    for (std::size_t i = 0; i < evidence_.size(); ++i) {
      const Literal lit = u_claims[i] < noise_.corrupt_claim_prob ? negate(evidence_[i]) : evidence_[i];
      claims.push_back(to_string(lit));
    }

    std::string body = "{\"answer\": " + json_quote(to_string(answer)) + ", \"claims\": [";
    for (std::size_t i = 0; i < claims.size(); ++i) {
      if (i) body += ", ";
      body += json_quote(claims[i]);
    }
    body += "]}";

    if (u_malform < noise_.malform_prob) {
      if (u_variant < 0.5) {
        text = "I believe the statement is " + std::string(to_string(answer)) + ".";
      } else {
        text = body.substr(0, body.size() - 2);  // truncated object
      }
    } else {
      text = std::move(body);
    }
  }
  const double ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  const int tokens = whitespace_token_count(text);
  return {std::move(text), tokens, ms, 0};
}

std::shared_ptr<Generator> oracle_generator(const Theory& theory, const Question& question,
                                            OracleNoiseConfig noise) {
  return std::make_shared<OracleGenerator>(theory, question, noise);
}

int select_budget(const Closure& closure, const Question& question, const PipelineConfig& config) {
  if (config.fixed_budget && !config.adaptive_budget) return *config.fixed_budget;
  return entity_has_closure_facts(closure, question.target.entity) ? config.budget_anchored
                                                                   : config.budget_unanchored;
}

}  // namespace proofsketch
