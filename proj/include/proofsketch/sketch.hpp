#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "proofsketch/theory.hpp"

namespace proofsketch {

/// Generator output as handed to the pipeline.
struct RawSketch {
  std::string text;
  int token_count = 0;
  double generator_latency_ms = 0.0;
};

enum class ParseStatus : std::uint8_t { Clean, Repaired, Failed };

std::string_view to_string(ParseStatus status) noexcept;

struct ParsedSketch {
  Label answer = Label::Unknown;
  std::vector<Literal> claims;  // canonical, deduplicated; empty when Failed
  ParseStatus parse_status = ParseStatus::Failed;
  int dropped_claims = 0;

  bool operator==(const ParsedSketch&) const = default;
};

/// Parses {"answer": ..., "claims": [...]}, applying the repair pass when the text
/// is not already clean. Claims are canonicalized syntactically only. Never throws.
ParsedSketch parse_sketch(const RawSketch& raw);

/// Full decoding used by the pipeline: parse, resolve claims against the theory
/// vocabulary, keep the claims anchored on the question's entity. A sketch left
/// without claims is Failed.
ParsedSketch parse_sketch(const RawSketch& raw, const Vocabulary& vocabulary,
                          const Question& question);

/// The textual repairs, in order: keep the first balanced {...} span, drop
/// trailing commas, turn smart quotes into plain quotes. Quoted string contents
/// are left untouched.
std::string repair_sketch_text(std::string_view text);

/// "yes"/"no"/"cannot be determined"/... folded onto the three labels.
std::optional<Label> normalize_answer(std::string_view answer);

/// Last whole-word occurrence of true/false/unknown (case-insensitive), else Unknown.
Label scan_answer_keyword(std::string_view text);

/// Syntactic claim parse: "<entity> is [not] <attribute>", contractions expanded.
std::optional<Literal> parse_claim(std::string_view claim_text);

/// parse_claim, then both symbols must already exist in the vocabulary.
/// nullopt means the claim is unmappable and must be dropped.
std::optional<Literal> canonicalize_claim(std::string_view claim_text, const Vocabulary& vocabulary);

/// Claims whose entity is the question's entity, in order, without duplicates.
std::vector<Literal> anchor_claims(const std::vector<Literal>& claims, const Question& question);

}  // namespace proofsketch
