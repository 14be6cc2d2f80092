#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace proofsketch {

/// Canonical symbol: lowercase, hyphen-joined, [a-z0-9-] only.
/// Tag keeps entities and attributes from being mixed up.
template <class Tag>
struct Symbol {
  std::string name;

  auto operator<=>(const Symbol&) const = default;
};

struct EntityTag {};
struct AttributeTag {};
using Entity = Symbol<EntityTag>;
using Attribute = Symbol<AttributeTag>;

enum class Polarity : std::uint8_t { Positive, Negative };

constexpr Polarity negate(Polarity p) noexcept {
  return p == Polarity::Positive ? Polarity::Negative : Polarity::Positive;
}

struct Literal {
  Entity entity;
  Attribute attribute;
  Polarity polarity = Polarity::Positive;

  auto operator<=>(const Literal&) const = default;
};

inline Literal negate(const Literal& l) { return {l.entity, l.attribute, negate(l.polarity)}; }

/// "anne is kind" / "anne is not kind"
std::string to_string(const Literal& l);

/// Builds a literal from raw names, canonicalizing both.
Literal make_literal(std::string_view entity, std::string_view attribute,
                     Polarity polarity = Polarity::Positive);

/// One (attribute, polarity) conjunct of a rule body, or a rule head.
struct Condition {
  Attribute attribute;
  Polarity polarity = Polarity::Positive;

  auto operator<=>(const Condition&) const = default;
};

struct Rule {
  std::optional<Entity> subject;  // nullopt: universally quantified
  std::vector<Condition> body;
  Condition head;

  bool is_universal() const noexcept { return !subject.has_value(); }
  bool operator==(const Rule&) const = default;
};

/// Returns an empty string when the rule is well formed, else the violated invariant.
std::string rule_defect(const Rule& rule);

std::string to_string(const Rule& rule);

/// Entities and attributes a theory mentions.
struct Vocabulary {
  std::set<Entity> entities;
  std::set<Attribute> attributes;
};

class Theory {
 public:
  Theory() = default;

  /// Inserts into F+ or F- by polarity. Throws InconsistentFacts when the
  /// opposite polarity is already asserted.
  void add_fact(const Literal& fact);
  /// Throws std::invalid_argument if rule_defect(rule) is non-empty.
  void add_rule(Rule rule);
  void set_source_text(std::string text) { source_text_ = std::move(text); }

  const std::set<Literal>& positive_facts() const noexcept { return positive_; }
  const std::set<Literal>& negative_facts() const noexcept { return negative_; }
  const std::vector<Rule>& rules() const noexcept { return rules_; }
  const std::string& source_text() const noexcept { return source_text_; }

  /// All asserted facts, positive then negative.
  std::vector<Literal> facts() const;
  Vocabulary vocabulary() const;

  /// Facts compared as sets, rules as lists; source text is ignored.
  bool operator==(const Theory& other) const {
    return positive_ == other.positive_ && negative_ == other.negative_ && rules_ == other.rules_;
  }

 private:
  std::set<Literal> positive_;
  std::set<Literal> negative_;
  std::vector<Rule> rules_;
  std::string source_text_;
};

enum class Label : std::uint8_t { True, False, Unknown };

std::string_view to_string(Label label) noexcept;
/// Case-insensitive "true"/"false"/"unknown".
std::optional<Label> label_from_string(std::string_view text);

struct Question {
  Literal target;
  std::string raw_text;

  bool operator==(const Question& other) const { return target == other.target; }
};

// Parsing

/// Lowercases, strips leading articles and trailing punctuation, and joins
/// words with hyphens. Throws EmptySymbol or InvalidSymbol.
std::string canonicalize_symbol(std::string_view raw);

/// Parses the unary ProofWriter fragment. Throws ParseError or InconsistentFacts.
Theory parse_theory_nl(std::string_view text);

/// Parses {"facts": [...], "rules": [...]}. Throws SchemaError or InconsistentFacts.
Theory parse_theory_structured(const nlohmann::json& doc);

nlohmann::json theory_to_structured(const Theory& theory);

/// Renders a theory as sentences accepted by parse_theory_nl.
std::string render_theory_nl(const Theory& theory);

/// Accepts "X is [not] A." and "Is X [not] A?". Throws ParseError.
Question parse_question(std::string_view text);

/// Reads a theory file: `*.json` goes through the structured parser, anything else NL.
Theory load_theory_file(const std::string& path);

}  // namespace proofsketch
