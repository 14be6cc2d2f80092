#include "proofsketch/sketch.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include <json.hpp>

#include "proofsketch/errors.hpp"

namespace proofsketch {

namespace {

constexpr std::string_view kLeftDouble = "\xe2\x80\x9c";   // U+201C
constexpr std::string_view kRightDouble = "\xe2\x80\x9d";  // U+201D
constexpr std::string_view kLowDouble = "\xe2\x80\x9e";    // U+201E
constexpr std::string_view kRightSingle = "\xe2\x80\x99";  // U+2019

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string collapse_spaces(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!out.empty() && out.back() != ' ') out.push_back(' ');
    } else {
      out.push_back(c);
    }
  }
  if (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

std::size_t smart_quote_at(std::string_view text, std::size_t i) {
  for (auto q : {kLeftDouble, kRightDouble, kLowDouble}) {
    if (text.substr(i, q.size()) == q) return q.size();
  }
  return 0;
}

// First balanced {...} span, skipping braces inside ASCII-quoted strings.
std::optional<std::string> first_object_span(std::string_view text) {
  const std::size_t open = text.find('{');
  if (open == std::string_view::npos) return std::nullopt;
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}' && --depth == 0) {
      return std::string(text.substr(open, i - open + 1));
    }
  }
  return std::nullopt;
}

std::string drop_trailing_commas(std::string_view text) {
  std::string out;
  bool in_string = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      out.push_back(c);
      if (c == '\\' && i + 1 < text.size()) {
        out.push_back(text[++i]);
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') in_string = true;
    if (c == ',') {
      std::size_t j = i + 1;
      while (j < text.size() && std::isspace(static_cast<unsigned char>(text[j]))) ++j;
      if (j < text.size() && (text[j] == '}' || text[j] == ']')) continue;
    }
    out.push_back(c);
  }
  return out;
}

// Smart double quotes used as delimiters become ASCII quotes. A string opened by a
// smart quote is closed by the next smart (or plain) quote; smart quotes inside a
// plain-quoted string are content and stay.
std::string normalize_smart_quotes(std::string_view text) {
  enum class State { Outside, Plain, Smart } state = State::Outside;
  std::string out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    const std::size_t smart = smart_quote_at(text, i);
    switch (state) {
      case State::Outside:
        if (smart) {
          out.push_back('"');
          i += smart - 1;
          state = State::Smart;
        } else {
          out.push_back(c);
          if (c == '"') state = State::Plain;
        }
        break;
      case State::Plain:
        out.push_back(c);
        if (c == '\\' && i + 1 < text.size()) {
          out.push_back(text[++i]);
        } else if (c == '"') {
          state = State::Outside;
        }
        break;
      case State::Smart:
        if (smart) {
          out.push_back('"');
          i += smart - 1;
          state = State::Outside;
        } else if (c == '"') {
          out.push_back('"');
          state = State::Outside;
        } else {
          out.push_back(c);
        }
        break;
    }
  }
  return out;
}

std::optional<nlohmann::json> try_parse(const std::string& text) {
  auto doc = nlohmann::json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded() || !doc.is_object()) return std::nullopt;
  return doc;
}

// The JSON-level view of a sketch before claims are interpreted.
struct Decoded {
  ParseStatus status = ParseStatus::Failed;  // Clean / Repaired when the schema matched
  std::optional<Label> answer;
  std::vector<std::string> claim_texts;
  int non_string_claims = 0;
};

bool read_schema(const nlohmann::json& doc, bool strict_answer, Decoded& out) {
  auto a = doc.find("answer");
  if (a == doc.end() || !a->is_string()) return false;
  const auto answer_text = a->get<std::string>();
  out.answer = normalize_answer(answer_text);
  if (!out.answer) return false;
  if (strict_answer && answer_text != to_string(*out.answer)) return false;

  auto c = doc.find("claims");
  if (c == doc.end() || !c->is_array()) return false;
  out.claim_texts.clear();
  out.non_string_claims = 0;
  for (const auto& item : *c) {
    if (item.is_string()) {
      out.claim_texts.push_back(item.get<std::string>());
    } else {
      ++out.non_string_claims;
    }
  }
  return true;
}

Decoded decode(std::string_view text) {
  Decoded d;
  if (auto doc = try_parse(std::string(text)); doc && read_schema(*doc, true, d)) {
    d.status = ParseStatus::Clean;
    return d;
  }
  if (auto doc = try_parse(repair_sketch_text(text)); doc && read_schema(*doc, false, d)) {
    d.status = ParseStatus::Repaired;
    return d;
  }
  d.status = ParseStatus::Failed;
  return d;
}

template <class ClaimFn>
ParsedSketch build(const RawSketch& raw, ClaimFn&& to_literal,
                   const Question* anchor_on) {
  const Decoded d = decode(raw.text);
  ParsedSketch out;
  // Failed sketches fall back to the keyword scan over the whole text.
  out.answer = scan_answer_keyword(raw.text);
  if (d.status == ParseStatus::Failed) return out;

  std::vector<Literal> claims;
  int dropped = d.non_string_claims;
  for (const auto& t : d.claim_texts) {
    if (auto lit = to_literal(t)) {
      claims.push_back(*lit);
    } else {
      ++dropped;
    }
  }
  if (anchor_on) {
    const auto before = std::count_if(claims.begin(), claims.end(), [&](const Literal& l) {
      return l.entity != anchor_on->target.entity;
    });
    dropped += static_cast<int>(before);
    claims = anchor_claims(claims, *anchor_on);
  } else {
    std::set<Literal> seen;
    std::erase_if(claims, [&](const Literal& l) { return !seen.insert(l).second; });
  }

  out.dropped_claims = dropped;
  if (claims.empty()) return out;
  out.answer = *d.answer;
  out.claims = std::move(claims);
  out.parse_status = d.status;
  return out;
}

}  // namespace

std::string_view to_string(ParseStatus status) noexcept {
  switch (status) {
    case ParseStatus::Clean:
      return "Clean";
    case ParseStatus::Repaired:
      return "Repaired";
    case ParseStatus::Failed:
      return "Failed";
  }
  return "Failed";
}

std::string repair_sketch_text(std::string_view text) {
  std::string s = first_object_span(text).value_or(std::string(text));
  s = drop_trailing_commas(s);
  return normalize_smart_quotes(s);
}

std::optional<Label> normalize_answer(std::string_view answer) {
  std::string a = lower(collapse_spaces(trim(answer)));
  while (!a.empty() && (a.back() == '.' || a.back() == '!')) a.pop_back();
  if (auto l = label_from_string(a)) return l;
  if (a == "yes") return Label::True;
  if (a == "no") return Label::False;
  if (a == "cannot be determined" || a == "unproven" || a == "uncertain") return Label::Unknown;
  return std::nullopt;
}

Label scan_answer_keyword(std::string_view text) {
  Label found = Label::Unknown;
  std::string word;
  auto flush = [&] {
    if (auto l = label_from_string(word)) found = *l;
    word.clear();
  };
  for (char c : text) {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      word.push_back(c);
    } else {
      flush();
    }
  }
  flush();
  return found;
}

std::optional<Literal> parse_claim(std::string_view claim_text) {
  std::string s = lower(trim(claim_text));
  for (std::string_view q : {kRightSingle}) {
    for (std::size_t p; (p = s.find(q)) != std::string::npos;) s.replace(p, q.size(), "'");
  }
  while (!s.empty() && (s.back() == '.' || s.back() == '!')) s.pop_back();
  s = " " + collapse_spaces(s) + " ";
  for (std::size_t p; (p = s.find(" isn't ")) != std::string::npos;) s.replace(p, 7, " is not ");

  const std::size_t is = s.find(" is ");
  if (is == std::string::npos) return std::nullopt;
  std::string entity = s.substr(0, is);
  std::string rest = s.substr(is + 4);
  Polarity polarity = Polarity::Positive;
  if (rest.starts_with("not ")) {
    polarity = Polarity::Negative;
    rest = rest.substr(4);
  }
  // One copula, no conjunctions: anything else is not an atomic claim.
  const std::string padded = " " + rest;
  for (std::string_view bad : {" is ", " not ", " and ", " are "}) {
    if (padded.find(bad) != std::string::npos) return std::nullopt;
  }
  try {
    return Literal{Entity{canonicalize_symbol(entity)}, Attribute{canonicalize_symbol(rest)},
                   polarity};
  } catch (const Error&) {
    return std::nullopt;
  }
}

std::optional<Literal> canonicalize_claim(std::string_view claim_text, const Vocabulary& vocabulary) {
  auto lit = parse_claim(claim_text);
  if (!lit || !vocabulary.entities.contains(lit->entity) ||
      !vocabulary.attributes.contains(lit->attribute))
    return std::nullopt;
  return lit;
}

std::vector<Literal> anchor_claims(const std::vector<Literal>& claims, const Question& question) {
  std::vector<Literal> out;
  std::set<Literal> seen;
  for (const auto& c : claims) {
    if (c.entity == question.target.entity && seen.insert(c).second) out.push_back(c);
  }
  return out;
}

ParsedSketch parse_sketch(const RawSketch& raw) {
  return build(raw, [](const std::string& t) { return parse_claim(t); }, nullptr);
}

ParsedSketch parse_sketch(const RawSketch& raw, const Vocabulary& vocabulary,
                          const Question& question) {
  return build(
      raw, [&](const std::string& t) { return canonicalize_claim(t, vocabulary); }, &question);
}

}  // namespace proofsketch
