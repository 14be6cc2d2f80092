#include "proofsketch/theory.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "proofsketch/errors.hpp"

namespace proofsketch {

namespace {

using Tokens = std::vector<std::string>;

constexpr std::array kArticles = {std::string_view{"the"}, std::string_view{"a"},
                                  std::string_view{"an"}};

// Words that carry grammatical meaning and can never be a whole symbol.
constexpr std::array kReserved = {
    std::string_view{"is"},   std::string_view{"are"},       std::string_view{"not"},
    std::string_view{"and"},  std::string_view{"if"},        std::string_view{"then"},
    std::string_view{"all"},  std::string_view{"someone"},   std::string_view{"something"},
    std::string_view{"they"}, std::string_view{"it"},        std::string_view{"who"},
    std::string_view{"what"}, std::string_view{"which"},     std::string_view{"people"},
    std::string_view{"things"}};

bool is_reserved(std::string_view word) {
  return std::find(kReserved.begin(), kReserved.end(), word) != kReserved.end();
}

bool is_article(std::string_view word) {
  return std::find(kArticles.begin(), kArticles.end(), word) != kArticles.end();
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool is_trailing_punct(char c) {
  return c == '.' || c == ',' || c == ';' || c == ':' || c == '!' || c == '?' || c == '"' ||
         c == '\'';
}

Tokens split_ws(std::string_view s) {
  Tokens out;
  std::string cur;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

// Lowercases, expands "isn't"/"aren't" and splits commas into their own tokens.
Tokens tokenize_sentence(std::string_view sentence) {
  std::string spaced;
  for (char c : lower(sentence)) {
    if (c == ',') {
      spaced += " , ";
    } else {
      spaced.push_back(c);
    }
  }
  Tokens out;
  for (auto& tok : split_ws(spaced)) {
    if (tok == "isn't" || tok == "isn\xe2\x80\x99t") {
      out.emplace_back("is");
      out.emplace_back("not");
    } else if (tok == "aren't" || tok == "aren\xe2\x80\x99t") {
      out.emplace_back("are");
      out.emplace_back("not");
    } else {
      out.push_back(std::move(tok));
    }
  }
  return out;
}

std::string join(const Tokens& toks, std::size_t begin, std::size_t end, char sep = ' ') {
  std::string out;
  for (std::size_t i = begin; i < end; ++i) {
    if (!out.empty()) out.push_back(sep);
    out += toks[i];
  }
  return out;
}

bool is_copula(const std::string& tok) { return tok == "is" || tok == "are"; }

std::size_t find_token(const Tokens& toks, std::string_view word, std::size_t from = 0) {
  for (std::size_t i = from; i < toks.size(); ++i)
    if (toks[i] == word) return i;
  return toks.size();
}

std::size_t find_copula(const Tokens& toks, std::size_t from = 0) {
  for (std::size_t i = from; i < toks.size(); ++i)
    if (is_copula(toks[i])) return i;
  return toks.size();
}

// Canonicalizes a name or attribute phrase made of plain words.
std::string phrase_symbol(const Tokens& toks, std::size_t begin, std::size_t end,
                          std::size_t sentence, std::string_view what) {
  if (begin >= end) throw ParseError(sentence, "missing " + std::string(what));
  for (std::size_t i = begin; i < end; ++i) {
    if (toks[i] == "," || is_reserved(toks[i]))
      throw ParseError(sentence, "unexpected '" + toks[i] + "' in " + std::string(what));
  }
  try {
    return canonicalize_symbol(join(toks, begin, end));
  } catch (const Error& e) {
    throw ParseError(sentence, e.what());
  }
}

// "[not] <attr words>" over [begin, end).
Condition parse_condition(const Tokens& toks, std::size_t begin, std::size_t end,
                          std::size_t sentence) {
  Condition c;
  if (begin < end && toks[begin] == "not") {
    c.polarity = Polarity::Negative;
    ++begin;
  }
  c.attribute.name = phrase_symbol(toks, begin, end, sentence, "attribute");
  return c;
}

void check_rule(const Rule& rule, std::size_t sentence) {
  if (auto defect = rule_defect(rule); !defect.empty()) throw ParseError(sentence, defect);
}

// Subject reference in a rule head or later conjunct. Pronouns always refer back;
// a name must repeat the rule's own subject.
void check_subject_ref(const Tokens& toks, std::size_t begin, std::size_t end,
                       const std::optional<Entity>& subject, std::size_t sentence) {
  if (end == begin + 1 && (toks[begin] == "they" || toks[begin] == "it")) return;
  if (!subject) throw ParseError(sentence, "universal rule must refer back with 'they' or 'it'");
  if (phrase_symbol(toks, begin, end, sentence, "subject") != subject->name)
    throw ParseError(sentence, "rule refers to a different subject than it binds");
}

// If <subject> is <cond> [and [<ref> is] <cond>]... then <ref> is <cond>
Rule parse_if_rule(const Tokens& toks, std::size_t sentence) {
  const std::size_t then_pos = find_token(toks, "then");
  if (then_pos == toks.size()) throw ParseError(sentence, "conditional without 'then'");
  if (find_token(toks, "then", then_pos + 1) != toks.size())
    throw ParseError(sentence, "more than one 'then'");

  const std::size_t cop = find_copula(toks, 1);
  if (cop >= then_pos) throw ParseError(sentence, "rule body has no 'is'");

  Rule rule;
  if (cop == 2 && (toks[1] == "someone" || toks[1] == "something")) {
    rule.subject.reset();
  } else {
    rule.subject = Entity{phrase_symbol(toks, 1, cop, sentence, "subject")};
  }

  // Split the body after the first copula into conjuncts on "and" / ",".
  std::size_t start = cop + 1;
  for (std::size_t i = start; i <= then_pos; ++i) {
    if (i < then_pos && toks[i] != "and" && toks[i] != ",") continue;
    if (i == start) throw ParseError(sentence, "empty conjunct in rule body");
    std::size_t inner_cop = find_copula(toks, start);
    std::size_t cond_begin = start;
    if (inner_cop < i) {
      check_subject_ref(toks, start, inner_cop, rule.subject, sentence);
      cond_begin = inner_cop + 1;
    }
    rule.body.push_back(parse_condition(toks, cond_begin, i, sentence));
    // "and," and ", and" both separate a single conjunct.
    while (i + 1 < then_pos && (toks[i + 1] == "and" || toks[i + 1] == ",")) ++i;
    start = i + 1;
  }

  const std::size_t head_cop = find_copula(toks, then_pos + 1);
  if (head_cop == toks.size()) throw ParseError(sentence, "rule head has no 'is'");
  check_subject_ref(toks, then_pos + 1, head_cop, rule.subject, sentence);
  rule.head = parse_condition(toks, head_cop + 1, toks.size(), sentence);
  check_rule(rule, sentence);
  return rule;
}

// All <attr>[, <attr>]... (people|things) are [not] <attr>
Rule parse_all_rule(const Tokens& toks, std::size_t sentence) {
  const std::size_t are = find_token(toks, "are");
  if (are == toks.size() || are < 3) throw ParseError(sentence, "malformed 'All ...' rule");
  const std::string& noun = toks[are - 1];
  if (noun != "people" && noun != "things")
    throw ParseError(sentence, "'All ...' rule must quantify over people or things");

  Rule rule;
  std::size_t start = 1;
  for (std::size_t i = 1; i <= are - 1; ++i) {
    if (i < are - 1 && toks[i] != "and" && toks[i] != ",") continue;
    if (i == start) throw ParseError(sentence, "empty attribute in 'All ...' rule");
    rule.body.push_back(parse_condition(toks, start, i, sentence));
    while (i + 1 < are - 1 && (toks[i + 1] == "and" || toks[i + 1] == ",")) ++i;
    start = i + 1;
  }
  rule.head = parse_condition(toks, are + 1, toks.size(), sentence);
  check_rule(rule, sentence);
  return rule;
}

Literal parse_fact_tokens(const Tokens& toks, std::size_t sentence) {
  const std::size_t cop = find_token(toks, "is");
  if (cop == toks.size())
    throw ParseError(sentence, "unsupported sentence form (only unary 'X is [not] A' facts)");
  if (find_copula(toks, cop + 1) != toks.size())
    throw ParseError(sentence, "more than one 'is' in fact");
  Literal lit;
  lit.entity.name = phrase_symbol(toks, 0, cop, sentence, "entity");
  Condition c = parse_condition(toks, cop + 1, toks.size(), sentence);
  lit.attribute = c.attribute;
  lit.polarity = c.polarity;
  return lit;
}

struct Sentence {
  std::string text;
  char terminator;
};

std::vector<Sentence> split_sentences(std::string_view text) {
  std::vector<Sentence> out;
  std::string cur;
  for (char c : text) {
    if (c == '.' || c == '?' || c == '!') {
      out.push_back({cur, c});
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back({cur, '\0'});
  // Drop whitespace-only fragments (between terminators or at the end).
  std::erase_if(out, [](const Sentence& s) { return split_ws(s.text).empty(); });
  return out;
}

const nlohmann::json& require(const nlohmann::json& obj, const std::string& key,
                              const std::string& path) {
  if (!obj.is_object()) throw SchemaError(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(path + "." + key, "missing field");
  return *it;
}

std::string require_string(const nlohmann::json& obj, const std::string& key,
                           const std::string& path) {
  const auto& v = require(obj, key, path);
  if (!v.is_string()) throw SchemaError(path + "." + key, "expected a string");
  return v.get<std::string>();
}

bool require_bool(const nlohmann::json& obj, const std::string& key, const std::string& path) {
  const auto& v = require(obj, key, path);
  if (!v.is_boolean()) throw SchemaError(path + "." + key, "expected a boolean");
  return v.get<bool>();
}

std::string structured_symbol(const std::string& raw, const std::string& path) {
  std::string sym;
  try {
    sym = canonicalize_symbol(raw);
  } catch (const Error& e) {
    throw SchemaError(path, e.what());
  }
  if (is_reserved(sym)) throw SchemaError(path, "'" + sym + "' is a reserved word");
  return sym;
}

Condition structured_condition(const nlohmann::json& obj, const std::string& path) {
  Condition c;
  c.attribute.name = structured_symbol(require_string(obj, "attribute", path), path + ".attribute");
  c.polarity = require_bool(obj, "negated", path) ? Polarity::Negative : Polarity::Positive;
  return c;
}

nlohmann::json condition_json(const Condition& c) {
  return {{"attribute", c.attribute.name}, {"negated", c.polarity == Polarity::Negative}};
}

std::string condition_phrase(const Condition& c) {
  return (c.polarity == Polarity::Negative ? "not " : "") + c.attribute.name;
}

}  // namespace

std::string to_string(const Literal& l) {
  return l.entity.name + (l.polarity == Polarity::Negative ? " is not " : " is ") +
         l.attribute.name;
}

Literal make_literal(std::string_view entity, std::string_view attribute, Polarity polarity) {
  return {Entity{canonicalize_symbol(entity)}, Attribute{canonicalize_symbol(attribute)},
          polarity};
}

std::string rule_defect(const Rule& rule) {
  if (rule.body.empty()) return "rule body is empty";
  std::set<Condition> seen;
  for (const auto& c : rule.body) {
    if (!seen.insert(c).second) return "duplicate body conjunct '" + condition_phrase(c) + "'";
  }
  if (seen.contains(rule.head)) return "rule head also appears in its body";
  return {};
}

std::string to_string(const Rule& rule) {
  std::string out = rule.is_universal() ? "forall x: " : rule.subject->name + ": ";
  for (std::size_t i = 0; i < rule.body.size(); ++i) {
    if (i) out += " & ";
    out += condition_phrase(rule.body[i]);
  }
  return out + " -> " + condition_phrase(rule.head);
}

void Theory::add_fact(const Literal& fact) {
  const auto& opposite = fact.polarity == Polarity::Positive ? negative_ : positive_;
  if (opposite.contains(negate(fact)))
    throw InconsistentFacts("both '" + to_string(fact) + "' and its negation are asserted");
  (fact.polarity == Polarity::Positive ? positive_ : negative_).insert(fact);
}

void Theory::add_rule(Rule rule) {
  if (auto defect = rule_defect(rule); !defect.empty()) throw std::invalid_argument(defect);
  rules_.push_back(std::move(rule));
}

std::vector<Literal> Theory::facts() const {
  std::vector<Literal> out(positive_.begin(), positive_.end());
  out.insert(out.end(), negative_.begin(), negative_.end());
  return out;
}

Vocabulary Theory::vocabulary() const {
  Vocabulary v;
  for (const auto& set : {&positive_, &negative_}) {
    for (const auto& l : *set) {
      v.entities.insert(l.entity);
      v.attributes.insert(l.attribute);
    }
  }
  for (const auto& r : rules_) {
    if (r.subject) v.entities.insert(*r.subject);
    for (const auto& c : r.body) v.attributes.insert(c.attribute);
    v.attributes.insert(r.head.attribute);
  }
  return v;
}

std::string_view to_string(Label label) noexcept {
  switch (label) {
    case Label::True:
      return "True";
    case Label::False:
      return "False";
    case Label::Unknown:
      return "Unknown";
  }
  return "Unknown";
}

std::optional<Label> label_from_string(std::string_view text) {
  const std::string s = lower(text);
  if (s == "true") return Label::True;
  if (s == "false") return Label::False;
  if (s == "unknown") return Label::Unknown;
  return std::nullopt;
}

std::string canonicalize_symbol(std::string_view raw) {
  std::string s = lower(raw);
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  while (!s.empty() && (is_trailing_punct(s.back()) || std::isspace(static_cast<unsigned char>(s.back()))))
    s.pop_back();

  Tokens words;
  for (auto tok : split_ws(s)) {
    std::replace(tok.begin(), tok.end(), '_', '-');
    std::string collapsed;
    for (char c : tok) {
      if (c == '-' && (collapsed.empty() || collapsed.back() == '-')) continue;
      collapsed.push_back(c);
    }
    if (!collapsed.empty() && collapsed.back() == '-') collapsed.pop_back();
    if (!collapsed.empty()) words.push_back(std::move(collapsed));
  }
  std::size_t first = 0;
  while (first < words.size() && is_article(words[first])) ++first;
  if (first == words.size()) throw EmptySymbol(std::string(raw));

  std::string out = join(words, first, words.size(), '-');
  for (char c : out) {
    const auto uc = static_cast<unsigned char>(c);
    if (!(std::islower(uc) || std::isdigit(uc) || c == '-')) throw InvalidSymbol(std::string(raw));
  }
  return out;
}

Theory parse_theory_nl(std::string_view text) {
  Theory theory;
  theory.set_source_text(std::string(text));
  const auto sentences = split_sentences(text);
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const std::size_t index = i + 1;
    if (sentences[i].terminator != '.')
      throw ParseError(index, "sentence must end with a period");
    const Tokens toks = tokenize_sentence(sentences[i].text);
    if (toks.front() == "if") {
      theory.add_rule(parse_if_rule(toks, index));
    } else if (toks.front() == "all") {
      theory.add_rule(parse_all_rule(toks, index));
    } else {
      theory.add_fact(parse_fact_tokens(toks, index));
    }
  }
  return theory;
}

Theory parse_theory_structured(const nlohmann::json& doc) {
  Theory theory;
  const auto& facts = require(doc, "facts", "$");
  if (!facts.is_array()) throw SchemaError("$.facts", "expected an array");
  const auto& rules = require(doc, "rules", "$");
  if (!rules.is_array()) throw SchemaError("$.rules", "expected an array");

  for (std::size_t i = 0; i < facts.size(); ++i) {
    const std::string path = "$.facts[" + std::to_string(i) + "]";
    Literal lit;
    lit.entity.name = structured_symbol(require_string(facts[i], "entity", path), path + ".entity");
    lit.attribute.name =
        structured_symbol(require_string(facts[i], "attribute", path), path + ".attribute");
    lit.polarity = require_bool(facts[i], "negated", path) ? Polarity::Negative : Polarity::Positive;
    theory.add_fact(lit);
  }
  for (std::size_t i = 0; i < rules.size(); ++i) {
    const std::string path = "$.rules[" + std::to_string(i) + "]";
    Rule rule;
    const std::string subject = require_string(rules[i], "subject", path);
    if (subject != "*") rule.subject = Entity{structured_symbol(subject, path + ".subject")};
    const auto& body = require(rules[i], "body", path);
    if (!body.is_array()) throw SchemaError(path + ".body", "expected an array");
    for (std::size_t j = 0; j < body.size(); ++j)
      rule.body.push_back(structured_condition(body[j], path + ".body[" + std::to_string(j) + "]"));
    rule.head = structured_condition(require(rules[i], "head", path), path + ".head");
    if (auto defect = rule_defect(rule); !defect.empty()) throw SchemaError(path, defect);
    theory.add_rule(std::move(rule));
  }
  if (auto it = doc.find("source_text"); it != doc.end() && it->is_string())
    theory.set_source_text(it->get<std::string>());
  return theory;
}

nlohmann::json theory_to_structured(const Theory& theory) {
  nlohmann::json facts = nlohmann::json::array();
  for (const auto& l : theory.facts()) {
    facts.push_back({{"entity", l.entity.name},
                     {"attribute", l.attribute.name},
                     {"negated", l.polarity == Polarity::Negative}});
  }
  nlohmann::json rules = nlohmann::json::array();
  for (const auto& r : theory.rules()) {
    nlohmann::json body = nlohmann::json::array();
    for (const auto& c : r.body) body.push_back(condition_json(c));
    rules.push_back({{"subject", r.subject ? r.subject->name : "*"},
                     {"body", std::move(body)},
                     {"head", condition_json(r.head)}});
  }
  return {{"facts", std::move(facts)}, {"rules", std::move(rules)}};
}

std::string render_theory_nl(const Theory& theory) {
  std::ostringstream out;
  bool first = true;
  auto sep = [&] {
    if (!first) out << ' ';
    first = false;
  };
  for (const auto& l : theory.facts()) {
    sep();
    out << to_string(l) << '.';
  }
  for (const auto& r : theory.rules()) {
    sep();
    const std::string subject = r.subject ? r.subject->name : "someone";
    const std::string ref = r.subject ? r.subject->name : "they";
    out << "If " << subject << " is ";
    for (std::size_t i = 0; i < r.body.size(); ++i) {
      if (i) out << " and ";
      out << condition_phrase(r.body[i]);
    }
    out << " then " << ref << (r.subject ? " is " : " are ") << condition_phrase(r.head) << '.';
  }
  return out.str();
}

Question parse_question(std::string_view text) {
  constexpr std::size_t kIndex = 1;
  std::string body(text);
  while (!body.empty() && std::isspace(static_cast<unsigned char>(body.back()))) body.pop_back();
  bool interrogative = false;
  if (!body.empty() && (body.back() == '?' || body.back() == '.')) {
    interrogative = body.back() == '?';
    body.pop_back();
  }
  const Tokens toks = tokenize_sentence(body);
  if (toks.empty()) throw ParseError(kIndex, "empty question");

  Question q;
  q.raw_text = std::string(text);
  if (toks.front() == "is") {
    // Is <name> [not] <attr>?  Without "not", the attribute is the last word.
    const std::size_t neg = find_token(toks, "not", 1);
    if (neg < toks.size()) {
      q.target.entity.name = phrase_symbol(toks, 1, neg, kIndex, "entity");
      q.target.attribute.name = phrase_symbol(toks, neg + 1, toks.size(), kIndex, "attribute");
      q.target.polarity = Polarity::Negative;
    } else {
      if (toks.size() < 3) throw ParseError(kIndex, "question needs an entity and an attribute");
      q.target.entity.name = phrase_symbol(toks, 1, toks.size() - 1, kIndex, "entity");
      q.target.attribute.name = phrase_symbol(toks, toks.size() - 1, toks.size(), kIndex, "attribute");
    }
    return q;
  }
  if (interrogative) throw ParseError(kIndex, "only yes/no questions of the form 'Is X A?' are supported");
  q.target = parse_fact_tokens(toks, kIndex);
  return q;
}

Theory load_theory_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open theory file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  if (path.size() >= 5 && path.ends_with(".json")) {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw SchemaError("$", e.what());
    }
    return parse_theory_structured(doc);
  }
  return parse_theory_nl(text);
}

}  // namespace proofsketch
