#include "proofsketch/closure.hpp"

#include <algorithm>
#include <vector>

namespace proofsketch {

namespace {

bool satisfied(const Rule& rule, const Entity& e, const std::set<Literal>& known) {
  return std::all_of(rule.body.begin(), rule.body.end(), [&](const Condition& c) {
    return known.contains(Literal{e, c.attribute, c.polarity});
  });
}

Literal head_for(const Rule& rule, const Entity& e) {
  return {e, rule.head.attribute, rule.head.polarity};
}

bool has_complement(const std::set<Literal>& literals) {
  return std::any_of(literals.begin(), literals.end(), [&](const Literal& l) {
    return l.polarity == Polarity::Positive && literals.contains(negate(l));
  });
}

}  // namespace

Closure forward_chain(const Theory& theory) {
  Closure out;

  // Rules indexed by each body conjunct they contain.
  std::map<Condition, std::vector<std::size_t>> by_conjunct;
  const auto& rules = theory.rules();
  for (std::size_t r = 0; r < rules.size(); ++r) {
    for (const auto& c : rules[r].body) by_conjunct[c].push_back(r);
  }

  std::vector<Literal> delta = theory.facts();
  for (const auto& f : delta) out.depth[f] = 0;
  out.literals.insert(delta.begin(), delta.end());

  for (int round = 1; !delta.empty(); ++round) {
    std::set<Literal> fresh;
    for (const auto& lit : delta) {
      auto it = by_conjunct.find(Condition{lit.attribute, lit.polarity});
      if (it == by_conjunct.end()) continue;
      for (std::size_t r : it->second) {
        const Rule& rule = rules[r];
        if (rule.subject && *rule.subject != lit.entity) continue;
        const Literal head = head_for(rule, lit.entity);
        if (out.literals.contains(head) || fresh.contains(head)) continue;
        if (satisfied(rule, lit.entity, out.literals)) fresh.insert(head);
      }
    }
    for (const auto& l : fresh) out.depth[l] = round;
    out.literals.insert(fresh.begin(), fresh.end());
    delta.assign(fresh.begin(), fresh.end());
  }

  for (const auto& l : out.literals) {
    out.entity_index[l.entity].insert(l);
    if (l.polarity == Polarity::Positive && out.literals.contains(negate(l))) out.contradictory = true;
  }
  return out;
}

Closure brute_force_closure(const Theory& theory) {
  Closure out;
  const auto facts = theory.facts();
  out.literals.insert(facts.begin(), facts.end());

  std::set<Entity> domain = theory.vocabulary().entities;
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& rule : theory.rules()) {
      std::vector<Entity> targets;
      if (rule.subject) {
        targets.push_back(*rule.subject);
      } else {
        targets.assign(domain.begin(), domain.end());
      }
      for (const auto& e : targets) {
        if (satisfied(rule, e, out.literals) && out.literals.insert(head_for(rule, e)).second)
          changed = true;
      }
    }
  }
  out.contradictory = has_complement(out.literals);
  return out;
}

ClosureDecision decide_from_closure(const Closure& closure, const Question& question) {
  const bool pos = closure.contains(question.target);
  const bool neg = closure.contains(negate(question.target));
  if (pos && !neg) return {Label::True, true};
  if (neg && !pos) return {Label::False, true};
  return {Label::Unknown, false};
}

bool entity_has_closure_facts(const Closure& closure, const Entity& entity) {
  auto it = closure.entity_index.find(entity);
  return it != closure.entity_index.end() && !it->second.empty();
}

nlohmann::json closure_to_json(const Closure& closure) {
  nlohmann::json lits = nlohmann::json::array();
  for (const auto& l : closure.literals) {
    nlohmann::json row = {{"entity", l.entity.name},
                          {"attribute", l.attribute.name},
                          {"negated", l.polarity == Polarity::Negative}};
    if (auto it = closure.depth.find(l); it != closure.depth.end()) row["depth"] = it->second;
    lits.push_back(std::move(row));
  }
  return {{"literals", std::move(lits)}, {"contradictory", closure.contradictory}};
}

}  // namespace proofsketch
