#pragma once

#include <map>
#include <set>

#include <json.hpp>

#include "proofsketch/theory.hpp"

namespace proofsketch {

/// Literals derivable from a theory, with the minimum derivation depth of each.
/// Immutable once returned from forward_chain.
struct Closure {
  std::set<Literal> literals;
  std::map<Literal, int> depth;  // 0 for asserted facts
  bool contradictory = false;
  std::map<Entity, std::set<Literal>> entity_index;

  bool contains(const Literal& l) const { return literals.contains(l); }
};

struct ClosureDecision {
  Label label = Label::Unknown;
  bool decided = false;
};

/// Semi-naive forward chaining to the least fixpoint. Each round only fires rule
/// instances that use at least one literal derived in the previous round, so a
/// literal's round number is its minimum depth.
Closure forward_chain(const Theory& theory);

/// Naive reference: rescans every rule instance until nothing changes.
/// Populates literals and the contradiction flag only.
Closure brute_force_closure(const Theory& theory);

ClosureDecision decide_from_closure(const Closure& closure, const Question& question);

bool entity_has_closure_facts(const Closure& closure, const Entity& entity);

/// {"literals": [{entity, attribute, negated, depth}...], "contradictory": bool}
nlohmann::json closure_to_json(const Closure& closure);

}  // namespace proofsketch
