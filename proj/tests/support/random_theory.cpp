#include "random_theory.hpp"

#include <algorithm>
#include <array>
#include <set>
#include <string>

namespace proofsketch::testing {

namespace {

constexpr std::array kEntities = {"anne", "bob", "charlie", "dave", "erin", "fiona"};
constexpr std::array kAttributes = {"big", "kind", "red", "round", "young", "quiet"};

int uniform(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

Polarity polarity(std::mt19937_64& rng) {
  return uniform(rng, 0, 3) == 0 ? Polarity::Negative : Polarity::Positive;
}

}  // namespace

Theory random_theory(std::mt19937_64& rng, const RandomTheoryLimits& limits) {
  const int n_entities = uniform(rng, 1, std::min<int>(limits.max_entities, kEntities.size()));
  const int n_attributes = uniform(rng, 1, std::min<int>(limits.max_attributes, kAttributes.size()));
  auto entity = [&] { return Entity{kEntities[uniform(rng, 0, n_entities - 1)]}; };
  auto attribute = [&] { return Attribute{kAttributes[uniform(rng, 0, n_attributes - 1)]}; };

  Theory t;
  const int n_facts = uniform(rng, 0, limits.max_facts);
  for (int i = 0; i < n_facts; ++i) {
    Literal l{entity(), attribute(), polarity(rng)};
    if (t.positive_facts().contains(negate(l)) || t.negative_facts().contains(negate(l))) continue;
    t.add_fact(l);
  }

  const int n_rules = uniform(rng, 0, limits.max_rules);
  for (int i = 0; i < n_rules; ++i) {
    Rule r;
    if (std::bernoulli_distribution(limits.ground_rule_prob)(rng)) r.subject = entity();
    const int body = uniform(rng, 1, std::min(3, n_attributes * 2));
    std::set<Condition> seen;
    for (int j = 0; j < body; ++j) {
      Condition c{attribute(), polarity(rng)};
      if (seen.insert(c).second) r.body.push_back(c);
    }
    r.head = Condition{attribute(), polarity(rng)};
    if (!rule_defect(r).empty()) continue;
    t.add_rule(std::move(r));
  }
  return t;
}

Theory permuted(const Theory& theory, std::mt19937_64& rng) {
  std::vector<Literal> facts = theory.facts();
  std::vector<Rule> rules = theory.rules();
  std::shuffle(facts.begin(), facts.end(), rng);
  std::shuffle(rules.begin(), rules.end(), rng);
  Theory out;
  for (const auto& f : facts) out.add_fact(f);
  for (auto& r : rules) out.add_rule(std::move(r));
  return out;
}

Question random_question(const Theory& theory, std::mt19937_64& rng) {
  const Vocabulary v = theory.vocabulary();
  std::vector<Entity> es(v.entities.begin(), v.entities.end());
  std::vector<Attribute> as(v.attributes.begin(), v.attributes.end());
  if (es.empty()) es.push_back(Entity{"anne"});
  if (as.empty()) as.push_back(Attribute{"big"});
  Question q;
  q.target = {es[uniform(rng, 0, static_cast<int>(es.size()) - 1)],
              as[uniform(rng, 0, static_cast<int>(as.size()) - 1)], polarity(rng)};
  q.raw_text = to_string(q.target) + ".";
  return q;
}

}  // namespace proofsketch::testing
