#include <doctest.h>

#include <random>

#include "proofsketch/errors.hpp"
#include "proofsketch/selector.hpp"
#include "random_theory.hpp"

using namespace proofsketch;

namespace {

Literal pos(const char* e, const char* a) { return make_literal(e, a, Polarity::Positive); }
Literal neg(const char* e, const char* a) { return make_literal(e, a, Polarity::Negative); }

Closure closure_of(std::initializer_list<Literal> lits) {
  Theory t;
  for (const auto& l : lits) t.add_fact(l);
  return forward_chain(t);
}

ScoredSketch scored(ScoreTuple s) {
  ScoredSketch out;
  out.score = s;
  return out;
}

// Raises after a fixed number of successful calls.
class Failing final : public Generator {
 public:
  explicit Failing(int ok) : ok_(ok) {}
  GenerationResponse generate(const GenerationRequest&) override {
    if (calls_++ >= ok_) throw GeneratorError("backend down", 503);
    return {"not json at all", 4, 0.0, 0};
  }
  std::string name() const override { return "failing"; }

 private:
  int ok_;
  int calls_ = 0;
};

}  // namespace

TEST_CASE("verify_claim") {
  const Closure c = closure_of({pos("anne", "kind")});
  CHECK(verify_claim(pos("anne", "kind"), c).status == VerdictStatus::Verified);
  CHECK(verify_claim(neg("anne", "kind"), c).status == VerdictStatus::Contradicted);
  CHECK(verify_claim(pos("bob", "nice"), c).status == VerdictStatus::Unsupported);

  const Closure both =
      forward_chain(parse_theory_nl("Anne is big. Anne is not kind. If someone is big then they are kind."));
  CHECK(verify_claim(pos("anne", "kind"), both).status == VerdictStatus::Contradicted);
}

TEST_CASE("score_sketch") {
  const Closure c = closure_of({pos("anne", "big"), pos("anne", "kind")});
  const Question undecided{pos("anne", "nice"), ""};

  ParsedSketch p{Label::True, {pos("anne", "big"), pos("anne", "kind")}, ParseStatus::Clean, 0};
  CHECK(score_sketch(p, RawSketch{"", 50, 0}, c, undecided).score == ScoreTuple{1, 2, -50, 1});

  p.claims = {pos("anne", "big"), pos("anne", "round")};
  CHECK(score_sketch(p, RawSketch{"", 30, 0}, c, undecided).score == ScoreTuple{0, 1, -30, 1});

  const Question decided_false{neg("anne", "kind"), ""};
  p.claims = {pos("anne", "big")};
  CHECK(score_sketch(p, RawSketch{"", 10, 0}, c, decided_false).score == ScoreTuple{1, 1, -10, 0});

  p.claims = {neg("anne", "big")};
  CHECK(score_sketch(p, RawSketch{"", 10, 0}, c, undecided).score == ScoreTuple{0, 0, -10, 0});

  const ParsedSketch failed{};
  const auto f = score_sketch(failed, RawSketch{"junk", 1, 0}, c, undecided);
  CHECK(f.score.cert == 0);
  CHECK(f.score.verified_count == 0);
  CHECK(f.verdicts.empty());
}

TEST_CASE("compare_scores examples") {
  CHECK(compare_scores({1, 1, -100, 0}, {0, 5, -10, 1}) > 0);
  CHECK(compare_scores({0, 3, -80, 1}, {0, 3, -40, 1}) < 0);
  CHECK(compare_scores({0, 3, -40, 1}, {0, 3, -40, 1}) == 0);

  std::vector<ScoredSketch> s = {scored({0, 3, -40, 1}), scored({0, 3, -40, 1})};
  CHECK(select_best(s) == 0u);
  s = {scored({0, 3, -80, 1}), scored({0, 3, -40, 1}), scored({0, 3, -40, 1})};
  CHECK(select_best(s) == 1u);
  CHECK_FALSE(select_best({}).has_value());
}

TEST_CASE("config validation and JSON") {
  PipelineConfig c;
  CHECK_NOTHROW(c.validate());
  c.fixed_budget = 140;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.adaptive_budget = false;
  CHECK_NOTHROW(c.validate());
  c.fixed_budget.reset();
  CHECK_THROWS_AS(c.validate(), ConfigError);

  const PipelineConfig fixed = PipelineConfig{}.with_fixed_budget(200);
  const PipelineConfig back = pipeline_config_from_json(to_json(fixed));
  CHECK(back.fixed_budget == 200);
  CHECK_FALSE(back.adaptive_budget);
  CHECK(pipeline_config_from_json(nlohmann::json::parse(R"({"fixed_budget": 160})")).fixed_budget == 160);
  CHECK_THROWS_AS(pipeline_config_from_json(nlohmann::json::parse(R"({"max_sketches": 0})")), ConfigError);
  CHECK_THROWS_AS(pipeline_config_from_json(nlohmann::json::parse(R"({"temperature": "hot"})")), ConfigError);
}

TEST_CASE("run_pipeline examples") {
  SUBCASE("closure short-circuit") {
    ScriptedGenerator g({"unused"});
    const auto r = run_pipeline(parse_theory_nl("Anne is big. If someone is big then they are kind."),
                                parse_question("Anne is kind."), {}, g);
    CHECK(r.answer == Label::True);
    CHECK(r.verified_claims.empty());
    CHECK(r.certification == Certification::Certified);
    CHECK(r.answer_source == AnswerSource::ClosureShortCircuit);
    CHECK(r.generator_calls == 0);
    CHECK(g.calls() == 0);
  }
  SUBCASE("early stop after one call") {
    ScriptedGenerator g({R"({"answer":"Unknown","claims":["Anne is big"]})", "unused"});
    const auto r = run_pipeline(parse_theory_nl("Anne is big."), parse_question("Anne is kind."), {}, g);
    CHECK(r.answer == Label::Unknown);
    CHECK(r.certification == Certification::Certified);
    CHECK(r.answer_source == AnswerSource::CertifiedSketch);
    CHECK(r.generator_calls == 1);
    CHECK(r.verified_claims == std::vector<Literal>{pos("anne", "big")});
    CHECK(r.budget == 120);
  }
  SUBCASE("all sketches failed") {
    ScriptedGenerator g({"False, I guess", "hmm", "maybe true", "no idea"});
    const auto r = run_pipeline(parse_theory_nl("Anne is big."), parse_question("Bob is kind."), {}, g);
    CHECK(r.generator_calls == 4);
    CHECK(r.certification == Certification::Uncertified);
    CHECK(r.answer_source == AnswerSource::BestSketch);
    // Scores tie on cert and verified count; "hmm" has the fewest tokens.
    CHECK(r.selected == 1u);
    CHECK(r.answer == Label::Unknown);
    CHECK(r.budget == 160);
    CHECK(r.total_generated_tokens == 3 + 1 + 2 + 2);
  }
  SUBCASE("certify_unknown_from_closure extension") {
    ScriptedGenerator g({"unused"});
    PipelineConfig c;
    c.certify_unknown_from_closure = true;
    const auto r = run_pipeline(parse_theory_nl("Anne is big."), parse_question("Anne is kind."), c, g);
    CHECK(r.answer == Label::Unknown);
    CHECK(r.certification == Certification::Certified);
    CHECK(r.generator_calls == 0);
  }
}

TEST_CASE("generator errors carry partial accounting") {
  Failing g(2);
  try {
    run_pipeline(parse_theory_nl("Anne is big."), parse_question("Anne is kind."), {}, g);
    FAIL("expected GeneratorError");
  } catch (const GeneratorError& e) {
    CHECK(e.calls_made() == 2);
    CHECK(e.tokens_generated() == 8);
    CHECK(e.http_status() == 503);
  }
}

TEST_CASE("pipeline invariants under a noisy oracle") {
  std::mt19937_64 rng(17);
  const PipelineConfig config;
  for (int i = 0; i < 300; ++i) {
    const Theory t = testing::random_theory(rng);
    const Question q = testing::random_question(t, rng);
    OracleGenerator g(t, q, {0.3, 0.3, 0.3, rng()});
    const auto r = run_pipeline(t, q, config, g);
    const Closure c = forward_chain(t);
    const auto d = decide_from_closure(c, q);

    CHECK(r.generator_calls <= config.max_sketches);
    if (d.decided) {
      CHECK(r.generator_calls == 0);
      CHECK(r.answer == d.label);
      CHECK(r.certification == Certification::Certified);
    }
    long long tokens = 0;
    for (const auto& s : r.sketches) tokens += s.raw.token_count;
    CHECK(tokens == r.total_generated_tokens);
    CHECK(r.sketches.size() == static_cast<std::size_t>(r.generator_calls));
    if (r.certification == Certification::Certified) {
      CHECK((r.answer_source == AnswerSource::ClosureShortCircuit ||
             r.answer_source == AnswerSource::CertifiedSketch));
      if (r.selected) {
        for (const auto& claim : r.sketches[*r.selected].parsed.claims) CHECK(c.contains(claim));
        // Early stopping: the certified sketch is the last one drawn.
        CHECK(*r.selected + 1 == r.sketches.size());
      }
    } else {
      CHECK(r.generator_calls == config.max_sketches);
    }
    if (r.answer_source == AnswerSource::ClosureShortCircuit) CHECK(r.verified_claims.empty());
    if (r.selected) {
      for (const auto& v : r.verified_claims) {
        const auto& claims = r.sketches[*r.selected].parsed.claims;
        CHECK(std::find(claims.begin(), claims.end(), v) != claims.end());
      }
    }
  }
}

TEST_CASE("run_pipeline is deterministic for a deterministic generator") {
  const Theory t = parse_theory_nl("Anne is big. Bob is red. If someone is red then they are round.");
  const Question q = parse_question("Bob is kind.");
  auto run = [&] {
    OracleGenerator g(t, q, {0.5, 0.5, 0.5, 42});
    auto j = to_json(run_pipeline(t, q, {}, g));
    j.erase("latency_ms");
    return j.dump();
  };
  CHECK(run() == run());
}

TEST_CASE("result JSON carries the audit trail") {
  ScriptedGenerator g({R"({"answer":"True","claims":["Anne is round"]})", R"({"answer":"True","claims":["Anne is big"]})"});
  const auto r = run_pipeline(parse_theory_nl("Anne is big. Anne is not round."), parse_question("Anne is kind."), {}, g);
  const auto j = to_json(r);
  CHECK(j["answer_source"] == "CertifiedSketch");
  REQUIRE(j["sketches"].size() == 2);
  CHECK(j["sketches"][0]["verdicts"][0]["status"] == "Contradicted");
  CHECK(j["sketches"][0]["score"] == nlohmann::json::array({0, 0, -3, 0}));
  CHECK(j["sketches"][1]["score"] == nlohmann::json::array({1, 1, -3, 1}));
  CHECK_FALSE(to_json(r, false).contains("sketches"));
}
