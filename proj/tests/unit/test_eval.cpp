#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

#include "proofsketch/errors.hpp"
#include "proofsketch/eval.hpp"

using namespace proofsketch;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = PROOFSKETCH_FIXTURE_DIR;

EvalRecord row(Method m, long long tokens, bool correct = true, bool certified = false,
               std::string id = "r") {
  EvalRecord r;
  r.record_id = std::move(id);
  r.method = m;
  r.tokens = tokens;
  r.correct = correct;
  r.certified = certified;
  return r;
}

std::vector<EvalRecord> with_mean(Method m, long long total, int n) {
  std::vector<EvalRecord> out;
  for (int i = 0; i < n; ++i) out.push_back(row(m, total / n + (i < total % n ? 1 : 0)));
  return out;
}

DatasetRecord record(const char* theory, const char* question, Label gold, const char* id = "q") {
  nlohmann::json j = {{"id", id}, {"theory", theory}, {"question", question}, {"answer", to_string(gold)}};
  return parse_dataset_record(j);
}

}  // namespace

TEST_CASE("load_dataset") {
  SUBCASE("valid plus malformed lines") {
    const auto d = load_dataset(kFixtures / "tiny.jsonl");
    CHECK(d.records.size() + d.rejects.size() == d.line_count);
    REQUIRE(d.rejects.size() == 1);
    CHECK(d.rejects[0].line_number == 4);
    CHECK(d.records.size() == 5);
  }
  SUBCASE("one valid line") {
    const auto d = load_dataset_text(
        R"({"id": 1, "theory": "Anne is big.", "question": "Anne is big.", "answer": "true"})");
    REQUIRE(d.records.size() == 1);
    CHECK(d.records[0].id == "1");
    CHECK(d.records[0].gold_label == Label::True);
    CHECK(d.rejects.empty());
  }
  SUBCASE("one valid and one malformed") {
    const auto d = load_dataset_text(
        "{\"id\": \"a\", \"theory\": \"Anne is big.\", \"question\": \"Is Anne big?\", \"answer\": \"False\", \"depth\": 0}\n"
        "{\"id\": \"b\", \"theory\": \"Anne likes Bob.\", \"question\": \"Anne is big.\", \"answer\": \"True\"}\n");
    CHECK(d.records.size() == 1);
    REQUIRE(d.rejects.size() == 1);
    CHECK(d.rejects[0].line_number == 2);
    CHECK(d.records[0].depth == 0);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(load_dataset_text("not json\n{}\n"), EmptyDataset);
    CHECK_THROWS_AS(load_dataset(kFixtures / "does-not-exist.jsonl"), IoError);
  }
}

TEST_CASE("baseline label extraction") {
  CHECK(extract_baseline_label("Answer: True").label == Label::True);
  auto e = extract_baseline_label("Anne is big so False seems likely.\nAnswer: Unknown");
  CHECK(e.label == Label::Unknown);
  CHECK(e.parsed);
  e = extract_baseline_label("Answer: True\nwait, actually false");
  CHECK(e.label == Label::True);
  e = extract_baseline_label("no idea");
  CHECK(e.label == Label::Unknown);
  CHECK_FALSE(e.parsed);
  CHECK(extract_baseline_label("true. no, FALSE").label == Label::False);
}

TEST_CASE("run_baseline") {
  const DatasetRecord r = record("Anne is big.", "Anne is big.", Label::True);
  ScriptedGenerator g({"1. Anne is big.\nAnswer: True", "no idea"});
  auto out = run_baseline(r, BaselineMode::ShortCoT, g);
  CHECK(out.method == Method::ShortCoT);
  CHECK(out.predicted == Label::True);
  CHECK(out.correct);
  CHECK_FALSE(out.certified);
  CHECK(out.tokens == 6);
  CHECK(out.generator_calls == 1);

  const DatasetRecord u = record("Anne is big.", "Anne is kind.", Label::Unknown);
  out = run_baseline(u, BaselineMode::ZeroShot, g);
  CHECK(out.unparseable);
  CHECK(out.predicted == Label::Unknown);
  CHECK_FALSE(out.correct);
}

TEST_CASE("baselines respect their completion budgets") {
  const DatasetRecord r = record("Anne is big.", "Anne is big.", Label::True);
  std::string longest;
  for (int i = 0; i < 500; ++i) longest += "word ";
  ScriptedGenerator g({longest}, ScriptedGenerator::Mode::Cycle);
  const BaselineBudgets b;
  CHECK(run_baseline(r, BaselineMode::ZeroShot, g).tokens == b.zero_shot);
  CHECK(run_baseline(r, BaselineMode::ShortCoT, g).tokens == b.short_cot);
  CHECK(run_baseline(r, BaselineMode::LongCoT, g).tokens == b.long_cot);
}

TEST_CASE("run_proofsketch") {
  SUBCASE("closure-decidable") {
    const DatasetRecord r =
        record("Anne is big. If someone is big then they are kind.", "Anne is kind.", Label::True);
    ScriptedGenerator g({"unused"});
    const auto out = run_proofsketch(r, {}, g);
    CHECK(out.tokens == 0);
    CHECK(out.certified);
    CHECK(out.generator_calls == 0);
    CHECK(out.correct);
    CHECK(out.answer_source == "ClosureShortCircuit");
  }
  SUBCASE("oracle on an undecidable record with entity facts") {
    const DatasetRecord r = record("Anne is big. Anne is young.", "Anne is kind.", Label::Unknown);
    OracleGenerator g(r.theory, r.question, {});
    const auto out = run_proofsketch(r, {}, g);
    CHECK(out.certified);
    CHECK(out.correct);
    CHECK(out.generator_calls == 1);
  }
  SUBCASE("all failed") {
    const DatasetRecord r = record("Anne is big.", "Anne is kind.", Label::Unknown);
    ScriptedGenerator g({"x", "y", "z", "w"});
    const auto out = run_proofsketch(r, {}, g);
    CHECK_FALSE(out.certified);
    CHECK(out.generator_calls == 4);
  }
}

TEST_CASE("p95 nearest rank") {
  std::vector<long long> v(100);
  std::iota(v.begin(), v.end(), 1);
  std::shuffle(v.begin(), v.end(), std::mt19937_64(1));
  CHECK(p95_nearest_rank(v) == 95);
  CHECK(p95_nearest_rank({7}) == 7);
  CHECK(p95_nearest_rank({1, 2}) == 2);
  CHECK(p95_nearest_rank({5, 1, 3, 2, 4, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20}) == 19);
  CHECK_THROWS_AS(p95_nearest_rank({}), EmptyInput);
}

TEST_CASE("compute_metrics") {
  const auto single = compute_metrics({row(Method::ProofSketch, 42, true, true)});
  const auto& m = single.methods.at(Method::ProofSketch);
  CHECK(m.n == 1);
  CHECK(m.accuracy == 1.0);
  CHECK(m.p95_tokens == 42);
  CHECK(m.cert_rate == 1.0);
  CHECK_THROWS_AS(compute_metrics({}), EmptyInput);

  std::mt19937_64 rng(2);
  std::vector<EvalRecord> rows;
  for (int i = 0; i < 60; ++i)
    rows.push_back(row(i % 2 ? Method::ProofSketch : Method::LongCoT, rng() % 400, rng() % 3 != 0, false));
  const std::string before = emit_report(compute_metrics(rows), ReportFormat::Json);
  std::shuffle(rows.begin(), rows.end(), rng);
  CHECK(emit_report(compute_metrics(rows), ReportFormat::Json) == before);

  for (const auto& [method, mm] : compute_metrics(rows).methods) {
    CHECK(mm.accuracy >= 0.0);
    CHECK(mm.accuracy <= 1.0);
    std::vector<long long> t;
    for (const auto& r : rows)
      if (r.method == method) t.push_back(r.tokens);
    std::sort(t.begin(), t.end());
    CHECK(mm.p95_tokens >= static_cast<double>(t[(t.size() - 1) / 2]));
  }
}

TEST_CASE("token savings") {
  std::vector<EvalRecord> rows = with_mean(Method::ProofSketch, 13794, 100);
  auto base = with_mean(Method::LongCoT, 21871, 100);
  rows.insert(rows.end(), base.begin(), base.end());
  const auto report = compute_metrics(rows);
  CHECK(format_percent(token_savings(report, Method::ProofSketch, Method::LongCoT)) == "36.9%");

  std::vector<EvalRecord> qwen = with_mean(Method::ProofSketch, 3028, 100);
  auto qbase = with_mean(Method::LongCoT, 10109, 100);
  qwen.insert(qwen.end(), qbase.begin(), qbase.end());
  CHECK(format_percent(token_savings(compute_metrics(qwen), Method::ProofSketch, Method::LongCoT)) == "70.0%");

  const auto same = compute_metrics({row(Method::ProofSketch, 10), row(Method::ZeroShot, 10)});
  CHECK(token_savings(same, Method::ProofSketch, Method::ZeroShot) == 0.0);

  const auto zero = compute_metrics({row(Method::ProofSketch, 10), row(Method::ZeroShot, 0)});
  CHECK_THROWS_AS(token_savings(zero, Method::ProofSketch, Method::ZeroShot), DivisionByZero);
  CHECK_THROWS_AS(token_savings(zero, Method::ProofSketch, Method::LongCoT), std::out_of_range);
}

TEST_CASE("per-example token savings") {
  std::vector<EvalRecord> rows = {row(Method::ProofSketch, 10, true, false, "a"), row(Method::LongCoT, 20, true, false, "a"),
                                  row(Method::ProofSketch, 30, true, false, "b"), row(Method::LongCoT, 40, true, false, "b")};
  CHECK(token_savings_per_example(rows, Method::ProofSketch, Method::LongCoT) == doctest::Approx(0.375));
}

TEST_CASE("report formats") {
  std::vector<EvalRecord> rows = {row(Method::ProofSketch, 10, true, true), row(Method::ProofSketch, 21, false, false),
                                  row(Method::ZeroShot, 33, true), row(Method::ZeroShot, 12, false)};
  rows[0].latency_ms = 1.234;
  const MetricsReport report = compute_metrics(rows);

  const std::string md = emit_report(report, ReportFormat::Markdown);
  CHECK(md.find("| Method | Acc | Tok | Cert |") != std::string::npos);
  CHECK(md.find("| ProofSketch | 0.50 | 15.50 | 0.50 |") != std::string::npos);

  const std::string csv = emit_report(report, ReportFormat::Csv);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 2 * 5);
  CHECK(csv.find("proofsketch,mean_tokens,15.50") != std::string::npos);

  const std::string json = emit_report(report, ReportFormat::Json);
  const MetricsReport back = load_report_json(nlohmann::json::parse(json));
  CHECK(emit_report(back, ReportFormat::Json) == json);
  CHECK(back.methods.at(Method::ProofSketch).mean_latency_ms == doctest::Approx(0.62));
  REQUIRE(back.savings.size() == 1);
  CHECK(back.savings[0].baseline == Method::ZeroShot);

  CHECK(report_format_from_string("md") == ReportFormat::Markdown);
  CHECK_FALSE(report_format_from_string("xml").has_value());
}

TEST_CASE("eval records round-trip through JSON") {
  EvalRecord r = row(Method::ShortCoT, 17, false);
  r.gold = Label::False;
  r.predicted = Label::True;
  r.unparseable = true;
  r.latency_ms = 3.5;
  r.generator_calls = 1;
  const EvalRecord back = eval_record_from_json(to_json(r));
  CHECK(to_json(back) == to_json(r));
}

TEST_CASE("evaluate is independent of the worker count") {
  const auto d = load_dataset(kFixtures / "tiny.jsonl");
  EvalOptions options;
  options.methods = {Method::ZeroShot, Method::ShortCoT, Method::LongCoT, Method::ProofSketch};
  auto strip = [](std::vector<EvalRecord> rows) {
    std::string out;
    for (auto& r : rows) {
      r.latency_ms = 0;
      out += to_json(r).dump() + "\n";
    }
    return out;
  };
  const auto factory = oracle_generator_factory({0.2, 0.2, 0.2, 5});
  const std::string one = strip(evaluate(d.records, options, factory));
  options.workers = 4;
  CHECK(strip(evaluate(d.records, options, factory)) == one);
  CHECK(std::count(one.begin(), one.end(), '\n') == static_cast<long>(d.records.size() * 4));
}

TEST_CASE("evaluate surfaces generator errors") {
  const auto d = load_dataset(kFixtures / "tiny.jsonl");
  EvalOptions options;
  options.methods = {Method::ZeroShot};
  options.workers = 3;
  CHECK_THROWS_AS(evaluate(d.records, options, shared_generator_factory(scripted_generator({"True"}))),
                  ScriptExhausted);
}

TEST_CASE("budget sweeps and ablation") {
  CHECK(parse_budget_sweep("120:220:20") == std::vector<int>{120, 140, 160, 180, 200, 220});
  CHECK(default_budget_sweep() == std::vector<int>{120, 140, 160, 180, 200, 220});
  CHECK(parse_budget_sweep("120,160") == std::vector<int>{120, 160});
  CHECK_THROWS_AS(parse_budget_sweep("220:120:20"), ConfigError);
  CHECK_THROWS_AS(parse_budget_sweep("a:b:c"), ConfigError);
  CHECK_THROWS_AS(parse_budget_sweep("120:220:0"), ConfigError);

  const auto d = load_dataset(kFixtures / "tiny.jsonl");
  const auto factory = oracle_generator_factory({});
  const auto rows = run_ablation(d.records, {120, 160}, {}, factory);
  REQUIRE(rows.size() == 3);
  const std::string csv = ablation_csv(rows);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  CHECK(csv.starts_with("budget,accuracy,mean_tokens,cert_rate\n120,"));
  CHECK(csv.find("\nadaptive,") != std::string::npos);
  CHECK(ablation_csv(run_ablation(d.records, {120, 160}, {}, factory)) == csv);
}

TEST_CASE("write_run_directory") {
  const fs::path dir = fs::temp_directory_path() / "proofsketch-run-test";
  fs::remove_all(dir);
  const auto rows = std::vector<EvalRecord>{row(Method::ProofSketch, 5, true, true)};
  write_run_directory(dir, {{"k", 1}}, rows, compute_metrics(rows), {{3, "bad"}});
  for (const char* name : {"config.json", "records.jsonl", "metrics.json", "rejects.json"})
    CHECK(fs::exists(dir / name));
  std::ifstream rej(dir / "rejects.json");
  const auto j = nlohmann::json::parse(rej);
  CHECK(j[0]["line"] == 3);
  fs::remove_all(dir);
}

TEST_CASE("stable hash") {
  CHECK(stable_hash("") == 14695981039346656037ULL);
  CHECK(stable_hash("a") == 0xaf63dc4c8601ec8cULL);
}
