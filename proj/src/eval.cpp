#include "proofsketch/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "proofsketch/errors.hpp"

namespace proofsketch {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view display_name(Method m) {
  switch (m) {
    case Method::ZeroShot:
      return "Zero-shot";
    case Method::ShortCoT:
      return "Short-CoT";
    case Method::LongCoT:
      return "Long-CoT";
    case Method::ProofSketch:
      return "ProofSketch";
  }
  return "";
}

BaselineMode baseline_mode(Method m) {
  switch (m) {
    case Method::ZeroShot:
      return BaselineMode::ZeroShot;
    case Method::ShortCoT:
      return BaselineMode::ShortCoT;
    case Method::LongCoT:
      return BaselineMode::LongCoT;
    case Method::ProofSketch:
      break;
  }
  throw std::invalid_argument("ProofSketch is not a baseline mode");
}

Method method_of(BaselineMode mode) {
  switch (mode) {
    case BaselineMode::ZeroShot:
      return Method::ZeroShot;
    case BaselineMode::ShortCoT:
      return Method::ShortCoT;
    case BaselineMode::LongCoT:
      return Method::LongCoT;
  }
  return Method::ZeroShot;
}

double round2(double x) { return std::round(x * 100.0) / 100.0; }

std::string fixed(double x, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, x);
  return buf;
}

std::optional<Label> last_keyword(std::string_view text) {
  std::optional<Label> found;
  std::string word;
  auto flush = [&] {
    if (auto l = label_from_string(word)) found = l;
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

double now_ms_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t).count();
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t stable_hash(std::string_view text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string_view to_string(Method m) noexcept {
  switch (m) {
    case Method::ZeroShot:
      return "zero-shot";
    case Method::ShortCoT:
      return "short-cot";
    case Method::LongCoT:
      return "long-cot";
    case Method::ProofSketch:
      return "proofsketch";
  }
  return "proofsketch";
}

std::optional<Method> method_from_string(std::string_view name) {
  const std::string n = lower(name);
  if (n == "zero" || n == "zero-shot" || n == "zeroshot") return Method::ZeroShot;
  if (n == "short" || n == "short-cot" || n == "shortcot") return Method::ShortCoT;
  if (n == "long" || n == "long-cot" || n == "longcot") return Method::LongCoT;
  if (n == "sketch" || n == "proofsketch") return Method::ProofSketch;
  return std::nullopt;
}

DatasetRecord parse_dataset_record(const nlohmann::json& doc) {
  if (!doc.is_object()) throw SchemaError("$", "expected a JSON object");
  DatasetRecord r;
  auto field = [&](const char* key) -> const nlohmann::json& {
    auto it = doc.find(key);
    if (it == doc.end()) throw SchemaError(std::string("$.") + key, "missing field");
    return *it;
  };
  const auto& id = field("id");
  if (id.is_string()) {
    r.id = id.get<std::string>();
  } else if (id.is_number_integer()) {
    r.id = std::to_string(id.get<long long>());
  } else {
    throw SchemaError("$.id", "expected a string or integer");
  }
  const auto& theory = field("theory");
  const auto& question = field("question");
  if (!theory.is_string()) throw SchemaError("$.theory", "expected a string");
  if (!question.is_string()) throw SchemaError("$.question", "expected a string");
  r.theory_text = theory.get<std::string>();
  r.question_text = question.get<std::string>();

  const auto& answer = field("answer");
  std::optional<Label> gold;
  if (answer.is_boolean()) gold = answer.get<bool>() ? Label::True : Label::False;
  if (answer.is_string()) gold = label_from_string(answer.get<std::string>());
  if (!gold) throw SchemaError("$.answer", "expected True, False or Unknown");
  r.gold_label = *gold;

  if (auto it = doc.find("depth"); it != doc.end() && !it->is_null()) {
    if (!it->is_number_integer() || it->get<long long>() < 0)
      throw SchemaError("$.depth", "expected a non-negative integer");
    r.depth = it->get<int>();
  }
  r.theory = parse_theory_nl(r.theory_text);
  r.question = parse_question(r.question_text);
  return r;
}

LoadedDataset load_dataset_text(std::string_view jsonl) {
  LoadedDataset out;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    std::size_t end = jsonl.find('\n', pos);
    if (end == std::string_view::npos) end = jsonl.size();
    std::string_view line = jsonl.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = end + 1;
    const std::size_t number = ++out.line_count;

    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) {
      out.rejects.push_back({number, "blank line"});
      continue;
    }
    try {
      auto doc = nlohmann::json::parse(line);
      out.records.push_back(parse_dataset_record(doc));
    } catch (const nlohmann::json::exception& e) {
      out.rejects.push_back({number, std::string("invalid JSON: ") + e.what()});
    } catch (const Error& e) {
      out.rejects.push_back({number, e.what()});
    }
  }
  if (out.records.empty())
    throw EmptyDataset("dataset has no valid records (" + std::to_string(out.rejects.size()) +
                       " rejected lines)");
  return out;
}

LoadedDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("failed reading dataset '" + path.string() + "'");
  return load_dataset_text(buf.str());
}

nlohmann::json to_json(const EvalRecord& r) {
  return {{"record_id", r.record_id},
          {"method", to_string(r.method)},
          {"gold", to_string(r.gold)},
          {"predicted", to_string(r.predicted)},
          {"correct", r.correct},
          {"certified", r.certified},
          {"unparseable", r.unparseable},
          {"tokens", r.tokens},
          {"latency_ms", r.latency_ms},
          {"generator_calls", r.generator_calls},
          {"answer_source", r.answer_source}};
}

EvalRecord eval_record_from_json(const nlohmann::json& doc) {
  EvalRecord r;
  try {
    r.record_id = doc.at("record_id").get<std::string>();
    auto method = method_from_string(doc.at("method").get<std::string>());
    if (!method) throw SchemaError("$.method", "unknown method");
    r.method = *method;
    r.gold = label_from_string(doc.value("gold", std::string("Unknown"))).value_or(Label::Unknown);
    auto predicted = label_from_string(doc.at("predicted").get<std::string>());
    if (!predicted) throw SchemaError("$.predicted", "expected a label");
    r.predicted = *predicted;
    r.correct = doc.at("correct").get<bool>();
    r.certified = doc.at("certified").get<bool>();
    r.unparseable = doc.value("unparseable", false);
    r.tokens = doc.at("tokens").get<long long>();
    r.latency_ms = doc.value("latency_ms", 0.0);
    r.generator_calls = doc.value("generator_calls", 0);
    r.answer_source = doc.value("answer_source", std::string{});
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("$", e.what());
  }
  return r;
}

int BaselineBudgets::for_mode(BaselineMode mode) const {
  switch (mode) {
    case BaselineMode::ZeroShot:
      return zero_shot;
    case BaselineMode::ShortCoT:
      return short_cot;
    case BaselineMode::LongCoT:
      return long_cot;
  }
  return zero_shot;
}

ExtractedLabel extract_baseline_label(std::string_view completion) {
  std::vector<std::string_view> lines;
  for (std::size_t pos = 0; pos <= completion.size();) {
    std::size_t end = completion.find('\n', pos);
    if (end == std::string_view::npos) end = completion.size();
    lines.push_back(completion.substr(pos, end - pos));
    pos = end + 1;
  }
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
    std::string_view line = *it;
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.front()))) line.remove_prefix(1);
    if (lower(line.substr(0, 7)) == "answer:") {
      if (auto l = last_keyword(line.substr(7))) return {*l, true};
    }
  }
  if (auto l = last_keyword(completion)) return {*l, true};
  return {Label::Unknown, false};
}

EvalRecord run_baseline(const DatasetRecord& record, BaselineMode mode, Generator& generator,
                        double temperature, const BaselineBudgets& budgets) {
  const auto start = std::chrono::steady_clock::now();
  GenerationRequest request{build_baseline_prompt(record.theory, record.question, mode),
                            budgets.for_mode(mode), temperature, std::nullopt};
  const GenerationResponse resp = generate_within_budget(generator, request);
  const ExtractedLabel extracted = extract_baseline_label(resp.text);

  EvalRecord r;
  r.record_id = record.id;
  r.method = method_of(mode);
  r.gold = record.gold_label;
  r.predicted = extracted.label;
  r.unparseable = !extracted.parsed;
  r.correct = extracted.parsed && r.predicted == record.gold_label;
  r.certified = false;
  r.tokens = resp.completion_tokens;
  r.generator_calls = 1;
  r.latency_ms = now_ms_since(start);
  return r;
}

EvalRecord run_proofsketch(const DatasetRecord& record, const PipelineConfig& config,
                           Generator& generator) {
  const PipelineResult result = run_pipeline(record.theory, record.question, config, generator);
  EvalRecord r;
  r.record_id = record.id;
  r.method = Method::ProofSketch;
  r.gold = record.gold_label;
  r.predicted = result.answer;
  r.correct = result.answer == record.gold_label;
  r.certified = result.certification == Certification::Certified;
  r.tokens = result.total_generated_tokens;
  r.latency_ms = result.latency_ms;
  r.generator_calls = result.generator_calls;
  r.answer_source = std::string(to_string(result.answer_source));
  return r;
}

double p95_nearest_rank(std::vector<long long> values) {
  if (values.empty()) throw EmptyInput("p95 of an empty sample");
  const std::size_t n = values.size();
  const std::size_t rank = (95 * n + 99) / 100;  // ceil(0.95 n), exact in integers
  auto nth = values.begin() + static_cast<std::ptrdiff_t>(rank - 1);
  std::nth_element(values.begin(), nth, values.end());
  return static_cast<double>(*nth);
}

MetricsReport compute_metrics(const std::vector<EvalRecord>& records) {
  if (records.empty()) throw EmptyInput("no evaluation records");
  std::map<Method, std::vector<const EvalRecord*>> groups;
  for (const auto& r : records) groups[r.method].push_back(&r);

  MetricsReport report;
  for (const auto& [method, rows] : groups) {
    MethodMetrics m;
    m.n = rows.size();
    long long correct = 0, certified = 0, tokens = 0;
    double latency = 0.0;
    std::vector<long long> token_values;
    token_values.reserve(rows.size());
    for (const EvalRecord* r : rows) {
      correct += r->correct ? 1 : 0;
      certified += r->certified ? 1 : 0;
      tokens += r->tokens;
      latency += r->latency_ms;
      token_values.push_back(r->tokens);
    }
    const double n = static_cast<double>(m.n);
    m.accuracy = static_cast<double>(correct) / n;
    m.cert_rate = static_cast<double>(certified) / n;
    m.mean_tokens = static_cast<double>(tokens) / n;
    m.mean_latency_ms = latency / n;
    m.p95_tokens = p95_nearest_rank(std::move(token_values));
    report.methods[method] = m;
  }
  if (report.methods.contains(Method::ProofSketch)) {
    for (Method b : {Method::ZeroShot, Method::ShortCoT, Method::LongCoT}) {
      auto it = report.methods.find(b);
      if (it == report.methods.end() || it->second.mean_tokens == 0.0) continue;
      report.savings.push_back({Method::ProofSketch, b, token_savings(report, Method::ProofSketch, b)});
    }
  }
  return report;
}

double token_savings(const MetricsReport& report, Method method, Method baseline) {
  const double base = report.methods.at(baseline).mean_tokens;
  if (base == 0.0) throw DivisionByZero("baseline mean token count is zero");
  return 1.0 - report.methods.at(method).mean_tokens / base;
}

double token_savings_per_example(const std::vector<EvalRecord>& records, Method method,
                                 Method baseline) {
  std::map<std::string, long long> base_tokens;
  for (const auto& r : records)
    if (r.method == baseline) base_tokens[r.record_id] = r.tokens;
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : records) {
    if (r.method != method) continue;
    auto it = base_tokens.find(r.record_id);
    if (it == base_tokens.end() || it->second == 0) continue;
    sum += 1.0 - static_cast<double>(r.tokens) / static_cast<double>(it->second);
    ++n;
  }
  if (n == 0) throw DivisionByZero("no records with a non-zero baseline token count");
  return sum / static_cast<double>(n);
}

std::string format_percent(double fraction) { return fixed(fraction * 100.0, 1) + "%"; }

std::optional<ReportFormat> report_format_from_string(std::string_view name) {
  const std::string n = lower(name);
  if (n == "json") return ReportFormat::Json;
  if (n == "csv") return ReportFormat::Csv;
  if (n == "md" || n == "markdown") return ReportFormat::Markdown;
  return std::nullopt;
}

std::string emit_report(const MetricsReport& report, ReportFormat format) {
  switch (format) {
    case ReportFormat::Json: {
      nlohmann::json methods = nlohmann::json::object();
      for (const auto& [method, m] : report.methods) {
        methods[std::string(to_string(method))] = {{"n", m.n},
                                                   {"accuracy", round2(m.accuracy)},
                                                   {"cert_rate", round2(m.cert_rate)},
                                                   {"mean_tokens", round2(m.mean_tokens)},
                                                   {"p95_tokens", round2(m.p95_tokens)},
                                                   {"mean_latency_ms", round2(m.mean_latency_ms)}};
      }
      nlohmann::json savings = nlohmann::json::array();
      for (const auto& s : report.savings) {
        savings.push_back({{"method", to_string(s.method)},
                           {"baseline", to_string(s.baseline)},
                           {"savings_pct", round2(s.savings * 100.0)}});
      }
      nlohmann::json doc = {{"methods", std::move(methods)},
                            {"token_savings", std::move(savings)},
                            {"rejected", report.rejected}};
      return doc.dump(2) + "\n";
    }
    case ReportFormat::Csv: {
      std::string out = "method,metric,value\n";
      for (const auto& [method, m] : report.methods) {
        const std::string name(to_string(method));
        const std::pair<const char*, double> rows[] = {{"accuracy", m.accuracy},
                                                       {"cert_rate", m.cert_rate},
                                                       {"mean_tokens", m.mean_tokens},
                                                       {"p95_tokens", m.p95_tokens},
                                                       {"mean_latency_ms", m.mean_latency_ms}};
        for (const auto& [metric, value] : rows) out += name + "," + metric + "," + fixed(value, 2) + "\n";
      }
      return out;
    }
    case ReportFormat::Markdown: {
      std::string out = "| Method | Acc | Tok | Cert |\n|---|---|---|---|\n";
      for (const auto& [method, m] : report.methods) {
        out += "| " + std::string(display_name(method)) + " | " + fixed(m.accuracy, 2) + " | " +
               fixed(m.mean_tokens, 2) + " | " + fixed(m.cert_rate, 2) + " |\n";
      }
      out += "\n| Method | P95 Tok | Latency (ms) | n |\n|---|---|---|---|\n";
      for (const auto& [method, m] : report.methods) {
        out += "| " + std::string(display_name(method)) + " | " + fixed(m.p95_tokens, 2) + " | " +
               fixed(m.mean_latency_ms, 2) + " | " + std::to_string(m.n) + " |\n";
      }
      if (!report.savings.empty()) {
        out += "\n";
        for (const auto& s : report.savings) {
          out += "- " + std::string(display_name(s.method)) + " vs " +
                 std::string(display_name(s.baseline)) + ": " + format_percent(s.savings) +
                 " token reduction\n";
        }
      }
      return out;
    }
  }
  return {};
}

MetricsReport load_report_json(const nlohmann::json& doc) {
  MetricsReport report;
  try {
    for (const auto& [name, m] : doc.at("methods").items()) {
      auto method = method_from_string(name);
      if (!method) throw SchemaError("$.methods." + name, "unknown method");
      MethodMetrics mm;
      mm.n = m.at("n").get<std::size_t>();
      mm.accuracy = m.at("accuracy").get<double>();
      mm.cert_rate = m.at("cert_rate").get<double>();
      mm.mean_tokens = m.at("mean_tokens").get<double>();
      mm.p95_tokens = m.at("p95_tokens").get<double>();
      mm.mean_latency_ms = m.at("mean_latency_ms").get<double>();
      report.methods[*method] = mm;
    }
    for (const auto& s : doc.value("token_savings", nlohmann::json::array())) {
      auto method = method_from_string(s.at("method").get<std::string>());
      auto baseline = method_from_string(s.at("baseline").get<std::string>());
      if (!method || !baseline) throw SchemaError("$.token_savings", "unknown method");
      report.savings.push_back({*method, *baseline, s.at("savings_pct").get<double>() / 100.0});
    }
    report.rejected = doc.value("rejected", std::size_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("$", e.what());
  }
  return report;
}

GeneratorFactory shared_generator_factory(std::shared_ptr<Generator> generator) {
  auto shared = make_concurrent(std::move(generator));
  return [shared](const DatasetRecord&) { return shared; };
}

GeneratorFactory oracle_generator_factory(OracleNoiseConfig noise) {
  return [noise](const DatasetRecord& record) {
    OracleNoiseConfig per_record = noise;
    per_record.seed = splitmix64(noise.seed ^ stable_hash(record.id));
    return oracle_generator(record.theory, record.question, per_record);
  };
}

std::vector<EvalRecord> evaluate(const std::vector<DatasetRecord>& records, const EvalOptions& options,
                                 const GeneratorFactory& factory) {
  options.pipeline.validate();
  if (options.methods.empty()) throw ConfigError("no methods selected");
  const std::size_t tasks = records.size() * options.methods.size();
  std::vector<EvalRecord> out(tasks);

  auto run_task = [&](std::size_t i) {
    const DatasetRecord& record = records[i / options.methods.size()];
    const Method method = options.methods[i % options.methods.size()];
    auto generator = factory(record);
    out[i] = method == Method::ProofSketch
                 ? run_proofsketch(record, options.pipeline, *generator)
                 : run_baseline(record, baseline_mode(method), *generator, options.pipeline.temperature,
                                options.baseline_budgets);
  };

  const int workers = std::max(1, options.workers);
  if (workers == 1) {
    for (std::size_t i = 0; i < tasks; ++i) run_task(i);
    return out;
  }

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mu;
  {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i; !failed && (i = next.fetch_add(1)) < tasks;) {
          try {
            run_task(i);
          } catch (...) {
            std::lock_guard lock(error_mu);
            if (!error) error = std::current_exception();
            failed = true;
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

std::vector<int> parse_budget_sweep(std::string_view text) {
  std::vector<int> parts;
  std::string cur;
  const char sep = text.find(':') != std::string_view::npos ? ':' : ',';
  auto push = [&] {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(cur, &used);
    } catch (const std::exception&) {
      throw ConfigError("bad budget sweep '" + std::string(text) + "'");
    }
    if (used != cur.size() || v <= 0) throw ConfigError("bad budget sweep '" + std::string(text) + "'");
    parts.push_back(v);
    cur.clear();
  };
  for (char c : text) {
    if (c == sep) {
      push();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      cur.push_back(c);
    }
  }
  push();
  if (sep == ',') return parts;
  if (parts.size() != 3 || parts[0] > parts[1])
    throw ConfigError("budget sweep must be start:stop:step with start <= stop");
  std::vector<int> out;
  for (int b = parts[0]; b <= parts[1]; b += parts[2]) out.push_back(b);
  return out;
}

std::vector<int> default_budget_sweep() { return parse_budget_sweep("120:220:20"); }

std::vector<AblationRow> run_ablation(const std::vector<DatasetRecord>& records,
                                      const std::vector<int>& budgets, const PipelineConfig& config,
                                      const GeneratorFactory& factory, int workers) {
  if (budgets.empty()) throw ConfigError("ablation needs at least one budget");
  auto pass = [&](const PipelineConfig& pipeline, std::optional<int> budget) {
    EvalOptions options;
    options.methods = {Method::ProofSketch};
    options.pipeline = pipeline;
    options.workers = workers;
    const auto report = compute_metrics(evaluate(records, options, factory));
    const MethodMetrics& m = report.methods.at(Method::ProofSketch);
    return AblationRow{budget, m.accuracy, m.mean_tokens, m.cert_rate};
  };
  std::vector<AblationRow> rows;
  for (int b : budgets) rows.push_back(pass(config.with_fixed_budget(b), b));
  PipelineConfig adaptive = config;
  adaptive.adaptive_budget = true;
  adaptive.fixed_budget.reset();
  rows.push_back(pass(adaptive, std::nullopt));
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "budget,accuracy,mean_tokens,cert_rate\n";
  for (const auto& r : rows) {
    out += (r.budget ? std::to_string(*r.budget) : std::string("adaptive")) + "," +
           fixed(r.accuracy, 4) + "," + fixed(r.mean_tokens, 2) + "," + fixed(r.cert_rate, 4) + "\n";
  }
  return out;
}

void write_run_directory(const std::filesystem::path& dir, const nlohmann::json& config_stamp,
                         const std::vector<EvalRecord>& records, const MetricsReport& report,
                         const std::vector<RejectedLine>& rejects) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create run directory '" + dir.string() + "': " + ec.message());
  auto write = [&](const char* name, const std::string& content) {
    std::ofstream f(dir / name, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write '" + (dir / name).string() + "'");
    f << content;
  };
  write("config.json", config_stamp.dump(2) + "\n");
  std::string log;
  for (const auto& r : records) log += to_json(r).dump() + "\n";
  write("records.jsonl", log);
  write("metrics.json", emit_report(report, ReportFormat::Json));
  nlohmann::json rej = nlohmann::json::array();
  for (const auto& r : rejects) rej.push_back({{"line", r.line_number}, {"reason", r.reason}});
  write("rejects.json", rej.dump(2) + "\n");
}

}  // namespace proofsketch
