// proofsketch: closure inspection, single-question answering, dataset evaluation,
// budget ablation and report rendering.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "proofsketch/closure.hpp"
#include "proofsketch/errors.hpp"
#include "proofsketch/eval.hpp"
#include "proofsketch/selector.hpp"

namespace fs = std::filesystem;
using namespace proofsketch;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

nlohmann::json read_json_file(const std::string& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
}

// A JSON array of strings, or one canned completion per non-empty line.
std::vector<std::string> load_script(const std::string& path) {
  const std::string text = read_file(path);
  auto doc = nlohmann::json::parse(text, nullptr, false);
  std::vector<std::string> script;
  if (!doc.is_discarded() && doc.is_array()) {
    for (const auto& item : doc) {
      if (!item.is_string()) throw ConfigError("script array must contain only strings");
      script.push_back(item.get<std::string>());
    }
  } else {
    std::istringstream lines(text);
    for (std::string line; std::getline(lines, line);) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) script.push_back(line);
    }
  }
  if (script.empty()) throw ConfigError("script '" + path + "' has no responses");
  return script;
}

struct BackendOptions {
  std::string backend = "oracle";
  std::string script_path;
  bool strict_script = false;
  std::string config_path;
  std::uint64_t seed = 0;
  double flip = 0.0;
  double corrupt = 0.0;
  double malform = 0.0;

  void add_to(CLI::App& cmd) {
    cmd.add_option("--backend", backend, "Generator backend")
        ->check(CLI::IsMember({"scripted", "oracle", "http"}))
        ->capture_default_str();
    cmd.add_option("--script", script_path, "Canned completions for the scripted backend");
    cmd.add_flag("--strict-script", strict_script, "Fail once the script runs out instead of cycling");
    cmd.add_option("--config", config_path, "JSON file with pipeline and backend settings");
    cmd.add_option("--seed", seed, "Oracle seed")->capture_default_str();
    cmd.add_option("--flip", flip, "Oracle flip_answer_prob")->check(CLI::Range(0.0, 1.0));
    cmd.add_option("--corrupt", corrupt, "Oracle corrupt_claim_prob")->check(CLI::Range(0.0, 1.0));
    cmd.add_option("--malform", malform, "Oracle malform_prob")->check(CLI::Range(0.0, 1.0));
  }

  nlohmann::json config_doc() const {
    return config_path.empty() ? nlohmann::json::object() : read_json_file(config_path);
  }

  OracleNoiseConfig noise() const { return {flip, corrupt, malform, seed}; }

  GeneratorFactory factory() const {
    if (backend == "oracle") return oracle_generator_factory(noise());
    if (backend == "scripted") {
      if (script_path.empty()) throw ConfigError("--backend scripted needs --script");
      return shared_generator_factory(scripted_generator(
          load_script(script_path),
          strict_script ? ScriptedGenerator::Mode::Strict : ScriptedGenerator::Mode::Cycle));
    }
    return shared_generator_factory(http_generator(http_config_from_json(config_doc())));
  }

  nlohmann::json stamp() const {
    nlohmann::json s = {{"backend", backend},
                        {"token_counting", backend == "http" ? "endpoint-reported" : "whitespace"}};
    if (backend == "oracle")
      s["noise"] = {{"flip_answer_prob", flip},
                    {"corrupt_claim_prob", corrupt},
                    {"malform_prob", malform},
                    {"seed", seed}};
    if (backend == "scripted") s["script"] = fs::path(script_path).filename().string();
    if (backend == "http") {
      const auto doc = config_doc();
      s["model_name"] = doc.value("model_name", std::string{});
      s["endpoint_url"] = doc.value("endpoint_url", std::string{});
    }
    return s;
  }
};

std::vector<Method> parse_methods(const std::string& name) {
  if (name == "all") return {Method::ZeroShot, Method::ShortCoT, Method::LongCoT, Method::ProofSketch};
  auto m = method_from_string(name);
  if (!m) throw ConfigError("unknown method '" + name + "'");
  return {*m};
}

int cmd_closure(const std::string& theory_path) {
  const Theory theory = load_theory_file(theory_path);
  std::cout << closure_to_json(forward_chain(theory)).dump(2) << "\n";
  return 0;
}

int cmd_answer(const std::string& theory_path, const std::string& question_text,
               const BackendOptions& backend) {
  DatasetRecord record;
  record.id = "cli";
  record.theory = load_theory_file(theory_path);
  record.question = parse_question(question_text);
  const PipelineConfig config = pipeline_config_from_json(backend.config_doc());
  auto generator = backend.factory()(record);
  std::cout << to_json(run_pipeline(record.theory, record.question, config, *generator)).dump(2) << "\n";
  return 0;
}

int cmd_eval(const std::string& dataset_path, const std::string& method_name, int workers,
             const std::string& out_dir, const BackendOptions& backend) {
  const LoadedDataset data = load_dataset(dataset_path);
  EvalOptions options;
  options.methods = parse_methods(method_name);
  options.pipeline = pipeline_config_from_json(backend.config_doc());
  options.workers = workers;

  const auto records = evaluate(data.records, options, backend.factory());
  MetricsReport report = compute_metrics(records);
  report.rejected = data.rejects.size();

  nlohmann::json methods = nlohmann::json::array();
  for (Method m : options.methods) methods.push_back(to_string(m));
  nlohmann::json stamp = {
      {"command", "eval"},
      {"dataset", fs::path(dataset_path).filename().string()},
      {"records", data.records.size()},
      {"rejected", data.rejects.size()},
      {"methods", std::move(methods)},
      {"workers", workers},
      {"prompt_templates", std::string(kPromptTemplateVersion)},
      {"pipeline", to_json(options.pipeline)},
      {"baseline_budgets",
       {{"zero-shot", options.baseline_budgets.zero_shot},
        {"short-cot", options.baseline_budgets.short_cot},
        {"long-cot", options.baseline_budgets.long_cot}}},
      {"generator", backend.stamp()}};

  if (!out_dir.empty()) {
    write_run_directory(out_dir, stamp, records, report, data.rejects);
    std::cerr << "wrote run to " << out_dir << "\n";
  }
  std::cout << emit_report(report, ReportFormat::Markdown);
  return 0;
}

int cmd_ablate(const std::string& dataset_path, const std::string& budgets_text, int workers,
               const std::string& out_path, const BackendOptions& backend) {
  const LoadedDataset data = load_dataset(dataset_path);
  const PipelineConfig config = pipeline_config_from_json(backend.config_doc());
  const auto rows =
      run_ablation(data.records, parse_budget_sweep(budgets_text), config, backend.factory(), workers);
  const std::string csv = ablation_csv(rows);
  if (out_path.empty()) {
    std::cout << csv;
  } else {
    std::ofstream f(out_path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write '" + out_path + "'");
    f << csv;
  }
  return 0;
}

int cmd_report(const std::string& run_dir, const std::string& format_name, bool per_example) {
  auto format = report_format_from_string(format_name);
  if (!format) throw ConfigError("unknown report format '" + format_name + "'");
  const auto report = load_report_json(read_json_file((fs::path(run_dir) / "metrics.json").string()));
  std::cout << emit_report(report, *format);
  if (!per_example) return 0;

  // mean of per-record ratios, read back from records.jsonl
  const fs::path path = fs::path(run_dir) / "records.jsonl";
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<EvalRecord> records;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) records.push_back(eval_record_from_json(nlohmann::json::parse(line)));
  for (Method baseline : {Method::ZeroShot, Method::ShortCoT, Method::LongCoT}) {
    if (!report.methods.contains(baseline) || !report.methods.contains(Method::ProofSketch)) continue;
    std::cout << "per-example savings vs " << to_string(baseline) << ": "
              << format_percent(token_savings_per_example(records, Method::ProofSketch, baseline)) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Verifier-gated sketch reasoning over unary logical theories"};
  app.require_subcommand(1);

  std::string theory_path, question, dataset, method = "sketch", out, budgets = "120:220:20",
                                                    run_dir, format = "md";
  int workers = 1;
  bool per_example = false;

  auto* closure = app.add_subcommand("closure", "Print the forward-chaining closure as JSON");
  closure->add_option("theory", theory_path, "Theory file (.txt or .theory.json)")->required();

  BackendOptions answer_backend;
  auto* answer = app.add_subcommand("answer", "Answer one question and print the audit trail");
  answer->add_option("theory", theory_path, "Theory file (.txt or .theory.json)")->required();
  answer->add_option("--question", question, "Question, e.g. \"Anne is kind.\"")->required();
  answer_backend.add_to(*answer);

  BackendOptions eval_backend;
  auto* eval = app.add_subcommand("eval", "Evaluate methods on a JSON-Lines dataset");
  eval->add_option("dataset", dataset, "Dataset (.jsonl)")->required();
  eval->add_option("--method", method, "zero|short|long|sketch|all")
      ->check(CLI::IsMember({"zero", "short", "long", "sketch", "all"}))
      ->capture_default_str();
  eval->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  eval->add_option("--out", out, "Run directory to write");
  eval_backend.add_to(*eval);

  BackendOptions ablate_backend;
  auto* ablate = app.add_subcommand("ablate", "Fixed-budget sweep plus the adaptive policy, as CSV");
  ablate->add_option("dataset", dataset, "Dataset (.jsonl)")->required();
  ablate->add_option("--budgets", budgets, "start:stop:step or a comma list")->capture_default_str();
  ablate->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  ablate->add_option("--out", out, "CSV file to write (default stdout)");
  ablate_backend.add_to(*ablate);

  auto* report = app.add_subcommand("report", "Render metrics of a run directory");
  report->add_option("run_dir", run_dir, "Directory written by eval --out")->required();
  report->add_flag("--per-example", per_example, "Also print savings as a mean of per-record ratios");
  report->add_option("--format", format, "md|csv|json")
      ->check(CLI::IsMember({"md", "csv", "json"}))
      ->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*closure) return cmd_closure(theory_path);
    if (*answer) return cmd_answer(theory_path, question, answer_backend);
    if (*eval) return cmd_eval(dataset, method, workers, out, eval_backend);
    if (*ablate) return cmd_ablate(dataset, budgets, workers, out, ablate_backend);
    if (*report) return cmd_report(run_dir, format, per_example);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
