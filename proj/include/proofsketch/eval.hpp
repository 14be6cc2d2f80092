#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "proofsketch/generation.hpp"
#include "proofsketch/selector.hpp"
#include "proofsketch/theory.hpp"

namespace proofsketch {

struct DatasetRecord {
  std::string id;
  std::string theory_text;
  std::string question_text;
  Label gold_label = Label::Unknown;
  std::optional<int> depth;

  // Parsed forms, validated at load time.
  Theory theory;
  Question question;
};

struct RejectedLine {
  std::size_t line_number = 0;  // 1-based
  std::string reason;
};

struct LoadedDataset {
  std::vector<DatasetRecord> records;
  std::vector<RejectedLine> rejects;
  std::size_t line_count = 0;
};

/// Parses one JSON-Lines record {id, theory, question, answer, depth?}. Throws Error.
DatasetRecord parse_dataset_record(const nlohmann::json& doc);

/// JSON-Lines loader. Bad lines become rejects; throws EmptyDataset when no line
/// survives and IoError when the file cannot be read.
LoadedDataset load_dataset(const std::filesystem::path& path);
LoadedDataset load_dataset_text(std::string_view jsonl);

enum class Method : std::uint8_t { ZeroShot, ShortCoT, LongCoT, ProofSketch };

std::string_view to_string(Method m) noexcept;
std::optional<Method> method_from_string(std::string_view name);

struct EvalRecord {
  std::string record_id;
  Method method = Method::ProofSketch;
  Label gold = Label::Unknown;
  Label predicted = Label::Unknown;
  bool correct = false;
  bool certified = false;
  bool unparseable = false;
  long long tokens = 0;
  double latency_ms = 0.0;
  int generator_calls = 0;
  std::string answer_source;  // ProofSketch only
};

nlohmann::json to_json(const EvalRecord& r);
EvalRecord eval_record_from_json(const nlohmann::json& doc);

/// Completion budgets for the single baseline call.
struct BaselineBudgets {
  int zero_shot = 16;
  int short_cot = 128;
  int long_cot = 384;

  int for_mode(BaselineMode mode) const;
};

struct ExtractedLabel {
  Label label = Label::Unknown;
  bool parsed = false;
};

/// Label from the last line starting with "Answer:", else the last
/// True/False/Unknown keyword anywhere in the text.
ExtractedLabel extract_baseline_label(std::string_view completion);

EvalRecord run_baseline(const DatasetRecord& record, BaselineMode mode, Generator& generator,
                        double temperature = 0.3, const BaselineBudgets& budgets = {});

EvalRecord run_proofsketch(const DatasetRecord& record, const PipelineConfig& config,
                           Generator& generator);

struct MethodMetrics {
  std::size_t n = 0;
  double accuracy = 0.0;
  double cert_rate = 0.0;
  double mean_tokens = 0.0;
  double p95_tokens = 0.0;
  double mean_latency_ms = 0.0;
};

struct TokenSavings {
  Method method;
  Method baseline;
  double savings = 0.0;  // fraction, 1 - mean(method) / mean(baseline)
};

struct MetricsReport {
  std::map<Method, MethodMetrics> methods;
  std::vector<TokenSavings> savings;  // ProofSketch against each baseline present
  std::size_t rejected = 0;
};

/// Nearest-rank 95th percentile: the ceil(0.95 n)-th smallest value. Throws EmptyInput.
double p95_nearest_rank(std::vector<long long> values);

/// Groups by method. Throws EmptyInput when records is empty.
MetricsReport compute_metrics(const std::vector<EvalRecord>& records);

/// 1 - mean_tokens(method) / mean_tokens(baseline). Throws DivisionByZero when the
/// baseline mean is zero and std::out_of_range when a method is absent.
double token_savings(const MetricsReport& report, Method method, Method baseline);

/// Mean over shared record ids of 1 - tokens(method) / tokens(baseline), skipping
/// records where the baseline spent zero tokens.
double token_savings_per_example(const std::vector<EvalRecord>& records, Method method,
                                 Method baseline);

/// "36.9%"
std::string format_percent(double fraction);

enum class ReportFormat : std::uint8_t { Json, Csv, Markdown };

std::optional<ReportFormat> report_format_from_string(std::string_view name);
std::string emit_report(const MetricsReport& report, ReportFormat format);
MetricsReport load_report_json(const nlohmann::json& doc);

/// Builds the generator for one record. Scripted and HTTP backends return a
/// shared instance; the oracle needs the record's theory and question.
using GeneratorFactory = std::function<std::shared_ptr<Generator>(const DatasetRecord&)>;

GeneratorFactory shared_generator_factory(std::shared_ptr<Generator> generator);
/// Per-record oracle whose seed mixes the base seed with a hash of the record id.
GeneratorFactory oracle_generator_factory(OracleNoiseConfig noise);

struct EvalOptions {
  std::vector<Method> methods{Method::ProofSketch};
  PipelineConfig pipeline;
  BaselineBudgets baseline_budgets;
  int workers = 1;
};

/// Evaluates every record with every method. Output order is record-major, then
/// method order, independent of the worker count.
std::vector<EvalRecord> evaluate(const std::vector<DatasetRecord>& records, const EvalOptions& options,
                                 const GeneratorFactory& factory);

struct AblationRow {
  std::optional<int> budget;  // nullopt: adaptive
  double accuracy = 0.0;
  double mean_tokens = 0.0;
  double cert_rate = 0.0;
};

/// "120:220:20" -> {120, 140, ..., 220}. Throws ConfigError.
std::vector<int> parse_budget_sweep(std::string_view text);
std::vector<int> default_budget_sweep();

/// One ProofSketch pass per fixed budget plus one adaptive pass.
std::vector<AblationRow> run_ablation(const std::vector<DatasetRecord>& records,
                                      const std::vector<int>& budgets, const PipelineConfig& config,
                                      const GeneratorFactory& factory, int workers = 1);

std::string ablation_csv(const std::vector<AblationRow>& rows);

/// Writes config.json, records.jsonl, metrics.json and rejects.json under dir.
void write_run_directory(const std::filesystem::path& dir, const nlohmann::json& config_stamp,
                         const std::vector<EvalRecord>& records, const MetricsReport& report,
                         const std::vector<RejectedLine>& rejects);

/// FNV-1a, stable across platforms.
std::uint64_t stable_hash(std::string_view text);

}  // namespace proofsketch
