#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "proofsketch/closure.hpp"
#include "proofsketch/errors.hpp"
#include "proofsketch/eval.hpp"
#include "proofsketch/generation.hpp"
#include "proofsketch/selector.hpp"
#include "proofsketch/sketch.hpp"
#include "proofsketch/theory.hpp"

namespace py = pybind11;
using namespace proofsketch;

namespace {

py::object to_py(const nlohmann::json& j) {
  switch (j.type()) {
    case nlohmann::json::value_t::null:
      return py::none();
    case nlohmann::json::value_t::boolean:
      return py::bool_(j.get<bool>());
    case nlohmann::json::value_t::number_integer:
      return py::int_(j.get<long long>());
    case nlohmann::json::value_t::number_unsigned:
      return py::int_(j.get<unsigned long long>());
    case nlohmann::json::value_t::number_float:
      return py::float_(j.get<double>());
    case nlohmann::json::value_t::string:
      return py::str(j.get<std::string>());
    case nlohmann::json::value_t::array: {
      py::list out;
      for (const auto& v : j) out.append(to_py(v));
      return out;
    }
    case nlohmann::json::value_t::object: {
      py::dict out;
      for (const auto& [k, v] : j.items()) out[py::str(k)] = to_py(v);
      return out;
    }
    default:
      return py::none();
  }
}

nlohmann::json from_py(const py::handle& o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

Theory theory_from(const py::object& o) {
  if (py::isinstance<py::str>(o)) return parse_theory_nl(o.cast<std::string>());
  return parse_theory_structured(from_py(o));
}

PipelineConfig config_from(const py::object& o) {
  return o.is_none() ? PipelineConfig{} : pipeline_config_from_json(from_py(o));
}

py::dict sketch_to_py(const ParsedSketch& s) {
  py::dict d;
  d["answer"] = std::string(to_string(s.answer));
  py::list claims;
  for (const auto& c : s.claims) claims.append(to_string(c));
  d["claims"] = claims;
  d["parse_status"] = std::string(to_string(s.parse_status));
  d["dropped_claims"] = s.dropped_claims;
  return d;
}

std::vector<EvalRecord> records_from(const py::list& rows) {
  std::vector<EvalRecord> out;
  for (const auto& r : rows) out.push_back(eval_record_from_json(from_py(r)));
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Closure-verified answer sketches over unary rule theories";

  auto error = py::register_exception<Error>(m, "Error");
  py::register_exception<ParseError>(m, "ParseError", error.ptr());
  py::register_exception<SchemaError>(m, "SchemaError", error.ptr());
  py::register_exception<InconsistentFacts>(m, "InconsistentFacts", error.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", error.ptr());
  py::register_exception<EmptyInput>(m, "EmptyInput", error.ptr());
  auto gen_error = py::register_exception<GeneratorError>(m, "GeneratorError", error.ptr());
  py::register_exception<ScriptExhausted>(m, "ScriptExhausted", gen_error.ptr());

  m.def("canonicalize_symbol", [](const std::string& s) { return canonicalize_symbol(s); });

  m.def(
      "closure",
      [](const py::object& theory) { return to_py(closure_to_json(forward_chain(theory_from(theory)))); },
      py::arg("theory"), "Closure of an NL string or a structured dict, with depths.");

  m.def(
      "decide",
      [](const py::object& theory, const std::string& question) -> py::object {
        const auto d = decide_from_closure(forward_chain(theory_from(theory)), parse_question(question));
        if (!d.decided) return py::none();
        return py::str(std::string(to_string(d.label)));
      },
      py::arg("theory"), py::arg("question"), "Label decided by the closure alone, or None.");

  m.def(
      "parse_sketch", [](const std::string& text) { return sketch_to_py(parse_sketch(RawSketch{text, 0, 0})); },
      py::arg("text"));

  m.def(
      "answer",
      [](const py::object& theory, const std::string& question, std::optional<std::vector<std::string>> script,
         const py::object& config, double flip, double corrupt, double malform, std::uint64_t seed) {
        const Theory t = theory_from(theory);
        const Question q = parse_question(question);
        const PipelineConfig c = config_from(config);
        std::shared_ptr<Generator> g;
        if (script)
          g = scripted_generator(*script, ScriptedGenerator::Mode::Strict);
        else
          g = oracle_generator(t, q, {flip, corrupt, malform, seed});
        PipelineResult r;
        {
          py::gil_scoped_release release;
          r = run_pipeline(t, q, c, *g);
        }
        return to_py(to_json(r));
      },
      py::arg("theory"), py::arg("question"), py::arg("script") = py::none(), py::arg("config") = py::none(),
      py::arg("flip") = 0.0, py::arg("corrupt") = 0.0, py::arg("malform") = 0.0, py::arg("seed") = 0,
      "Runs the pipeline with a scripted generator, or the simulated oracle when no script is given.");

  m.def(
      "evaluate",
      [](const std::string& dataset_path, const std::vector<std::string>& methods, const py::object& config,
         double flip, double corrupt, double malform, std::uint64_t seed, int workers) {
        const LoadedDataset data = load_dataset(dataset_path);
        EvalOptions options;
        options.methods.clear();
        for (const auto& name : methods) {
          auto method = method_from_string(name);
          if (!method) throw ConfigError("unknown method: " + name);
          options.methods.push_back(*method);
        }
        options.pipeline = config_from(config);
        options.workers = workers;
        std::vector<EvalRecord> records;
        {
          py::gil_scoped_release release;
          records = evaluate(data.records, options, oracle_generator_factory({flip, corrupt, malform, seed}));
        }
        py::list out;
        for (const auto& r : records) out.append(to_py(to_json(r)));
        return out;
      },
      py::arg("dataset_path"), py::arg("methods") = std::vector<std::string>{"proofsketch"},
      py::arg("config") = py::none(), py::arg("flip") = 0.0, py::arg("corrupt") = 0.0, py::arg("malform") = 0.0,
      py::arg("seed") = 0, py::arg("workers") = 1, "Evaluates a JSONL dataset against the simulated oracle.");

  m.def(
      "metrics",
      [](const py::list& rows) {
        return to_py(nlohmann::json::parse(emit_report(compute_metrics(records_from(rows)), ReportFormat::Json)));
      },
      py::arg("records"));

  m.def(
      "report",
      [](const py::list& rows, const std::string& format) {
        auto f = report_format_from_string(format);
        if (!f) throw ConfigError("unknown report format: " + format);
        return emit_report(compute_metrics(records_from(rows)), *f);
      },
      py::arg("records"), py::arg("format") = "md");

  m.def("p95", [](std::vector<long long> v) { return p95_nearest_rank(std::move(v)); }, py::arg("values"));
}
