#include "hanrag/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hanrag/benchgen.hpp"
#include "hanrag/corpus.hpp"
#include "hanrag/evalkit.hpp"
#include "hanrag/llm.hpp"
#include "hanrag/pipeline.hpp"
#include "hanrag/retriever.hpp"

namespace hanrag {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum class BackendKind { scripted, http };

struct AppConfig {
  std::optional<fs::path> corpus_path;
  std::optional<CorpusFormat> corpus_format;
  std::optional<fs::path> index_path;
  BackendKind backend = BackendKind::scripted;
  std::optional<fs::path> oracle_path;
  HttpBackendConfig http;
  PipelineConfig pipeline;
  EvalOptions evaluation;
  std::optional<fs::path> report_path;
};

// Flags shared by the subcommands that run the pipeline; unset values leave
// the config file (or the defaults) in charge.
struct CommonFlags {
  std::optional<std::string> config;
  std::optional<std::string> corpus;
  std::optional<std::string> format;
  std::optional<std::string> index;
  std::optional<std::string> backend;
  std::optional<std::string> oracle;
  std::optional<std::string> endpoint;
  std::optional<std::string> model;
  std::optional<std::string> api_key_env;
  std::optional<std::size_t> max_steps;
  std::optional<std::size_t> top_k;
  std::optional<std::size_t> context_k;
  std::optional<std::string> force_class;
};

BackendKind parse_backend_kind(std::string_view name) {
  if (name == "scripted") return BackendKind::scripted;
  if (name == "http") return BackendKind::http;
  throw Error("unknown backend \"" + std::string(name) + "\" (expected scripted or http)");
}

fs::path resolve(const fs::path& base, const std::string& value) {
  fs::path p(value);
  return p.is_absolute() || base.empty() ? p : base / p;
}

template <typename T>
void read_field(const json& obj, const char* key, T& target) {
  if (obj.contains(key)) target = obj.at(key).get<T>();
}

void apply_config_file(const fs::path& path, AppConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error("config file " + path.string() + ": " + e.what());
  }
  if (!doc.is_object()) throw Error("config file " + path.string() + " must hold a JSON object");
  const fs::path base = path.parent_path();

  try {
    if (doc.contains("corpus")) cfg.corpus_path = resolve(base, doc["corpus"].get<std::string>());
    if (doc.contains("corpus_format")) cfg.corpus_format = parse_corpus_format(doc["corpus_format"].get<std::string>());
    if (doc.contains("index")) cfg.index_path = resolve(base, doc["index"].get<std::string>());
    if (doc.contains("report")) cfg.report_path = resolve(base, doc["report"].get<std::string>());

    if (doc.contains("backend")) {
      const auto& b = doc["backend"];
      cfg.backend = parse_backend_kind(b.value("kind", std::string("scripted")));
      if (b.contains("oracle")) cfg.oracle_path = resolve(base, b["oracle"].get<std::string>());
      read_field(b, "endpoint_url", cfg.http.endpoint_url);
      read_field(b, "api_key_env", cfg.http.api_key_env);
      read_field(b, "model_name", cfg.http.model_name);
      read_field(b, "max_parallel", cfg.http.max_parallel);
      read_field(b, "max_attempts", cfg.http.max_attempts);
      if (b.contains("timeout_ms")) cfg.http.timeout = std::chrono::milliseconds(b["timeout_ms"].get<long>());
    }
    if (doc.contains("retrieval")) {
      const auto& r = doc["retrieval"];
      read_field(r, "k1", cfg.pipeline.retrieval.k1);
      read_field(r, "b", cfg.pipeline.retrieval.b);
      read_field(r, "top_k_retrieve", cfg.pipeline.retrieval.top_k_retrieve);
      read_field(r, "top_k_context", cfg.pipeline.retrieval.top_k_context);
    }
    if (doc.contains("pipeline")) {
      const auto& p = doc["pipeline"];
      read_field(p, "max_steps", cfg.pipeline.max_steps);
      read_field(p, "parallel_subqueries", cfg.pipeline.parallel_subqueries);
      read_field(p, "relevance_filter_enabled", cfg.pipeline.ablation.relevance_filter_enabled);
      read_field(p, "ending_check_enabled", cfg.pipeline.ablation.ending_check_enabled);
      read_field(p, "refiner_enabled", cfg.pipeline.ablation.refiner_enabled);
      if (p.contains("forced_class") && !p["forced_class"].is_null()) {
        cfg.pipeline.forced_class = parse_query_class(p["forced_class"].get<std::string>());
      }
      if (p.contains("max_tokens")) cfg.pipeline.generation.max_tokens = p["max_tokens"].get<int>();
      if (p.contains("temperature")) cfg.pipeline.generation.temperature = p["temperature"].get<double>();
    }
    if (doc.contains("evaluation")) read_field(doc["evaluation"], "concurrency", cfg.evaluation.concurrency);
  } catch (const json::exception& e) {
    throw Error("config file " + path.string() + ": " + e.what());
  }
}

AppConfig make_config(const CommonFlags& flags) {
  AppConfig cfg;
  if (flags.config) apply_config_file(*flags.config, cfg);
  if (flags.corpus) cfg.corpus_path = *flags.corpus;
  if (flags.format) cfg.corpus_format = parse_corpus_format(*flags.format);
  if (flags.index) cfg.index_path = *flags.index;
  if (flags.backend) cfg.backend = parse_backend_kind(*flags.backend);
  if (flags.oracle) cfg.oracle_path = *flags.oracle;
  if (flags.endpoint) cfg.http.endpoint_url = *flags.endpoint;
  if (flags.model) cfg.http.model_name = *flags.model;
  if (flags.api_key_env) cfg.http.api_key_env = *flags.api_key_env;
  if (flags.max_steps) cfg.pipeline.max_steps = *flags.max_steps;
  if (flags.top_k) cfg.pipeline.retrieval.top_k_retrieve = *flags.top_k;
  if (flags.context_k) cfg.pipeline.retrieval.top_k_context = *flags.context_k;
  if (flags.force_class) cfg.pipeline.forced_class = parse_query_class(*flags.force_class);
  cfg.pipeline.validate();
  return cfg;
}

void require_file(const std::optional<fs::path>& path, const char* what) {
  if (!path) throw Error(std::string("no ") + what + " given (use a flag or the config file)");
  if (!fs::is_regular_file(*path)) throw IoError(std::string(what) + " not found: " + path->string());
}

// Everything needed to answer questions, kept alive together.
struct Session {
  Corpus corpus;
  Index index;
  std::unique_ptr<Backend> backend;
  std::unique_ptr<Pipeline> pipeline;
};

std::unique_ptr<Backend> make_backend(const AppConfig& cfg, const Corpus& corpus) {
  if (cfg.backend == BackendKind::scripted) {
    require_file(cfg.oracle_path, "oracle file");
    auto oracle = std::make_unique<ScriptedOracle>(ScriptedOracle::load(*cfg.oracle_path));
    oracle->bind_corpus(corpus);
    return oracle;
  }
  if (cfg.http.endpoint_url.empty()) throw Error("http backend needs endpoint_url");
  return std::make_unique<HttpBackend>(cfg.http);
}

std::unique_ptr<Session> open_session(const AppConfig& cfg) {
  require_file(cfg.corpus_path, "corpus file");
  if (cfg.index_path) require_file(cfg.index_path, "index file");
  if (cfg.backend == BackendKind::scripted) require_file(cfg.oracle_path, "oracle file");

  auto s = std::make_unique<Session>();
  s->corpus = Corpus::load(*cfg.corpus_path, cfg.corpus_format);
  if (cfg.index_path) {
    s->index = Index::load(*cfg.index_path);
    if (!s->index.matches(s->corpus)) {
      throw Error("index " + cfg.index_path->string() + " was not built from corpus " + cfg.corpus_path->string());
    }
  } else {
    s->index = Index::build(s->corpus);
  }
  s->backend = make_backend(cfg, s->corpus);
  s->pipeline = std::make_unique<Pipeline>(s->corpus, s->index, *s->backend, cfg.pipeline);
  return s;
}

void add_common_flags(CLI::App& cmd, CommonFlags& flags) {
  cmd.add_option("--config", flags.config, "JSON config file; flags override its values");
  cmd.add_option("--corpus", flags.corpus, "Corpus file (JSONL or TSV)");
  cmd.add_option("--format", flags.format, "Corpus format: jsonl or tsv (default: from extension)");
  cmd.add_option("--index", flags.index, "Prebuilt index file (built in memory when omitted)");
  cmd.add_option("--backend", flags.backend, "Model backend: scripted or http");
  cmd.add_option("--oracle", flags.oracle, "Scripted oracle JSONL");
  cmd.add_option("--endpoint", flags.endpoint, "Chat completions URL for the http backend");
  cmd.add_option("--model", flags.model, "Model name for the http backend");
  cmd.add_option("--api-key-env", flags.api_key_env, "Environment variable holding the API key");
  cmd.add_option("--max-steps", flags.max_steps, "Iteration cap for complex queries");
  cmd.add_option("--top-k", flags.top_k, "Passages retrieved per step");
  cmd.add_option("--context-k", flags.context_k, "Relevant passages passed to the generator");
  cmd.add_option("--force-class", flags.force_class,
                 "Skip routing: straightforward, single, compound or complex");
}

std::string ablation_label(const std::vector<std::string>& ablations, bool baseline) {
  std::string label = baseline ? "Naive-iterative" : "HANRAG";
  for (const auto& a : ablations) label += " -" + a;
  return label;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

int run_command(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Adaptive retrieval-augmented question answering", "hanrag"};
  app.require_subcommand(1);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Validate a corpus and write a JSONL snapshot");
  std::string ingest_corpus;
  std::optional<std::string> ingest_format;
  std::optional<std::string> ingest_out;
  ingest->add_option("--corpus", ingest_corpus, "Corpus file (JSONL or TSV)")->required();
  ingest->add_option("--format", ingest_format, "jsonl or tsv (default: from extension)");
  ingest->add_option("--out", ingest_out, "Snapshot path");

  // index
  auto* index_cmd = app.add_subcommand("index", "Build a BM25 index for a corpus");
  std::string index_corpus;
  std::optional<std::string> index_format;
  std::string index_out;
  index_cmd->add_option("--corpus", index_corpus, "Corpus file (JSONL or TSV)")->required();
  index_cmd->add_option("--format", index_format, "jsonl or tsv (default: from extension)");
  index_cmd->add_option("--out", index_out, "Index path")->required();

  // ask
  auto* ask = app.add_subcommand("ask", "Answer one question");
  CommonFlags ask_flags;
  std::string question;
  bool trace = false;
  ask->add_option("question", question, "The question")->required();
  ask->add_flag("--trace", trace, "Print the full pipeline result as JSON");
  add_common_flags(*ask, ask_flags);

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a dataset and report EM / F1 / Acc / Steps");
  CommonFlags eval_flags;
  std::string dataset;
  std::optional<std::string> report;
  std::vector<std::string> ablations;
  bool baseline = false;
  std::optional<std::size_t> concurrency;
  eval->add_option("--dataset", dataset, "Evaluation JSONL")->required();
  eval->add_option("--report", report, "Write the JSON report here");
  eval->add_option("--ablate", ablations, "Disable a component: relevance, ending or refiner")
      ->check(CLI::IsMember({"relevance", "ending", "refiner"}));
  eval->add_flag("--baseline", baseline, "Naive iterative baseline (every query treated as complex)");
  eval->add_option("--concurrency", concurrency, "Queries evaluated in parallel");
  add_common_flags(*eval, eval_flags);

  // benchgen
  auto* bench = app.add_subcommand("benchgen", "Synthesize a compound-question benchmark");
  CommonFlags bench_flags;
  std::size_t n_train = 0, n_dev = 0, n_test = 0;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  std::optional<std::string> training_sources;
  std::optional<std::string> training_dir;
  bench->add_option("--train", n_train, "Training examples")->required();
  bench->add_option("--dev", n_dev, "Dev examples")->required();
  bench->add_option("--test", n_test, "Test examples")->required();
  bench->add_option("--seed", seed, "Random seed")->required();
  bench->add_option("--out-dir", out_dir, "Directory for train/dev/test.jsonl");
  bench->add_option("--training-sources", training_sources, "Also emit training sets from these sources");
  bench->add_option("--training-out", training_dir, "Directory for training sets (default: <out-dir>/training)");
  add_common_flags(*bench, bench_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code == 0) return 0;
    err << '\n' << app.help();
    return 2;
  }

  try {
    if (*ingest) {
      std::optional<CorpusFormat> fmt;
      if (ingest_format) fmt = parse_corpus_format(*ingest_format);
      if (!fs::is_regular_file(ingest_corpus)) throw IoError("corpus file not found: " + ingest_corpus);
      const Corpus corpus = Corpus::load(ingest_corpus, fmt);
      if (ingest_out) corpus.save_snapshot(fs::path(*ingest_out));
      out << "passages: " << corpus.doc_count() << '\n';
      return 0;
    }

    if (*index_cmd) {
      std::optional<CorpusFormat> fmt;
      if (index_format) fmt = parse_corpus_format(*index_format);
      if (!fs::is_regular_file(index_corpus)) throw IoError("corpus file not found: " + index_corpus);
      const Corpus corpus = Corpus::load(index_corpus, fmt);
      const Index index = Index::build(corpus);
      index.save(fs::path(index_out));
      out << "passages: " << index.doc_count() << "\nterms: " << index.term_count() << '\n';
      return 0;
    }

    if (*ask) {
      const AppConfig cfg = make_config(ask_flags);
      auto session = open_session(cfg);
      const PipelineResult result = session->pipeline->answer(question);
      if (trace) {
        out << to_json(result).dump(2) << '\n';
      } else {
        out << "answer: " << result.answer << '\n';
        out << "class: " << to_string(result.query_class) << '\n';
        out << "steps: " << result.steps << '\n';
        for (const auto& w : result.warnings) out << "warning: " << w << '\n';
      }
      return 0;
    }

    if (*eval) {
      if (!fs::is_regular_file(dataset)) throw IoError("dataset file not found: " + dataset);
      AppConfig cfg = make_config(eval_flags);
      for (const auto& a : ablations) {
        if (a == "relevance") cfg.pipeline.ablation.relevance_filter_enabled = false;
        if (a == "ending") cfg.pipeline.ablation.ending_check_enabled = false;
        if (a == "refiner") cfg.pipeline.ablation.refiner_enabled = false;
      }
      if (baseline) cfg.pipeline.forced_class = QueryClass::complex;
      if (concurrency) cfg.evaluation.concurrency = *concurrency;
      if (report) cfg.report_path = *report;

      const auto examples = load_dataset(fs::path(dataset));
      auto session = open_session(cfg);
      const MetricsReport metrics = evaluate(examples, *session->pipeline, cfg.evaluation);
      if (cfg.report_path) write_text(*cfg.report_path, metrics.to_json().dump(2) + "\n");
      out << metrics.table(ablation_label(ablations, baseline));
      return 0;
    }

    if (*bench) {
      const AppConfig cfg = make_config(bench_flags);
      require_file(cfg.corpus_path, "corpus file");
      if (training_sources && !fs::is_regular_file(*training_sources)) {
        throw IoError("training sources not found: " + *training_sources);
      }
      const Corpus corpus = Corpus::load(*cfg.corpus_path, cfg.corpus_format);
      auto backend = make_backend(cfg, corpus);
      const Benchmark benchmark =
          build_benchmark(corpus, {n_train, n_dev, n_test}, seed, *backend, cfg.pipeline.generation);
      write_benchmark(benchmark, out_dir);
      const auto& st = benchmark.stats;
      out << "train: " << benchmark.train.size() << "\ndev: " << benchmark.dev.size()
          << "\ntest: " << benchmark.test.size() << '\n';
      out << "qa accepted: " << st.qa_accepted << "\nqa rejected: " << st.qa_rejected
          << "\ncompose accepted: " << st.compose_accepted << "\ncompose rejected: " << st.compose_rejected
          << "\nduplicates dropped: " << st.duplicates_dropped << "\nentities used: " << st.entities_used << '\n';

      if (training_sources) {
        std::ifstream in(*training_sources);
        TrainingSources sources = load_training_sources(in);
        for (const auto* split : {&benchmark.train}) {
          sources.compound.insert(sources.compound.end(), split->begin(), split->end());
        }
        const TrainingSets sets = build_training_sets(sources, &corpus, backend.get(), seed);
        const fs::path dir = training_dir ? fs::path(*training_dir) : fs::path(out_dir) / "training";
        write_training_sets(sets, dir);
        for (const auto& [task, records] : sets.records) {
          out << "training " << to_string(task) << ": " << records.size() << '\n';
        }
        for (const auto& [task, why] : sets.errors) {
          err << "training " << to_string(task) << " skipped: " << why << '\n';
        }
      }
      return 0;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace hanrag
