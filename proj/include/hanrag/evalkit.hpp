#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hanrag/pipeline.hpp"
#include "hanrag/revelator.hpp"
#include "hanrag/text.hpp"

namespace hanrag {

struct EvalExample {
  std::string id;
  std::string question;
  std::vector<std::string> answers;  // compound golds look like "1651 && Rachael"
  std::optional<int> hop_count;
  std::optional<QueryClass> gold_class;
};

int exact_match(std::string_view prediction, std::span<const std::string> answers);
double f1_score(std::string_view prediction, std::span<const std::string> answers);
int acc_contains(std::string_view prediction, std::span<const std::string> answers);

// "a && b" -> {"a", "b"}. Throws when any entity is empty after trimming.
std::vector<std::string> split_compound_answer(std::string_view gold);

// Fraction of gold entities whose normalized text occurs in the normalized
// prediction. Throws on an empty entity list.
double compound_accuracy(std::string_view prediction, std::span<const std::string> gold_entities);

// gold_class decides when present; otherwise any answer containing "&&".
bool is_compound(const EvalExample& example);

// JSONL with {id, question, answers[], hop_count?, gold_class?}. Also
// accepts "_id", a single "answer" string and "answer_aliases".
std::vector<EvalExample> load_dataset(std::istream& in);
std::vector<EvalExample> load_dataset(const std::filesystem::path& path);
nlohmann::json to_json(const EvalExample& example);

struct QueryMetrics {
  std::string id;
  std::string prediction;
  QueryClass query_class = QueryClass::straightforward;
  double em = 0.0;
  double f1 = 0.0;
  double acc = 0.0;  // compound accuracy for compound golds
  std::size_t steps = 0;
  bool compound = false;
  std::optional<std::string> error;
  std::vector<std::string> warnings;
};

// Score one prediction against its example.
QueryMetrics score_prediction(const EvalExample& example, const PipelineResult& result);

struct MetricsReport {
  std::vector<QueryMetrics> per_query;
  std::size_t count = 0;
  double em = 0.0;     // percent
  double f1 = 0.0;     // mean in [0, 1]
  double acc = 0.0;    // percent
  double steps = 0.0;  // mean retrieval-generation cycles
  std::size_t errors = 0;

  nlohmann::json to_json() const;
  // Plain-text table with EM / F1 / Acc / Steps columns.
  std::string table(std::string_view label = "HANRAG") const;
};

// Aggregates are recomputed from the rows only. Throws on an empty list.
MetricsReport aggregate(std::vector<QueryMetrics> rows);

struct EvalOptions {
  std::size_t concurrency = 4;
};

// Runs the pipeline on every example. Failures never abort the run: they
// score zero, keep the steps they incurred and are flagged in the row.
MetricsReport evaluate(std::span<const EvalExample> examples, const Pipeline& pipeline,
                       EvalOptions options = {});

}  // namespace hanrag
