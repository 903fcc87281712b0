#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hanrag/corpus.hpp"
#include "hanrag/llm.hpp"
#include "hanrag/retriever.hpp"
#include "hanrag/revelator.hpp"

namespace hanrag {

struct AblationFlags {
  bool relevance_filter_enabled = true;
  bool ending_check_enabled = true;
  bool refiner_enabled = true;
};

struct PipelineConfig {
  RetrievalConfig retrieval;
  std::size_t max_steps = 5;
  AblationFlags ablation;
  bool parallel_subqueries = true;
  // Skips the router. Forcing complex gives the naive iterative baseline.
  std::optional<QueryClass> forced_class;
  GenParams generation;

  void validate() const;
};

// Warning tags recorded in PipelineResult::warnings.
namespace warning {
inline constexpr std::string_view all_filtered = "all_filtered";
inline constexpr std::string_view max_steps_exhausted = "max_steps_exhausted";
inline constexpr std::string_view routing_parse_failed = "routing_parse_failed";
inline constexpr std::string_view decomposition_parse_failed = "decomposition_parse_failed";
inline constexpr std::string_view relevance_parse_failed = "relevance_parse_failed";
inline constexpr std::string_view ending_parse_failed = "ending_parse_failed";
inline constexpr std::string_view refinement_failed = "refinement_failed";
inline constexpr std::string_view error = "error";
}  // namespace warning

struct AnragResult {
  std::string answer;
  std::vector<std::string> candidates;
  std::vector<std::string> passages_used;
  std::vector<std::string> filtered_out;
  std::vector<std::string> warnings;
};

struct PipelineResult {
  std::string query;
  std::string answer;
  QueryClass query_class = QueryClass::straightforward;
  std::size_t steps = 0;
  ReasoningTrace trace;                 // single and complex queries
  std::vector<StepRecord> sub_results;  // compound queries, in sub-query order
  std::vector<std::string> warnings;

  bool has_warning(std::string_view tag) const;

  friend bool operator==(const PipelineResult&, const PipelineResult&) = default;
};

nlohmann::json to_json(const PipelineResult& result);
PipelineResult pipeline_result_from_json(const nlohmann::json& doc);

// Raised when a branch fails; carries whatever was completed before the failure.
class PipelineError : public Error {
 public:
  PipelineError(const std::string& what, PipelineResult partial)
      : Error(what), partial_(std::move(partial)) {}
  const PipelineResult& partial() const noexcept { return partial_; }

 private:
  PipelineResult partial_;
};

// Adaptive dispatch over the four query classes. The judging backend and the
// answer-generating backend may be the same object.
class Pipeline {
 public:
  Pipeline(const Corpus& corpus, const Index& index, Backend& revelator_backend,
           Backend& generator_backend, PipelineConfig config = {});
  Pipeline(const Corpus& corpus, const Index& index, Backend& backend, PipelineConfig config = {});

  // Retrieve top_k_retrieve, keep the passages judged relevant (first
  // top_k_context of them by rank), generate from the survivors.
  AnragResult anrag(std::string_view question) const;

  PipelineResult answer(std::string_view query) const;
  PipelineResult answer_straightforward(std::string_view query) const;
  PipelineResult answer_single(std::string_view query) const;
  PipelineResult answer_compound(std::string_view query) const;
  PipelineResult answer_complex(std::string_view query) const;

  const PipelineConfig& config() const noexcept { return config_; }
  const Revelator& revelator() const noexcept { return revelator_; }

 private:
  std::string generate(std::string_view question, std::span<const std::string> docs) const;
  StepRecord run_step(const SubQuery& seed, std::vector<std::string>& warnings) const;

  void run_straightforward(PipelineResult& out) const;
  void run_single(PipelineResult& out) const;
  void run_compound(PipelineResult& out) const;
  void run_complex(PipelineResult& out) const;

  template <typename Branch>
  PipelineResult guarded(std::string_view query, QueryClass cls, Branch&& branch) const;

  const Corpus& corpus_;
  const Index& index_;
  Backend& generator_backend_;
  Revelator revelator_;
  Retriever retriever_;
  PipelineConfig config_;
};

// Renders a (sub-question, answer) pair as one context document for the
// aggregation call.
std::string render_sub_answer(std::string_view question, std::string_view answer);

}  // namespace hanrag
