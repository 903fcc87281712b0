#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "hanrag/corpus.hpp"
#include "hanrag/errors.hpp"
#include "hanrag/llm.hpp"
#include "hanrag/prompts.hpp"

namespace hanrag {

enum class QueryClass { straightforward, single, compound, complex };

std::string_view to_string(QueryClass cls) noexcept;
// Accepts the enum names used in configs and datasets ("single", ...).
QueryClass parse_query_class(std::string_view name);

struct SubQuery {
  std::string text;
  std::size_t index = 1;  // 1-based

  friend bool operator==(const SubQuery&, const SubQuery&) = default;
};

struct RelevanceVerdict {
  bool is_rel = false;
};

struct EndingVerdict {
  bool is_ending = false;
};

// One retrieve-filter-generate cycle.
struct StepRecord {
  SubQuery seed;
  std::string answer;
  std::vector<std::string> passages_used;  // generator context, in rank order
  std::vector<std::string> candidates;     // everything the retriever returned
  std::vector<std::string> filtered_out;   // candidates judged irrelevant

  friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

struct ReasoningTrace {
  std::vector<StepRecord> steps;

  bool empty() const noexcept { return steps.empty(); }
  std::size_t size() const noexcept { return steps.size(); }
  // Appends with the next contiguous index.
  StepRecord& append(StepRecord step);
  std::vector<ThoughtStep> thought() const;

  friend bool operator==(const ReasoningTrace&, const ReasoningTrace&) = default;
};

// Parse failures keep the raw model output for diagnostics.
class RevelatorParseError : public Error {
 public:
  RevelatorParseError(const std::string& what, std::string raw)
      : Error(what), raw_(std::move(raw)) {}
  const std::string& raw_output() const noexcept { return raw_; }

 private:
  std::string raw_;
};

class RoutingParseError : public RevelatorParseError {
 public:
  explicit RoutingParseError(std::string raw)
      : RevelatorParseError("cannot parse routing label: \"" + raw + "\"", raw) {}
};

class DecompositionParseError : public RevelatorParseError {
 public:
  DecompositionParseError(const std::string& reason, std::string raw)
      : RevelatorParseError("cannot parse decomposition: " + reason, std::move(raw)) {}
};

class RefinementError : public RevelatorParseError {
 public:
  explicit RefinementError(std::string raw)
      : RevelatorParseError("refiner returned no seed question", std::move(raw)) {}
};

class RelevanceParseError : public RevelatorParseError {
 public:
  explicit RelevanceParseError(std::string raw)
      : RevelatorParseError("cannot parse relevance verdict: \"" + raw + "\"", raw) {}
};

class EndingParseError : public RevelatorParseError {
 public:
  explicit EndingParseError(std::string raw)
      : RevelatorParseError("cannot parse ending verdict: \"" + raw + "\"", raw) {}
};

// Output grammars. Labels are matched case-insensitively after stripping
// surrounding whitespace and punctuation.
QueryClass parse_route(std::string_view output);
std::vector<SubQuery> parse_decomposition(std::string_view output);
SubQuery parse_refinement(std::string_view output);
RelevanceVerdict parse_relevance(std::string_view output);
EndingVerdict parse_ending(std::string_view output);

// The five judgment capabilities. Each call renders one prompt, makes at
// most one backend call and parses the reply strictly.
class Revelator {
 public:
  explicit Revelator(Backend& backend, GenParams params = {}) : backend_(backend), params_(std::move(params)) {}

  QueryClass route(std::string_view query) const;
  std::vector<SubQuery> decompose(std::string_view query) const;
  SubQuery refine(std::string_view query, const ReasoningTrace& trace) const;
  RelevanceVerdict judge_relevance(std::string_view query, const Passage& passage) const;
  // An empty trace is never finished and costs no backend call.
  EndingVerdict judge_ending(std::string_view query, const ReasoningTrace& trace) const;

 private:
  std::string call(TemplateId id, const Bindings& bindings) const;

  Backend& backend_;
  GenParams params_;
};

}  // namespace hanrag
