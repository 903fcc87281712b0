#include "hanrag/revelator.hpp"

#include <json.hpp>

#include "hanrag/text.hpp"

namespace hanrag {

using nlohmann::json;

std::string_view to_string(QueryClass cls) noexcept {
  switch (cls) {
    case QueryClass::straightforward: return "straightforward";
    case QueryClass::single: return "single";
    case QueryClass::compound: return "compound";
    case QueryClass::complex: return "complex";
  }
  return "unknown";
}

QueryClass parse_query_class(std::string_view name) {
  for (auto cls : {QueryClass::straightforward, QueryClass::single, QueryClass::compound,
                   QueryClass::complex}) {
    if (iequals_ascii(name, to_string(cls))) return cls;
  }
  throw Error("unknown query class \"" + std::string(name) + "\"");
}

StepRecord& ReasoningTrace::append(StepRecord step) {
  step.seed.index = steps.size() + 1;
  steps.push_back(std::move(step));
  return steps.back();
}

std::vector<ThoughtStep> ReasoningTrace::thought() const {
  std::vector<ThoughtStep> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back({s.seed.text, s.answer});
  return out;
}

namespace {

bool is_label_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

// Lowercased label with surrounding whitespace/punctuation removed and inner
// whitespace collapsed to single spaces.
std::string clean_label(std::string_view output) {
  std::size_t begin = 0;
  std::size_t end = output.size();
  while (begin < end && !is_label_char(output[begin])) ++begin;
  while (end > begin && !is_label_char(output[end - 1])) --end;
  std::string out;
  bool pending_space = false;
  for (char c : output.substr(begin, end - begin)) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    out.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c + 32) : c);
  }
  return out;
}

std::string_view strip_code_fence(std::string_view text) {
  text = trim(text);
  if (!text.starts_with("```") || !text.ends_with("```") || text.size() < 6) return text;
  text.remove_prefix(3);
  text.remove_suffix(3);
  if (text.starts_with("json")) text.remove_prefix(4);
  return trim(text);
}

}  // namespace

QueryClass parse_route(std::string_view output) {
  const std::string label = clean_label(output);
  if (label == "straightforward question" || label == "straightforward") return QueryClass::straightforward;
  if (label == "single-step question" || label == "single-step" || label == "single step question" ||
      label == "single step" || label == "single") {
    return QueryClass::single;
  }
  if (label == "compound question" || label == "compound") return QueryClass::compound;
  if (label == "complex question" || label == "complex") return QueryClass::complex;
  throw RoutingParseError(std::string(output));
}

std::vector<SubQuery> parse_decomposition(std::string_view output) {
  json doc;
  try {
    doc = json::parse(strip_code_fence(output));
  } catch (const json::parse_error&) {
    throw DecompositionParseError("not valid JSON", std::string(output));
  }
  if (!doc.is_object()) throw DecompositionParseError("not a JSON object", std::string(output));
  if (!doc.contains("thought")) throw DecompositionParseError("missing key \"thought\"", std::string(output));
  const auto it = doc.find("decomposition");
  if (it == doc.end()) throw DecompositionParseError("missing key \"decomposition\"", std::string(output));
  if (!it->is_array()) throw DecompositionParseError("\"decomposition\" is not a list", std::string(output));
  if (it->empty()) throw DecompositionParseError("\"decomposition\" is empty", std::string(output));

  std::vector<SubQuery> out;
  for (const auto& item : *it) {
    if (!item.is_string()) throw DecompositionParseError("sub-question is not a string", std::string(output));
    const auto text = trim(item.get_ref<const std::string&>());
    if (text.empty()) throw DecompositionParseError("empty sub-question", std::string(output));
    out.push_back({std::string(text), out.size() + 1});
  }
  return out;
}

SubQuery parse_refinement(std::string_view output) {
  std::size_t pos = 0;
  while (pos <= output.size()) {
    auto eol = output.find('\n', pos);
    if (eol == std::string_view::npos) eol = output.size();
    const auto line = trim(output.substr(pos, eol - pos));
    if (!line.empty()) return {std::string(line), 1};
    pos = eol + 1;
  }
  throw RefinementError(std::string(output));
}

RelevanceVerdict parse_relevance(std::string_view output) {
  const std::string label = clean_label(output);
  if (label == "true") return {true};
  if (label == "false") return {false};
  throw RelevanceParseError(std::string(output));
}

EndingVerdict parse_ending(std::string_view output) {
  const std::string label = clean_label(output);
  if (label == "yes") return {true};
  if (label == "no") return {false};
  throw EndingParseError(std::string(output));
}

std::string Revelator::call(TemplateId id, const Bindings& bindings) const {
  return backend_.complete(render_prompt(id, bindings), params_);
}

QueryClass Revelator::route(std::string_view query) const {
  if (trim(query).empty()) throw Error("route: query is empty");
  return parse_route(call(TemplateId::router, {{"your_query", std::string(query)}}));
}

std::vector<SubQuery> Revelator::decompose(std::string_view query) const {
  return parse_decomposition(call(TemplateId::decomposer, {{"your_query", std::string(query)}}));
}

SubQuery Revelator::refine(std::string_view query, const ReasoningTrace& trace) const {
  const auto thought = trace.thought();
  SubQuery seed = parse_refinement(call(
      TemplateId::refiner, {{"your_query", std::string(query)}, {"your_thought", render_thought(thought)}}));
  seed.index = trace.size() + 1;
  return seed;
}

RelevanceVerdict Revelator::judge_relevance(std::string_view query, const Passage& passage) const {
  return parse_relevance(
      call(TemplateId::relevance, {{"your_query", std::string(query)}, {"your_doc", render_passage(passage)}}));
}

EndingVerdict Revelator::judge_ending(std::string_view query, const ReasoningTrace& trace) const {
  if (trace.empty()) return {false};
  const auto thought = trace.thought();
  return parse_ending(
      call(TemplateId::ending, {{"your_query", std::string(query)}, {"your_thought", render_thought(thought)}}));
}

}  // namespace hanrag
