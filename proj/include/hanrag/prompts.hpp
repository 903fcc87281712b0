#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace hanrag {

enum class TemplateId {
  router,
  decomposer,
  refiner,
  relevance,
  generator,
  ending,
  single_qa_gen,
  compound_compose,
};

// Slot names without angle brackets, e.g. "your_query".
using Bindings = std::map<std::string, std::string, std::less<>>;

std::string_view to_string(TemplateId id) noexcept;
TemplateId parse_template_id(std::string_view name);
std::span<const TemplateId> all_templates() noexcept;

std::string_view template_body(TemplateId id) noexcept;

// Slots in order of first appearance in the body.
std::vector<std::string> template_slots(TemplateId id);

// Substitutes every <slot> in the body. Throws hanrag::Error naming the first
// slot missing from bindings. Extra bindings are ignored.
std::string render_prompt(TemplateId id, const Bindings& bindings);
std::string render_prompt(std::string_view template_name, const Bindings& bindings);

// Inverse of render_prompt: identifies the template a prompt was rendered
// from and recovers its bindings. Slot values must not contain the literal
// text that follows them in the template.
struct MatchedPrompt {
  TemplateId id;
  Bindings bindings;
};
std::optional<MatchedPrompt> match_prompt(std::string_view prompt);

// "Doc1: ```text```\nDoc2: ```text```" numbered from 1; empty for no docs.
std::string render_doc_list(std::span<const std::string> docs);
std::vector<std::string> parse_doc_list(std::string_view rendered);

struct ThoughtStep {
  std::string seed;
  std::string answer;
};

// "**seed query-i**: ...\n**answer-i**: ..." blocks, or "nothing" when empty.
std::string render_thought(std::span<const ThoughtStep> steps);
std::vector<ThoughtStep> parse_thought(std::string_view rendered);

// "Simple Question1: ```q```" lines for the compound composer.
std::string render_simple_questions(std::span<const std::string> questions);
std::vector<std::string> parse_simple_questions(std::string_view rendered);

}  // namespace hanrag
