#include "hanrag/prompts.hpp"

#include <algorithm>
#include <array>

#include "hanrag/errors.hpp"
#include "prompt_templates.hpp"

namespace hanrag {
namespace {

constexpr std::array k_all_templates = {
    TemplateId::router,    TemplateId::decomposer, TemplateId::refiner,
    TemplateId::relevance, TemplateId::generator,  TemplateId::ending,
    TemplateId::single_qa_gen, TemplateId::compound_compose,
};

struct Piece {
  bool is_slot;
  std::string_view text;  // literal text or slot name
};

// Splits a body into alternating literal / slot pieces. Slots are
// "<name>" with name made of lowercase letters and underscores.
std::vector<Piece> split_body(std::string_view body) {
  std::vector<Piece> pieces;
  std::size_t literal_start = 0;
  std::size_t pos = 0;
  while ((pos = body.find('<', pos)) != std::string_view::npos) {
    std::size_t end = pos + 1;
    while (end < body.size() && ((body[end] >= 'a' && body[end] <= 'z') || body[end] == '_')) ++end;
    if (end < body.size() && body[end] == '>' && end > pos + 1) {
      pieces.push_back({false, body.substr(literal_start, pos - literal_start)});
      pieces.push_back({true, body.substr(pos + 1, end - pos - 1)});
      literal_start = end + 1;
      pos = end + 1;
    } else {
      ++pos;
    }
  }
  pieces.push_back({false, body.substr(literal_start)});
  return pieces;
}

std::string single_line(std::string_view text) {
  std::string out(text);
  for (char& c : out) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return out;
}

}  // namespace

std::string_view to_string(TemplateId id) noexcept {
  switch (id) {
    case TemplateId::router: return "router";
    case TemplateId::decomposer: return "decomposer";
    case TemplateId::refiner: return "refiner";
    case TemplateId::relevance: return "relevance";
    case TemplateId::generator: return "generator";
    case TemplateId::ending: return "ending";
    case TemplateId::single_qa_gen: return "single_qa_gen";
    case TemplateId::compound_compose: return "compound_compose";
  }
  return "unknown";
}

TemplateId parse_template_id(std::string_view name) {
  for (auto id : k_all_templates) {
    if (to_string(id) == name) return id;
  }
  throw Error("unknown template id \"" + std::string(name) + "\"");
}

std::span<const TemplateId> all_templates() noexcept { return k_all_templates; }

std::string_view template_body(TemplateId id) noexcept {
  switch (id) {
    case TemplateId::router: return detail::k_router_template;
    case TemplateId::decomposer: return detail::k_decomposer_template;
    case TemplateId::refiner: return detail::k_refiner_template;
    case TemplateId::relevance: return detail::k_relevance_template;
    case TemplateId::generator: return detail::k_generator_template;
    case TemplateId::ending: return detail::k_ending_template;
    case TemplateId::single_qa_gen: return detail::k_single_qa_gen_template;
    case TemplateId::compound_compose: return detail::k_compound_compose_template;
  }
  return {};
}

std::vector<std::string> template_slots(TemplateId id) {
  std::vector<std::string> slots;
  for (const auto& piece : split_body(template_body(id))) {
    if (!piece.is_slot) continue;
    std::string name(piece.text);
    if (std::find(slots.begin(), slots.end(), name) == slots.end()) slots.push_back(std::move(name));
  }
  return slots;
}

std::string render_prompt(TemplateId id, const Bindings& bindings) {
  const auto body = template_body(id);
  std::string out;
  out.reserve(body.size() + 256);
  for (const auto& piece : split_body(body)) {
    if (!piece.is_slot) {
      out += piece.text;
      continue;
    }
    auto it = bindings.find(piece.text);
    if (it == bindings.end()) {
      throw Error("template " + std::string(to_string(id)) + ": missing slot <" +
                  std::string(piece.text) + ">");
    }
    out += it->second;
  }
  return out;
}

std::string render_prompt(std::string_view template_name, const Bindings& bindings) {
  return render_prompt(parse_template_id(template_name), bindings);
}

std::optional<MatchedPrompt> match_prompt(std::string_view prompt) {
  for (auto id : k_all_templates) {
    const auto pieces = split_body(template_body(id));
    const std::string_view head = pieces.front().text;
    if (!prompt.starts_with(head)) continue;
    const std::string_view tail = pieces.back().text;
    if (prompt.size() < head.size() + tail.size() || !prompt.ends_with(tail)) continue;

    MatchedPrompt match{id, {}};
    std::size_t pos = head.size();
    const std::size_t limit = prompt.size() - tail.size();
    bool ok = true;
    for (std::size_t i = 1; i + 1 < pieces.size(); i += 2) {
      std::size_t value_end = limit;
      std::size_t next = limit;
      if (i + 1 != pieces.size() - 1) {
        const auto literal = pieces[i + 1].text;
        value_end = prompt.find(literal, pos);
        if (value_end == std::string_view::npos || value_end + literal.size() > limit) {
          ok = false;
          break;
        }
        next = value_end + literal.size();
      }
      if (value_end < pos) {
        ok = false;
        break;
      }
      match.bindings.insert_or_assign(std::string(pieces[i].text),
                                      std::string(prompt.substr(pos, value_end - pos)));
      pos = next;
    }
    if (ok) return match;
  }
  return std::nullopt;
}

std::string render_doc_list(std::span<const std::string> docs) {
  std::string out;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (i > 0) out += '\n';
    out += "Doc" + std::to_string(i + 1) + ": ```" + docs[i] + "```";
  }
  return out;
}

namespace {

// Shared parser for "<Label>N: ```value```" lists joined by newlines.
std::vector<std::string> parse_fenced_list(std::string_view rendered, std::string_view label) {
  std::vector<std::string> items;
  if (rendered.empty()) return items;
  auto opener = [&](std::size_t n) { return std::string(label) + std::to_string(n) + ": ```"; };
  std::size_t pos = 0;
  for (std::size_t n = 1;; ++n) {
    const auto open = opener(n);
    if (rendered.substr(pos).substr(0, open.size()) != open) {
      throw Error("malformed " + std::string(label) + " list at item " + std::to_string(n));
    }
    pos += open.size();
    const std::string next_sep = "```\n" + opener(n + 1);
    const auto sep = rendered.find(next_sep, pos);
    if (sep != std::string_view::npos) {
      items.emplace_back(rendered.substr(pos, sep - pos));
      pos = sep + 4;
      continue;
    }
    if (!rendered.ends_with("```") || rendered.size() < pos + 3) {
      throw Error("malformed " + std::string(label) + " list: unterminated item " + std::to_string(n));
    }
    items.emplace_back(rendered.substr(pos, rendered.size() - 3 - pos));
    return items;
  }
}

}  // namespace

std::vector<std::string> parse_doc_list(std::string_view rendered) {
  return parse_fenced_list(rendered, "Doc");
}

std::string render_thought(std::span<const ThoughtStep> steps) {
  if (steps.empty()) return "nothing";
  std::string out;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto n = std::to_string(i + 1);
    if (i > 0) out += '\n';
    out += "**seed query-" + n + "**: " + single_line(steps[i].seed) + "\n";
    out += "**answer-" + n + "**: " + single_line(steps[i].answer);
  }
  return out;
}

std::vector<ThoughtStep> parse_thought(std::string_view rendered) {
  std::vector<ThoughtStep> steps;
  if (rendered == "nothing") return steps;
  std::size_t pos = 0;
  while (pos <= rendered.size()) {
    auto eol = rendered.find('\n', pos);
    if (eol == std::string_view::npos) eol = rendered.size();
    const auto line = rendered.substr(pos, eol - pos);
    const std::string seed_tag = "**seed query-" + std::to_string(steps.size() + 1) + "**: ";
    const std::string answer_tag = "**answer-" + std::to_string(steps.size()) + "**: ";
    if (line.starts_with(seed_tag)) {
      steps.push_back({std::string(line.substr(seed_tag.size())), {}});
    } else if (!steps.empty() && line.starts_with(answer_tag)) {
      steps.back().answer = std::string(line.substr(answer_tag.size()));
    } else if (!line.empty()) {
      throw Error("malformed thought block line: " + std::string(line));
    }
    pos = eol + 1;
  }
  return steps;
}

std::string render_simple_questions(std::span<const std::string> questions) {
  std::string out;
  for (std::size_t i = 0; i < questions.size(); ++i) {
    if (i > 0) out += '\n';
    out += "Simple Question" + std::to_string(i + 1) + ": ```" + single_line(questions[i]) + "```";
  }
  return out;
}

std::vector<std::string> parse_simple_questions(std::string_view rendered) {
  return parse_fenced_list(rendered, "Simple Question");
}

}  // namespace hanrag
