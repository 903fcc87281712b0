#include "hanrag/llm.hpp"

#include <algorithm>
#include <fstream>
#include <istream>

#include <json.hpp>

#include "hanrag/text.hpp"

namespace hanrag {

using nlohmann::json;

// ---------------------------------------------------------------------------
// RecordingBackend

std::string RecordingBackend::complete(std::string_view prompt, const GenParams& params) {
  std::string response = inner_.complete(prompt, params);
  std::optional<TemplateId> id;
  if (auto match = match_prompt(prompt)) id = match->id;
  std::lock_guard lock(mutex_);
  calls_.push_back({id, std::string(prompt), response});
  return response;
}

std::vector<RecordingBackend::Call> RecordingBackend::calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

std::size_t RecordingBackend::count(TemplateId id) const {
  std::lock_guard lock(mutex_);
  std::size_t n = 0;
  for (const auto& c : calls_) n += (c.template_id == id) ? 1 : 0;
  return n;
}

std::size_t RecordingBackend::total() const {
  std::lock_guard lock(mutex_);
  return calls_.size();
}

void RecordingBackend::clear() {
  std::lock_guard lock(mutex_);
  calls_.clear();
}

// ---------------------------------------------------------------------------
// ScriptedOracle

std::string_view to_string(OracleKind kind) noexcept {
  switch (kind) {
    case OracleKind::fact: return "fact";
    case OracleKind::route: return "route";
    case OracleKind::relevance: return "relevance";
    case OracleKind::ending: return "ending";
    case OracleKind::decompose: return "decompose";
    case OracleKind::refine: return "refine";
    case OracleKind::qa: return "qa";
    case OracleKind::compose: return "compose";
  }
  return "unknown";
}

OracleKind parse_oracle_kind(std::string_view name) {
  for (auto kind : {OracleKind::fact, OracleKind::route, OracleKind::relevance, OracleKind::ending,
                    OracleKind::decompose, OracleKind::refine, OracleKind::qa, OracleKind::compose}) {
    if (to_string(kind) == name) return kind;
  }
  throw Error("unknown oracle record kind \"" + std::string(name) + "\"");
}

std::string ScriptedOracle::key(std::string_view question) { return normalize_answer(question); }

namespace {

std::string joined_key(const std::vector<std::string>& questions) {
  std::string out;
  for (const auto& q : questions) {
    if (!out.empty()) out += " || ";
    out += ScriptedOracle::key(q);
  }
  return out;
}

bool parse_flag(const json& value, std::string_view yes, std::string_view no) {
  if (value.is_boolean()) return value.get<bool>();
  if (value.is_string()) {
    const auto s = value.get<std::string>();
    if (iequals_ascii(s, yes)) return true;
    if (iequals_ascii(s, no)) return false;
  }
  throw Error("expected boolean, \"" + std::string(yes) + "\" or \"" + std::string(no) + "\"");
}

std::vector<std::string> string_list(const json& record, const char* field) {
  std::vector<std::string> out;
  if (auto it = record.find(field); it != record.end()) {
    for (const auto& v : *it) out.push_back(v.get<std::string>());
  }
  return out;
}

std::string replace_all(std::string text, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = text.find(from, pos)) != std::string::npos) {
    text.replace(pos, from.size(), to);
    pos += to.size();
  }
  return text;
}

// "When was X first published?" + "What is Y?" -> "When was X first published, and what is Y?"
std::string join_questions(const std::vector<std::string>& questions) {
  std::string out;
  for (std::size_t i = 0; i < questions.size(); ++i) {
    std::string q(trim(questions[i]));
    while (!q.empty() && (q.back() == '?' || q.back() == '.')) q.pop_back();
    if (i > 0) {
      out += (i + 1 == questions.size()) ? ", and " : ", ";
      if (!q.empty() && q[0] >= 'A' && q[0] <= 'Z') q[0] = static_cast<char>(q[0] + 32);
    }
    out += q;
  }
  return out + "?";
}

}  // namespace

void ScriptedOracle::load_records(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const json r = json::parse(line);
      const auto kind_name = r.at("kind").get<std::string>();
      if (kind_name == "default") {
        set_default(parse_oracle_kind(r.at("key").get<std::string>()), r.at("value").get<std::string>());
        continue;
      }
      switch (parse_oracle_kind(kind_name)) {
        case OracleKind::fact:
          add_fact(r.at("key").get<std::string>(),
                   FactRule{r.at("value").get<std::string>(), string_list(r, "when_context_has"),
                            string_list(r, "unless_context_has")});
          break;
        case OracleKind::route:
          add_route(r.at("key").get<std::string>(), r.at("value").get<std::string>());
          break;
        case OracleKind::relevance:
          add_relevance(r.at("key").get<std::string>(), r.at("passage").get<std::string>(),
                        parse_flag(r.at("value"), "true", "false"));
          break;
        case OracleKind::ending:
          add_ending(r.at("key").get<std::string>(), r.at("step").get<std::size_t>(),
                     parse_flag(r.at("value"), "yes", "no"));
          break;
        case OracleKind::decompose:
          if (r.at("value").is_string()) {
            add_decomposition_raw(r.at("key").get<std::string>(), r.at("value").get<std::string>());
          } else {
            add_decomposition(r.at("key").get<std::string>(),
                              r.at("value").get<std::vector<std::string>>());
          }
          break;
        case OracleKind::refine:
          add_refinement(r.at("key").get<std::string>(), r.value("step", std::size_t{1}),
                         r.at("value").get<std::string>());
          break;
        case OracleKind::qa:
          if (r.at("value").is_string()) {
            add_qa_raw(r.at("key").get<std::string>(), r.at("value").get<std::string>());
          } else {
            add_qa(r.at("key").get<std::string>(), r.at("value").at("Question").get<std::string>(),
                   r.at("value").at("Answer").get<std::string>());
          }
          break;
        case OracleKind::compose:
          add_composition(r.at("key").get<std::vector<std::string>>(), r.at("value").get<std::string>());
          break;
      }
    } catch (const json::exception& e) {
      throw ParseError(line_no, std::string("malformed oracle record: ") + e.what());
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(line_no, e.what());
    }
  }
}

ScriptedOracle ScriptedOracle::load(std::istream& in) {
  ScriptedOracle oracle;
  oracle.load_records(in);
  return oracle;
}

ScriptedOracle ScriptedOracle::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open oracle file: " + path.string());
  return load(in);
}

void ScriptedOracle::bind_corpus(const Corpus& corpus) {
  for (const auto& p : corpus) {
    passage_by_text_.try_emplace(render_passage(p), p.id);
    passage_by_text_.try_emplace(p.text, p.id);
  }
}

void ScriptedOracle::add_fact(std::string_view question, FactRule rule) {
  facts_[key(question)].push_back(std::move(rule));
}

void ScriptedOracle::add_fact(std::string_view question, std::string value) {
  add_fact(question, FactRule{std::move(value), {}, {}});
}

void ScriptedOracle::add_route(std::string_view question, std::string label) {
  routes_[key(question)] = std::move(label);
}

void ScriptedOracle::add_relevance(std::string_view question, std::string passage_id, bool relevant) {
  relevance_[{key(question), std::move(passage_id)}] = relevant;
}

void ScriptedOracle::add_ending(std::string_view question, std::size_t steps, bool ended) {
  endings_[{key(question), steps}] = ended;
}

void ScriptedOracle::add_decomposition(std::string_view question,
                                       const std::vector<std::string>& sub_questions) {
  const json out = {{"thought", "scripted decomposition"}, {"decomposition", sub_questions}};
  decompositions_[key(question)] = out.dump();
}

void ScriptedOracle::add_decomposition_raw(std::string_view question, std::string raw_output) {
  decompositions_[key(question)] = std::move(raw_output);
}

void ScriptedOracle::add_refinement(std::string_view question, std::size_t step, std::string seed) {
  refinements_[{key(question), step}] = std::move(seed);
}

void ScriptedOracle::add_qa(std::string passage_id, std::string question, std::string answer) {
  const json out = {{"Question", std::move(question)}, {"Answer", std::move(answer)}};
  qa_[std::move(passage_id)] = out.dump();
}

void ScriptedOracle::add_qa_raw(std::string passage_id, std::string raw_output) {
  qa_[std::move(passage_id)] = std::move(raw_output);
}

void ScriptedOracle::add_composition(const std::vector<std::string>& simple_questions,
                                     std::string compound) {
  compositions_[joined_key(simple_questions)] = std::move(compound);
}

void ScriptedOracle::set_default(OracleKind kind, std::string value) { defaults_[kind] = std::move(value); }

std::string ScriptedOracle::resolve_passage(std::string_view doc_text) const {
  auto it = passage_by_text_.find(std::string(doc_text));
  return it == passage_by_text_.end() ? std::string(doc_text) : it->second;
}

std::string ScriptedOracle::miss(OracleKind kind, const std::string& key, std::string_view query,
                                 std::string_view joined) const {
  auto it = defaults_.find(kind);
  if (it == defaults_.end()) throw OracleMissError(std::string(to_string(kind)) + ":" + key);
  std::string value = replace_all(it->second, "{query}", trim(query));
  return replace_all(std::move(value), "{joined}", joined);
}

std::string ScriptedOracle::answer_fact(const Bindings& bindings) const {
  const auto& question = bindings.at("your_query");
  const std::string k = key(question);
  std::vector<std::string> context;
  for (const auto& doc : parse_doc_list(bindings.at("your_doc_list"))) {
    context.push_back(resolve_passage(doc));
  }
  auto in_context = [&](const std::string& id) {
    return std::find(context.begin(), context.end(), id) != context.end();
  };
  if (auto it = facts_.find(k); it != facts_.end()) {
    for (const auto& rule : it->second) {
      const bool has_all = std::all_of(rule.when_context_has.begin(), rule.when_context_has.end(), in_context);
      const bool has_none =
          std::none_of(rule.unless_context_has.begin(), rule.unless_context_has.end(), in_context);
      if (has_all && has_none) return rule.value;
    }
  }
  return miss(OracleKind::fact, k, question);
}

std::string ScriptedOracle::answer_compose(const Bindings& bindings) const {
  const auto questions = parse_simple_questions(bindings.at("simple_questions"));
  const std::string k = joined_key(questions);
  if (auto it = compositions_.find(k); it != compositions_.end()) return it->second;
  return miss(OracleKind::compose, k, "", join_questions(questions));
}

std::string ScriptedOracle::complete(std::string_view prompt, const GenParams&) {
  const auto match = match_prompt(prompt);
  if (!match) throw OracleMissError("unrecognized prompt");
  const Bindings& b = match->bindings;

  switch (match->id) {
    case TemplateId::router: {
      const auto& q = b.at("your_query");
      if (auto it = routes_.find(key(q)); it != routes_.end()) return it->second;
      return miss(OracleKind::route, key(q), q);
    }
    case TemplateId::decomposer: {
      const auto& q = b.at("your_query");
      if (auto it = decompositions_.find(key(q)); it != decompositions_.end()) return it->second;
      return miss(OracleKind::decompose, key(q), q);
    }
    case TemplateId::refiner: {
      const auto& q = b.at("your_query");
      const std::size_t step = parse_thought(b.at("your_thought")).size() + 1;
      if (auto it = refinements_.find({key(q), step}); it != refinements_.end()) return it->second;
      return miss(OracleKind::refine, key(q) + "#" + std::to_string(step), q);
    }
    case TemplateId::relevance: {
      const auto& q = b.at("your_query");
      const std::string passage = resolve_passage(b.at("your_doc"));
      if (auto it = relevance_.find({key(q), passage}); it != relevance_.end()) {
        return it->second ? "true" : "false";
      }
      return miss(OracleKind::relevance, key(q) + "@" + passage, q);
    }
    case TemplateId::generator:
      return answer_fact(b);
    case TemplateId::ending: {
      const auto& q = b.at("your_query");
      const std::size_t steps = parse_thought(b.at("your_thought")).size();
      if (auto it = endings_.find({key(q), steps}); it != endings_.end()) return it->second ? "yes" : "no";
      return miss(OracleKind::ending, key(q) + "#" + std::to_string(steps), q);
    }
    case TemplateId::single_qa_gen: {
      const std::string passage = resolve_passage(b.at("your_doc"));
      if (auto it = qa_.find(passage); it != qa_.end()) return it->second;
      return miss(OracleKind::qa, passage, b.at("your_title"));
    }
    case TemplateId::compound_compose:
      return answer_compose(b);
  }
  throw OracleMissError("unrecognized prompt");
}

}  // namespace hanrag
