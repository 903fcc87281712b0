#include "hanrag/benchgen.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <random>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "hanrag/prompts.hpp"
#include "hanrag/revelator.hpp"
#include "hanrag/text.hpp"

namespace hanrag {

using nlohmann::json;

namespace {

// Unbiased index in [0, n) from the raw engine output; mt19937_64's
// sequence is fixed by the standard, so results match across toolchains.
std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  const std::uint64_t range = n;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % range;
  std::uint64_t draw = 0;
  do {
    draw = rng();
  } while (draw >= limit);
  return static_cast<std::size_t>(draw % range);
}

template <typename T>
void shuffle(std::vector<T>& items, std::mt19937_64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::swap(items[i - 1], items[uniform_index(rng, i)]);
  }
}

std::string_view strip_fences(std::string_view text) {
  text = trim(text);
  while (text.starts_with("```")) text.remove_prefix(3);
  while (text.ends_with("```")) text.remove_suffix(3);
  if (text.starts_with("json")) text.remove_prefix(4);
  return trim(text);
}

std::string first_line(std::string_view text) {
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const auto line = trim(text.substr(pos, eol - pos));
    if (!line.empty()) return std::string(line);
    pos = eol + 1;
  }
  return {};
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += sep;
    out += parts[i];
  }
  return out;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<json>& records) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& r : records) out << r.dump() << '\n';
}

}  // namespace

std::vector<EntitySample> sample_entities(const Corpus& corpus, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw Error("sample_entities: n must be >= 1");
  std::vector<EntitySample> pool;
  std::unordered_map<std::string, std::size_t> slot;
  for (const auto& p : corpus) {
    if (!p.entity || p.entity->empty()) continue;
    auto [it, inserted] = slot.try_emplace(*p.entity, pool.size());
    if (inserted) pool.push_back({*p.entity, {}});
    auto& passages = pool[it->second].passages;
    if (passages.size() < k_max_passages_per_entity) passages.push_back(&p);
  }
  if (pool.size() < n) {
    throw Error("sample_entities: requested " + std::to_string(n) + " entities but only " +
                std::to_string(pool.size()) + " available");
  }
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    std::swap(pool[i], pool[i + uniform_index(rng, pool.size() - i)]);
  }
  pool.resize(n);
  return pool;
}

EntityQA gen_single_qa(std::string_view entity, const Passage& passage, Backend& backend,
                       const GenParams& params) {
  const std::string output = backend.complete(
      render_prompt(TemplateId::single_qa_gen, {{"your_title", std::string(entity)}, {"your_doc", passage.text}}),
      params);
  json doc;
  try {
    doc = json::parse(strip_fences(output));
  } catch (const json::parse_error&) {
    throw GenerationReject("single QA output is not JSON");
  }
  if (!doc.is_object() || !doc.contains("Question") || !doc.contains("Answer") || !doc["Question"].is_string() ||
      !doc["Answer"].is_string()) {
    throw GenerationReject("single QA output lacks string Question/Answer");
  }
  EntityQA qa{std::string(entity), passage.id, std::string(trim(doc["Question"].get<std::string>())),
              std::string(trim(doc["Answer"].get<std::string>()))};
  if (qa.question.empty() || qa.answer.empty()) throw GenerationReject("empty question or answer");
  const std::string answer_norm = normalize_answer(qa.answer);
  if (answer_norm.empty() || normalize_answer(passage.text).find(answer_norm) == std::string::npos) {
    throw GenerationReject("answer \"" + qa.answer + "\" does not occur in passage " + passage.id);
  }
  if (normalized_tokens(qa.answer).size() > k_max_answer_tokens) {
    throw GenerationReject("answer \"" + qa.answer + "\" is longer than " + std::to_string(k_max_answer_tokens) +
                           " tokens");
  }
  return qa;
}

ComposeOutcome compose_compound(std::span<const EntityQA> questions, Backend& backend, const GenParams& params) {
  if (questions.size() < 2 || questions.size() > 4) {
    throw Error("compose_compound: expected 2-4 questions, got " + std::to_string(questions.size()));
  }
  for (const auto& q : questions) {
    if (q.entity != questions.front().entity) throw Error("compose_compound: questions span several entities");
  }
  std::vector<std::string> simple;
  for (const auto& q : questions) simple.push_back(q.question);
  const std::string output =
      backend.complete(render_prompt(TemplateId::compound_compose,
                                     {{"simple_questions", render_simple_questions(simple)}}),
                       params);
  const std::string line = first_line(strip_fences(output));
  if (line.empty()) throw Error("compose_compound: model returned an empty question");
  std::string label = normalize_answer(line);
  if (label == "no") return Rejection{"composer declined to combine"};

  CompoundExample ex;
  ex.entity = questions.front().entity;
  ex.compound_question = line;
  for (const auto& q : questions) {
    ex.sub_questions.push_back(q.question);
    ex.sub_answers.push_back(q.answer);
    ex.passage_ids.push_back(q.passage_id);
  }
  ex.answer = join(ex.sub_answers, " && ");
  ex.hop_count = static_cast<int>(questions.size());
  return ex;
}

Benchmark build_benchmark(const Corpus& corpus, SplitCounts counts, std::uint64_t seed, Backend& backend,
                          const GenParams& params) {
  std::set<std::string> entity_names;
  for (const auto& p : corpus) {
    if (p.entity && !p.entity->empty()) entity_names.insert(*p.entity);
  }
  Benchmark bench;
  const std::size_t wanted = counts.train + counts.dev + counts.test;
  if (wanted == 0) return bench;
  if (entity_names.empty()) throw Error("build_benchmark: corpus has no entity-tagged passages");

  const auto entities = sample_entities(corpus, entity_names.size(), seed);
  std::mt19937_64 rng(seed ^ 0x9E3779B97F4A7C15ULL);
  std::unordered_set<std::string> seen_questions;

  // Test is filled first so the smallest split never runs short.
  struct Target {
    std::vector<CompoundExample>* split;
    std::size_t need;
  };
  std::array<Target, 3> targets{{{&bench.test, counts.test}, {&bench.dev, counts.dev}, {&bench.train, counts.train}}};
  auto remaining = [&] {
    std::size_t n = 0;
    for (const auto& t : targets) n += t.need - t.split->size();
    return n;
  };

  for (const auto& sample : entities) {
    if (remaining() == 0) break;
    auto target = std::find_if(targets.begin(), targets.end(),
                               [](const Target& t) { return t.split->size() < t.need; });

    std::vector<EntityQA> qas;
    std::unordered_set<std::string> qa_questions;
    for (const Passage* p : sample.passages) {
      try {
        EntityQA qa = gen_single_qa(sample.entity, *p, backend, params);
        if (qa_questions.insert(normalize_answer(qa.question)).second) qas.push_back(std::move(qa));
        ++bench.stats.qa_accepted;
      } catch (const GenerationReject&) {
        ++bench.stats.qa_rejected;
      }
    }
    shuffle(qas, rng);

    std::size_t taken_here = 0;
    std::size_t cursor = 0;
    while (qas.size() - cursor >= 2 && target->split->size() < target->need) {
      const std::size_t max_hops = std::min<std::size_t>(4, qas.size() - cursor);
      const std::size_t hops = 2 + uniform_index(rng, max_hops - 1);
      const std::span<const EntityQA> group(qas.data() + cursor, hops);
      cursor += hops;
      auto outcome = compose_compound(group, backend, params);
      if (auto* rejection = std::get_if<Rejection>(&outcome)) {
        (void)rejection;
        ++bench.stats.compose_rejected;
        continue;
      }
      auto& ex = std::get<CompoundExample>(outcome);
      ++bench.stats.compose_accepted;
      if (!seen_questions.insert(normalize_answer(ex.compound_question)).second) {
        ++bench.stats.duplicates_dropped;
        continue;
      }
      target->split->push_back(std::move(ex));
      ++taken_here;
    }
    if (taken_here > 0) ++bench.stats.entities_used;
  }

  if (const std::size_t short_by = remaining(); short_by > 0) {
    throw Error("build_benchmark: entity pool exhausted, short by " + std::to_string(short_by) + " examples (train " +
                std::to_string(bench.train.size()) + "/" + std::to_string(counts.train) + ", dev " +
                std::to_string(bench.dev.size()) + "/" + std::to_string(counts.dev) + ", test " +
                std::to_string(bench.test.size()) + "/" + std::to_string(counts.test) + ")");
  }
  return bench;
}

json to_eval_record(const CompoundExample& example, std::string id) {
  return {{"id", std::move(id)},
          {"question", example.compound_question},
          {"answers", json::array({example.answer})},
          {"hop_count", example.hop_count},
          {"gold_class", "compound"},
          {"entity", example.entity},
          {"sub_questions", example.sub_questions},
          {"sub_answers", example.sub_answers},
          {"passage_ids", example.passage_ids}};
}

CompoundExample compound_from_record(const json& record) {
  CompoundExample ex;
  ex.compound_question = record.at("question").get<std::string>();
  const auto& answers = record.at("answers");
  ex.answer = answers.is_string() ? answers.get<std::string>() : answers.at(0).get<std::string>();
  ex.entity = record.value("entity", "");
  ex.sub_questions = record.at("sub_questions").get<std::vector<std::string>>();
  ex.sub_answers = record.value("sub_answers", std::vector<std::string>{});
  ex.passage_ids = record.value("passage_ids", std::vector<std::string>{});
  ex.hop_count = record.value("hop_count", static_cast<int>(ex.sub_questions.size()));
  return ex;
}

void write_benchmark(const Benchmark& benchmark, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  auto emit = [&](const std::vector<CompoundExample>& split, const std::string& name) {
    std::vector<json> records;
    for (std::size_t i = 0; i < split.size(); ++i) records.push_back(to_eval_record(split[i], name + "-" + std::to_string(i)));
    write_jsonl(out_dir / (name + ".jsonl"), records);
  };
  emit(benchmark.train, "train");
  emit(benchmark.dev, "dev");
  emit(benchmark.test, "test");
}

// ---------------------------------------------------------------------------
// Training sets

std::string_view to_string(TrainingTask task) noexcept {
  switch (task) {
    case TrainingTask::routing: return "routing";
    case TrainingTask::decomposition: return "decomposition";
    case TrainingTask::refinement: return "refinement";
    case TrainingTask::relevance: return "relevance";
    case TrainingTask::ending: return "ending";
  }
  return "unknown";
}

TrainingTask parse_training_task(std::string_view name) {
  for (auto t : {TrainingTask::routing, TrainingTask::decomposition, TrainingTask::refinement,
                 TrainingTask::relevance, TrainingTask::ending}) {
    if (to_string(t) == name) return t;
  }
  throw Error("unknown training task \"" + std::string(name) + "\"");
}

TrainingSources load_training_sources(std::istream& in) {
  TrainingSources sources;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const json r = json::parse(line);
      const auto source = r.at("source").get<std::string>();
      if (source == "straightforward") {
        sources.straightforward.push_back(r.at("question").get<std::string>());
      } else if (source == "single") {
        sources.single.push_back({r.at("question").get<std::string>(),
                                  r.value("gold_passages", std::vector<std::string>{})});
      } else if (source == "complex") {
        ReasoningChain chain{r.at("question").get<std::string>(), {}};
        for (const auto& h : r.value("hops", json::array())) {
          chain.hops.push_back({h.at("question").get<std::string>(), h.at("answer").get<std::string>(),
                                h.value("gold_passages", std::vector<std::string>{})});
        }
        sources.complex.push_back(std::move(chain));
      } else if (source == "compound") {
        sources.compound.push_back(compound_from_record(r));
      } else {
        throw ParseError(line_no, "unknown source \"" + source + "\"");
      }
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(line_no, std::string("malformed training source: ") + e.what());
    }
  }
  return sources;
}

namespace {

json thought_json(std::span<const Hop> hops) {
  json out = json::array();
  for (const auto& h : hops) out.push_back({{"seed", h.question}, {"answer", h.answer}});
  return out;
}

}  // namespace

TrainingSets build_training_sets(const TrainingSources& sources, const Corpus* corpus, Backend* backend,
                                 std::uint64_t seed, const TrainingOptions& options) {
  TrainingSets sets;
  std::mt19937_64 rng(seed);

  // Routing: label by provenance bucket.
  {
    auto& out = sets.records[TrainingTask::routing];
    for (const auto& q : sources.straightforward) out.push_back({{"task", "routing"}, {"query", q}, {"cls", "straightforward"}});
    for (const auto& s : sources.single) out.push_back({{"task", "routing"}, {"query", s.question}, {"cls", "single"}});
    for (const auto& c : sources.compound) {
      out.push_back({{"task", "routing"}, {"query", c.compound_question}, {"cls", "compound"}});
    }
    for (const auto& c : sources.complex) out.push_back({{"task", "routing"}, {"query", c.question}, {"cls", "complex"}});
    if (out.empty()) sets.errors[TrainingTask::routing] = "no queries in any source bucket";
  }

  // Decomposition: compound question with its stored sub-questions.
  {
    auto& out = sets.records[TrainingTask::decomposition];
    for (const auto& c : sources.compound) {
      out.push_back({{"task", "decomposition"}, {"query", c.compound_question}, {"sub_queries", c.sub_questions}});
    }
    if (out.empty()) sets.errors[TrainingTask::decomposition] = "no compound sources";
  }

  // Refinement and ending both come from per-hop reasoning chains.
  const bool chains_ok =
      !sources.complex.empty() &&
      std::all_of(sources.complex.begin(), sources.complex.end(), [](const ReasoningChain& c) { return !c.hops.empty(); });
  if (!chains_ok) {
    const std::string why = sources.complex.empty() ? "no reasoning chains" : "a reasoning chain has no hops";
    sets.errors[TrainingTask::refinement] = why;
    sets.errors[TrainingTask::ending] = why;
    sets.records[TrainingTask::refinement];
    sets.records[TrainingTask::ending];
  } else {
    auto& refine = sets.records[TrainingTask::refinement];
    auto& ending = sets.records[TrainingTask::ending];
    for (const auto& c : sources.complex) {
      const std::span<const Hop> hops(c.hops);
      for (std::size_t i = 0; i < hops.size(); ++i) {
        refine.push_back({{"task", "refinement"},
                          {"query", c.question},
                          {"thought", thought_json(hops.first(i))},
                          {"seed", hops[i].question}});
      }
      for (std::size_t i = 1; i <= hops.size(); ++i) {
        ending.push_back({{"task", "ending"},
                          {"query", c.question},
                          {"thought", thought_json(hops.first(i))},
                          {"is_ending", i == hops.size()}});
      }
    }
    // Single-step questions pass through the refiner unchanged.
    for (const auto& s : sources.single) {
      refine.push_back({{"task", "refinement"}, {"query", s.question}, {"thought", json::array()}, {"seed", s.question}});
    }
  }

  // Relevance: gold passages are positives, sampled non-gold passages negatives.
  {
    auto& out = sets.records[TrainingTask::relevance];
    if (corpus == nullptr || corpus->empty()) {
      sets.errors[TrainingTask::relevance] = "relevance pairs need a corpus";
    } else if (options.label_relevance_with_backend && backend == nullptr) {
      sets.errors[TrainingTask::relevance] = "backend labelling requested without a backend";
    } else {
      std::vector<std::pair<std::string, std::vector<std::string>>> queries;
      for (const auto& s : sources.single) queries.emplace_back(s.question, s.gold_passages);
      for (const auto& c : sources.complex) {
        for (const auto& h : c.hops) queries.emplace_back(h.question, h.gold_passages);
      }
      std::optional<Revelator> judge;
      if (options.label_relevance_with_backend) judge.emplace(*backend, options.params);

      auto emit = [&](const std::string& query, const Passage& p, bool gold) {
        const bool label = judge ? judge->judge_relevance(query, p).is_rel : gold;
        out.push_back({{"task", "relevance"},
                       {"query", query},
                       {"passage_id", p.id},
                       {"doc", render_passage(p)},
                       {"is_rel", label}});
      };
      for (const auto& [query, gold] : queries) {
        const std::unordered_set<std::string> gold_set(gold.begin(), gold.end());
        std::vector<const Passage*> negatives_pool;
        for (const auto& p : *corpus) {
          if (!gold_set.contains(p.id)) negatives_pool.push_back(&p);
        }
        for (const auto& id : gold) {
          const Passage* positive = corpus->find(id);
          if (positive == nullptr) continue;
          emit(query, *positive, true);
          for (std::size_t k = 0; k < options.negatives_per_positive && !negatives_pool.empty(); ++k) {
            const std::size_t pick = uniform_index(rng, negatives_pool.size());
            emit(query, *negatives_pool[pick], false);
            negatives_pool.erase(negatives_pool.begin() + static_cast<std::ptrdiff_t>(pick));
          }
        }
      }
      if (out.empty()) sets.errors[TrainingTask::relevance] = "no query has a gold passage in the corpus";
    }
  }

  for (const auto& [task, records] : sets.records) {
    for (const auto& r : records) validate_training_record(r);
  }
  return sets;
}

namespace {

void require_string(const json& r, const char* field) {
  if (!r.contains(field) || !r[field].is_string() || r[field].get<std::string>().empty()) {
    throw Error(std::string("training record: \"") + field + "\" must be a non-empty string");
  }
}

void require_thought(const json& r) {
  if (!r.contains("thought") || !r["thought"].is_array()) throw Error("training record: \"thought\" must be a list");
  for (const auto& step : r["thought"]) {
    require_string(step, "seed");
    if (!step.contains("answer") || !step["answer"].is_string()) {
      throw Error("training record: thought step needs an answer string");
    }
  }
}

void require_bool(const json& r, const char* field) {
  if (!r.contains(field) || !r[field].is_boolean()) {
    throw Error(std::string("training record: \"") + field + "\" must be a boolean");
  }
}

}  // namespace

void validate_training_record(const json& record) {
  if (!record.is_object()) throw Error("training record is not an object");
  require_string(record, "task");
  require_string(record, "query");
  switch (parse_training_task(record["task"].get<std::string>())) {
    case TrainingTask::routing:
      require_string(record, "cls");
      parse_query_class(record["cls"].get<std::string>());
      break;
    case TrainingTask::decomposition:
      if (!record.contains("sub_queries") || !record["sub_queries"].is_array() || record["sub_queries"].empty()) {
        throw Error("training record: \"sub_queries\" must be a non-empty list");
      }
      for (const auto& q : record["sub_queries"]) {
        if (!q.is_string() || q.get<std::string>().empty()) throw Error("training record: empty sub-query");
      }
      break;
    case TrainingTask::refinement:
      require_thought(record);
      require_string(record, "seed");
      break;
    case TrainingTask::relevance:
      require_string(record, "passage_id");
      require_string(record, "doc");
      require_bool(record, "is_rel");
      break;
    case TrainingTask::ending:
      require_thought(record);
      if (record["thought"].empty()) throw Error("training record: ending needs at least one step");
      require_bool(record, "is_ending");
      break;
  }
}

void write_training_sets(const TrainingSets& sets, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  for (const auto& [task, records] : sets.records) {
    if (records.empty()) continue;
    write_jsonl(out_dir / (std::string(to_string(task)) + ".jsonl"), records);
  }
}

}  // namespace hanrag
