#include "hanrag/pipeline.hpp"

#include <algorithm>
#include <future>

namespace hanrag {

using nlohmann::json;

void PipelineConfig::validate() const {
  retrieval.validate();
  if (max_steps < 1) throw Error("pipeline: max_steps must be >= 1");
}

bool PipelineResult::has_warning(std::string_view tag) const {
  return std::any_of(warnings.begin(), warnings.end(),
                     [&](const std::string& w) { return w == tag || w.starts_with(std::string(tag) + ":"); });
}

namespace {

json step_to_json(const StepRecord& s) {
  return {{"index", s.seed.index},       {"seed", s.seed.text},
          {"answer", s.answer},          {"passages_used", s.passages_used},
          {"candidates", s.candidates},  {"filtered_out", s.filtered_out}};
}

StepRecord step_from_json(const json& j) {
  StepRecord s;
  s.seed = {j.at("seed").get<std::string>(), j.at("index").get<std::size_t>()};
  s.answer = j.at("answer").get<std::string>();
  s.passages_used = j.at("passages_used").get<std::vector<std::string>>();
  s.candidates = j.value("candidates", std::vector<std::string>{});
  s.filtered_out = j.value("filtered_out", std::vector<std::string>{});
  return s;
}

std::string tagged(std::string_view tag, std::string_view detail) {
  return std::string(tag) + ":" + std::string(detail);
}

}  // namespace

json to_json(const PipelineResult& result) {
  json trace = json::array();
  for (const auto& s : result.trace.steps) trace.push_back(step_to_json(s));
  json subs = json::array();
  for (const auto& s : result.sub_results) subs.push_back(step_to_json(s));
  return {{"query", result.query},   {"class", to_string(result.query_class)},
          {"steps", result.steps},   {"answer", result.answer},
          {"trace", std::move(trace)}, {"sub_results", std::move(subs)},
          {"warnings", result.warnings}};
}

PipelineResult pipeline_result_from_json(const json& doc) {
  PipelineResult r;
  r.query = doc.at("query").get<std::string>();
  r.query_class = parse_query_class(doc.at("class").get<std::string>());
  r.steps = doc.at("steps").get<std::size_t>();
  r.answer = doc.at("answer").get<std::string>();
  for (const auto& s : doc.at("trace")) r.trace.steps.push_back(step_from_json(s));
  for (const auto& s : doc.at("sub_results")) r.sub_results.push_back(step_from_json(s));
  r.warnings = doc.at("warnings").get<std::vector<std::string>>();
  return r;
}

std::string render_sub_answer(std::string_view question, std::string_view answer) {
  return "Question: " + std::string(question) + "\nAnswer: " + std::string(answer);
}

Pipeline::Pipeline(const Corpus& corpus, const Index& index, Backend& revelator_backend,
                   Backend& generator_backend, PipelineConfig config)
    : corpus_(corpus),
      index_(index),
      generator_backend_(generator_backend),
      revelator_(revelator_backend, config.generation),
      retriever_(corpus, index, bm25_params(config.retrieval)),
      config_(std::move(config)) {
  config_.validate();
}

Pipeline::Pipeline(const Corpus& corpus, const Index& index, Backend& backend, PipelineConfig config)
    : Pipeline(corpus, index, backend, backend, std::move(config)) {}

std::string Pipeline::generate(std::string_view question, std::span<const std::string> docs) const {
  const std::string prompt = render_prompt(
      TemplateId::generator, {{"your_query", std::string(question)}, {"your_doc_list", render_doc_list(docs)}});
  return std::string(trim(generator_backend_.complete(prompt, config_.generation)));
}

AnragResult Pipeline::anrag(std::string_view question) const {
  AnragResult out;
  const auto ranked = retriever_.retrieve(question, config_.retrieval.top_k_retrieve);
  for (const auto& r : ranked) out.candidates.push_back(r.passage.id);

  std::vector<const Passage*> context;
  if (config_.ablation.relevance_filter_enabled) {
    // One judgment per candidate, issued concurrently, read back in rank order.
    std::vector<std::future<RelevanceVerdict>> verdicts;
    verdicts.reserve(ranked.size());
    for (const auto& r : ranked) {
      verdicts.push_back(std::async(std::launch::async, [this, question, &r] {
        return revelator_.judge_relevance(question, r.passage);
      }));
    }
    std::exception_ptr failure;
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      bool relevant = false;
      try {
        relevant = verdicts[i].get().is_rel;
      } catch (const RelevanceParseError&) {
        out.warnings.push_back(tagged(warning::relevance_parse_failed, ranked[i].passage.id));
      } catch (...) {
        if (!failure) failure = std::current_exception();
      }
      if (relevant) {
        if (context.size() < config_.retrieval.top_k_context) context.push_back(&ranked[i].passage);
      } else {
        out.filtered_out.push_back(ranked[i].passage.id);
      }
    }
    if (failure) std::rethrow_exception(failure);
    if (!ranked.empty() && context.empty()) out.warnings.emplace_back(warning::all_filtered);
  } else {
    for (std::size_t i = 0; i < ranked.size() && i < config_.retrieval.top_k_context; ++i) {
      context.push_back(&ranked[i].passage);
    }
  }

  std::vector<std::string> docs;
  for (const Passage* p : context) {
    docs.push_back(render_passage(*p));
    out.passages_used.push_back(p->id);
  }
  out.answer = generate(question, docs);
  return out;
}

StepRecord Pipeline::run_step(const SubQuery& seed, std::vector<std::string>& warnings) const {
  AnragResult r = anrag(seed.text);
  warnings.insert(warnings.end(), r.warnings.begin(), r.warnings.end());
  return {seed, std::move(r.answer), std::move(r.passages_used), std::move(r.candidates),
          std::move(r.filtered_out)};
}

void Pipeline::run_straightforward(PipelineResult& out) const {
  out.answer = generate(out.query, {});
  out.steps = 0;
}

void Pipeline::run_single(PipelineResult& out) const {
  out.trace.append(run_step({out.query, 1}, out.warnings));
  out.steps = 1;
  out.answer = out.trace.steps.back().answer;
}

void Pipeline::run_compound(PipelineResult& out) const {
  std::vector<SubQuery> subs;
  try {
    subs = revelator_.decompose(out.query);
  } catch (const DecompositionParseError&) {
    out.warnings.emplace_back(warning::decomposition_parse_failed);
    subs = {{out.query, 1}};
  }

  if (config_.parallel_subqueries && subs.size() > 1) {
    std::vector<std::future<std::pair<StepRecord, std::vector<std::string>>>> tasks;
    for (const auto& sq : subs) {
      tasks.push_back(std::async(std::launch::async, [this, sq] {
        std::vector<std::string> w;
        StepRecord s = run_step(sq, w);
        return std::make_pair(std::move(s), std::move(w));
      }));
    }
    std::exception_ptr failure;
    for (auto& t : tasks) {
      try {
        auto [step, w] = t.get();
        out.warnings.insert(out.warnings.end(), w.begin(), w.end());
        out.sub_results.push_back(std::move(step));
      } catch (...) {
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);
    out.steps = 1;
  } else {
    for (const auto& sq : subs) {
      out.sub_results.push_back(run_step(sq, out.warnings));
      out.steps = out.sub_results.size();
    }
    // A lone sub-question is a single retrieval cycle either way.
    out.steps = subs.size() > 1 ? subs.size() : 1;
  }

  if (out.sub_results.size() == 1) {
    out.answer = out.sub_results.front().answer;
    return;
  }
  std::vector<std::string> docs;
  for (const auto& s : out.sub_results) docs.push_back(render_sub_answer(s.seed.text, s.answer));
  out.answer = generate(out.query, docs);
}

void Pipeline::run_complex(PipelineResult& out) const {
  auto finished = [&]() -> bool {
    if (!config_.ablation.ending_check_enabled) return false;
    try {
      return revelator_.judge_ending(out.query, out.trace).is_ending;
    } catch (const EndingParseError&) {
      out.warnings.push_back(tagged(warning::ending_parse_failed, "step" + std::to_string(out.trace.size())));
      return false;
    }
  };

  bool ended = finished();
  while (!ended && out.trace.size() < config_.max_steps) {
    SubQuery seed{out.query, out.trace.size() + 1};
    if (config_.ablation.refiner_enabled) {
      try {
        seed = revelator_.refine(out.query, out.trace);
      } catch (const RefinementError&) {
        out.warnings.push_back(tagged(warning::refinement_failed, "step" + std::to_string(seed.index)));
      }
    }
    out.trace.append(run_step(seed, out.warnings));
    out.steps = out.trace.size();
    ended = finished();
  }
  if (!ended) out.warnings.emplace_back(warning::max_steps_exhausted);

  std::vector<std::string> docs;
  for (const auto& s : out.trace.steps) docs.push_back(render_sub_answer(s.seed.text, s.answer));
  out.answer = generate(out.query, docs);
}

template <typename Branch>
PipelineResult Pipeline::guarded(std::string_view query, QueryClass cls, Branch&& branch) const {
  PipelineResult out;
  out.query = std::string(query);
  out.query_class = cls;
  try {
    branch(out);
  } catch (const PipelineError&) {
    throw;
  } catch (const std::exception& e) {
    throw PipelineError(e.what(), std::move(out));
  }
  return out;
}

PipelineResult Pipeline::answer_straightforward(std::string_view query) const {
  return guarded(query, QueryClass::straightforward, [&](PipelineResult& r) { run_straightforward(r); });
}

PipelineResult Pipeline::answer_single(std::string_view query) const {
  return guarded(query, QueryClass::single, [&](PipelineResult& r) { run_single(r); });
}

PipelineResult Pipeline::answer_compound(std::string_view query) const {
  return guarded(query, QueryClass::compound, [&](PipelineResult& r) { run_compound(r); });
}

PipelineResult Pipeline::answer_complex(std::string_view query) const {
  return guarded(query, QueryClass::complex, [&](PipelineResult& r) { run_complex(r); });
}

PipelineResult Pipeline::answer(std::string_view query) const {
  return guarded(query, QueryClass::complex, [&](PipelineResult& r) {
    if (config_.forced_class) {
      r.query_class = *config_.forced_class;
    } else {
      try {
        r.query_class = revelator_.route(query);
      } catch (const RoutingParseError&) {
        r.warnings.emplace_back(warning::routing_parse_failed);
        r.query_class = QueryClass::complex;
      }
    }
    switch (r.query_class) {
      case QueryClass::straightforward: run_straightforward(r); break;
      case QueryClass::single: run_single(r); break;
      case QueryClass::compound: run_compound(r); break;
      case QueryClass::complex: run_complex(r); break;
    }
  });
}

}  // namespace hanrag
