#include "hanrag/evalkit.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <thread>

namespace hanrag {

using nlohmann::json;

int exact_match(std::string_view prediction, std::span<const std::string> answers) {
  const std::string pred = normalize_answer(prediction);
  return std::any_of(answers.begin(), answers.end(),
                     [&](const std::string& a) { return normalize_answer(a) == pred; })
             ? 1
             : 0;
}

namespace {

double f1_single(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
  if (pred.empty() && gold.empty()) return 1.0;
  if (pred.empty() || gold.empty()) return 0.0;
  std::map<std::string_view, int> counts;
  for (const auto& t : gold) ++counts[t];
  int common = 0;
  for (const auto& t : pred) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  if (common == 0) return 0.0;
  const double precision = static_cast<double>(common) / static_cast<double>(pred.size());
  const double recall = static_cast<double>(common) / static_cast<double>(gold.size());
  return 2.0 * precision * recall / (precision + recall);
}

}  // namespace

double f1_score(std::string_view prediction, std::span<const std::string> answers) {
  const auto pred = normalized_tokens(prediction);
  double best = 0.0;
  for (const auto& a : answers) best = std::max(best, f1_single(pred, normalized_tokens(a)));
  return best;
}

int acc_contains(std::string_view prediction, std::span<const std::string> answers) {
  const std::string pred = normalize_answer(prediction);
  return std::any_of(answers.begin(), answers.end(),
                     [&](const std::string& a) { return pred.find(normalize_answer(a)) != std::string::npos; })
             ? 1
             : 0;
}

std::vector<std::string> split_compound_answer(std::string_view gold) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const auto sep = gold.find("&&", pos);
    const auto piece = trim(gold.substr(pos, sep == std::string_view::npos ? std::string_view::npos : sep - pos));
    if (piece.empty()) throw Error("compound answer has an empty entity: \"" + std::string(gold) + "\"");
    out.emplace_back(piece);
    if (sep == std::string_view::npos) break;
    pos = sep + 2;
  }
  return out;
}

double compound_accuracy(std::string_view prediction, std::span<const std::string> gold_entities) {
  if (gold_entities.empty()) throw Error("compound_accuracy: no gold entities");
  const std::string pred = normalize_answer(prediction);
  std::size_t hits = 0;
  for (const auto& e : gold_entities) {
    if (pred.find(normalize_answer(e)) != std::string::npos) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(gold_entities.size());
}

bool is_compound(const EvalExample& example) {
  if (example.gold_class) return *example.gold_class == QueryClass::compound;
  return std::any_of(example.answers.begin(), example.answers.end(),
                     [](const std::string& a) { return a.find("&&") != std::string::npos; });
}

std::vector<EvalExample> load_dataset(std::istream& in) {
  std::vector<EvalExample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const json r = json::parse(line);
      if (!r.is_object()) throw ParseError(line_no, "record is not a JSON object");
      EvalExample ex;
      if (r.contains("id")) {
        ex.id = r.at("id").is_string() ? r.at("id").get<std::string>() : r.at("id").dump();
      } else if (r.contains("_id")) {
        ex.id = r.at("_id").get<std::string>();
      } else {
        throw ParseError(line_no, "missing field \"id\"");
      }
      if (!r.contains("question")) throw ParseError(line_no, "missing field \"question\"");
      ex.question = r.at("question").get<std::string>();

      auto add_answer = [&](std::string a) {
        if (std::find(ex.answers.begin(), ex.answers.end(), a) == ex.answers.end()) {
          ex.answers.push_back(std::move(a));
        }
      };
      if (auto it = r.find("answers"); it != r.end()) {
        if (it->is_string()) {
          add_answer(it->get<std::string>());
        } else {
          for (const auto& a : *it) add_answer(a.get<std::string>());
        }
      }
      if (auto it = r.find("answer"); it != r.end()) add_answer(it->get<std::string>());
      if (auto it = r.find("answer_aliases"); it != r.end()) {
        for (const auto& a : *it) add_answer(a.get<std::string>());
      }
      if (ex.answers.empty()) throw ParseError(line_no, "record has no answers");

      if (auto it = r.find("hop_count"); it != r.end() && !it->is_null()) ex.hop_count = it->get<int>();
      if (auto it = r.find("gold_class"); it != r.end() && !it->is_null()) {
        ex.gold_class = parse_query_class(it->get<std::string>());
      }
      out.push_back(std::move(ex));
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(line_no, std::string("malformed dataset record: ") + e.what());
    }
  }
  return out;
}

std::vector<EvalExample> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset: " + path.string());
  return load_dataset(in);
}

json to_json(const EvalExample& example) {
  json j = {{"id", example.id}, {"question", example.question}, {"answers", example.answers}};
  if (example.hop_count) j["hop_count"] = *example.hop_count;
  if (example.gold_class) j["gold_class"] = to_string(*example.gold_class);
  return j;
}

QueryMetrics score_prediction(const EvalExample& example, const PipelineResult& result) {
  QueryMetrics m;
  m.id = example.id;
  m.prediction = result.answer;
  m.query_class = result.query_class;
  m.steps = result.steps;
  m.warnings = result.warnings;
  m.compound = is_compound(example);
  m.em = exact_match(result.answer, example.answers);
  m.f1 = f1_score(result.answer, example.answers);
  if (m.compound) {
    double best = 0.0;
    for (const auto& a : example.answers) {
      best = std::max(best, compound_accuracy(result.answer, split_compound_answer(a)));
    }
    m.acc = best;
  } else {
    m.acc = acc_contains(result.answer, example.answers);
  }
  return m;
}

MetricsReport aggregate(std::vector<QueryMetrics> rows) {
  if (rows.empty()) throw Error("no examples");
  MetricsReport report;
  report.count = rows.size();
  double em = 0, f1 = 0, acc = 0, steps = 0;
  for (const auto& r : rows) {
    em += r.em;
    f1 += r.f1;
    acc += r.acc;
    steps += static_cast<double>(r.steps);
    if (r.error) ++report.errors;
  }
  const double n = static_cast<double>(rows.size());
  report.em = 100.0 * em / n;
  report.f1 = f1 / n;
  report.acc = 100.0 * acc / n;
  report.steps = steps / n;
  report.per_query = std::move(rows);
  return report;
}

json MetricsReport::to_json() const {
  json rows = json::array();
  for (const auto& r : per_query) {
    json row = {{"id", r.id},         {"prediction", r.prediction}, {"class", to_string(r.query_class)},
                {"em", r.em},         {"f1", r.f1},                 {"acc", r.acc},
                {"steps", r.steps},   {"compound", r.compound},     {"warnings", r.warnings}};
    if (r.error) row["error"] = *r.error;
    rows.push_back(std::move(row));
  }
  return {{"count", count}, {"em", em},         {"f1", f1},       {"acc", acc},
          {"steps", steps}, {"errors", errors}, {"per_query", std::move(rows)}};
}

std::string MetricsReport::table(std::string_view label) const {
  // Method column grows with the label (ablation suffixes).
  const int width = static_cast<int>(std::max<std::size_t>(12, label.size()));
  const std::string name(label);
  char buf[128];
  std::string out = "Method" + std::string(static_cast<std::size_t>(width) - 6, ' ');
  std::snprintf(buf, sizeof buf, " %6s %8s %8s %8s %6s\n", "Count", "EM", "F1", "Acc", "Steps");
  out += buf;
  out += name + std::string(static_cast<std::size_t>(width) - name.size(), ' ');
  std::snprintf(buf, sizeof buf, " %6zu %8.2f %8.4f %8.2f %6.2f\n", count, em, f1, acc, steps);
  out += buf;
  return out;
}

MetricsReport evaluate(std::span<const EvalExample> examples, const Pipeline& pipeline, EvalOptions options) {
  if (examples.empty()) throw Error("no examples");
  std::vector<QueryMetrics> rows(examples.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < examples.size(); i = next++) {
      const auto& ex = examples[i];
      try {
        rows[i] = score_prediction(ex, pipeline.answer(ex.question));
      } catch (const PipelineError& e) {
        QueryMetrics m;
        m.id = ex.id;
        m.query_class = e.partial().query_class;
        m.steps = e.partial().steps;
        m.compound = is_compound(ex);
        m.warnings = e.partial().warnings;
        m.warnings.push_back(std::string(warning::error) + ":" + e.what());
        m.error = e.what();
        rows[i] = std::move(m);
      } catch (const std::exception& e) {
        QueryMetrics m;
        m.id = ex.id;
        m.compound = is_compound(ex);
        m.error = e.what();
        rows[i] = std::move(m);
      }
    }
  };

  const std::size_t threads = std::clamp<std::size_t>(options.concurrency, 1, examples.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return aggregate(std::move(rows));
}

}  // namespace hanrag
