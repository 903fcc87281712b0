#include "hanrag/corpus.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "hanrag/errors.hpp"
#include "hanrag/text.hpp"

namespace hanrag {

using nlohmann::json;

namespace {

Passage passage_from_json(const std::string& line, std::size_t line_no) {
  json record;
  try {
    record = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(line_no, std::string("invalid JSON: ") + e.what());
  }
  if (!record.is_object()) throw ParseError(line_no, "record is not a JSON object");

  auto required_string = [&](const char* key) -> std::string {
    auto it = record.find(key);
    if (it == record.end()) throw ParseError(line_no, std::string("missing field \"") + key + "\"");
    if (!it->is_string()) throw ParseError(line_no, std::string("field \"") + key + "\" is not a string");
    return it->get<std::string>();
  };

  Passage p;
  p.id = required_string("id");
  p.text = required_string("text");
  if (auto it = record.find("title"); it != record.end() && !it->is_null()) {
    if (!it->is_string()) throw ParseError(line_no, "field \"title\" is not a string");
    p.title = it->get<std::string>();
  }
  if (auto it = record.find("entity"); it != record.end() && !it->is_null()) {
    if (!it->is_string()) throw ParseError(line_no, "field \"entity\" is not a string");
    p.entity = it->get<std::string>();
  }
  return p;
}

Passage passage_from_tsv(const std::string& line, std::size_t line_no) {
  const auto first = line.find('\t');
  const auto second = first == std::string::npos ? std::string::npos : line.find('\t', first + 1);
  if (second == std::string::npos || line.find('\t', second + 1) != std::string::npos) {
    throw ParseError(line_no, "expected 3 tab-separated fields: id, title, text");
  }
  Passage p;
  p.id = line.substr(0, first);
  p.title = line.substr(first + 1, second - first - 1);
  p.text = line.substr(second + 1);
  return p;
}

}  // namespace

std::string render_passage(const Passage& passage) {
  if (passage.title.empty()) return passage.text;
  return passage.title + ": " + passage.text;
}

CorpusFormat parse_corpus_format(std::string_view name) {
  if (name == "jsonl") return CorpusFormat::jsonl;
  if (name == "tsv") return CorpusFormat::tsv;
  throw Error("unknown corpus format \"" + std::string(name) + "\" (expected jsonl or tsv)");
}

Corpus Corpus::ingest(std::istream& in, CorpusFormat format) {
  Corpus corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    Passage p = format == CorpusFormat::jsonl ? passage_from_json(line, line_no)
                                              : passage_from_tsv(line, line_no);
    if (trim(p.id).empty()) throw ParseError(line_no, "passage id is empty");
    corpus.add(std::move(p), line_no);
  }
  return corpus;
}

Corpus Corpus::load(const std::filesystem::path& path, std::optional<CorpusFormat> format) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus file: " + path.string());
  if (!format) format = path.extension() == ".tsv" ? CorpusFormat::tsv : CorpusFormat::jsonl;
  return ingest(in, *format);
}

Corpus Corpus::from_passages(std::vector<Passage> passages) {
  Corpus corpus;
  std::size_t line = 0;
  for (auto& p : passages) corpus.add(std::move(p), ++line);
  return corpus;
}

void Corpus::add(Passage passage, std::size_t line) {
  if (trim(passage.text).empty()) throw EmptyTextError(line);
  if (by_id_.contains(passage.id)) throw DuplicateIdError(passage.id, line);
  by_id_.emplace(passage.id, passages_.size());
  passages_.push_back(std::move(passage));
}

void Corpus::save_snapshot(std::ostream& out) const {
  for (const auto& p : passages_) {
    json record = {{"id", p.id}, {"title", p.title}, {"text", p.text}};
    if (p.entity) record["entity"] = *p.entity;
    out << record.dump() << '\n';
  }
}

void Corpus::save_snapshot(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write corpus snapshot: " + path.string());
  save_snapshot(out);
}

const Passage& Corpus::get(std::string_view id) const {
  if (const Passage* p = find(id)) return *p;
  throw NotFoundError(std::string(id));
}

const Passage* Corpus::find(std::string_view id) const noexcept {
  auto pos = position(id);
  return pos ? &passages_[*pos] : nullptr;
}

std::optional<std::size_t> Corpus::position(std::string_view id) const noexcept {
  auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

const Passage& get_passage(const Corpus& corpus, std::string_view id) { return corpus.get(id); }

}  // namespace hanrag
