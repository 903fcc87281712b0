#include "hanrag/retriever.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

#include <json.hpp>

#include "hanrag/errors.hpp"

namespace hanrag {

using nlohmann::json;

void RetrievalConfig::validate() const {
  if (!(k1 > 0.0)) throw Error("retrieval: k1 must be > 0");
  if (!(b >= 0.0 && b <= 1.0)) throw Error("retrieval: b must lie in [0, 1]");
  if (top_k_retrieve == 0) throw Error("retrieval: top_k_retrieve must be >= 1");
  if (top_k_context > top_k_retrieve) {
    throw Error("retrieval: top_k_context must not exceed top_k_retrieve");
  }
}

Index Index::build(const Corpus& corpus) {
  Index index;
  index.doc_ids_.reserve(corpus.doc_count());
  index.doc_lengths_.reserve(corpus.doc_count());
  for (const Passage& p : corpus) {
    const auto doc = static_cast<std::uint32_t>(index.doc_ids_.size());
    const auto terms = tokenize(render_passage(p));
    std::map<std::string_view, std::uint32_t> counts;
    for (const auto& t : terms) ++counts[t];
    for (const auto& [term, tf] : counts) {
      index.postings_[std::string(term)].push_back({doc, tf});
    }
    index.doc_ids_.push_back(p.id);
    index.doc_lengths_.push_back(static_cast<std::uint32_t>(terms.size()));
  }
  index.finish();
  return index;
}

void Index::finish() {
  doc_by_id_.clear();
  for (std::size_t i = 0; i < doc_ids_.size(); ++i) {
    doc_by_id_.emplace(doc_ids_[i], static_cast<std::uint32_t>(i));
  }
  if (doc_ids_.empty()) {
    avg_doc_length_ = 0.0;
    return;
  }
  double total = 0.0;
  for (auto len : doc_lengths_) total += len;
  avg_doc_length_ = total / static_cast<double>(doc_ids_.size());
}

void Index::save(std::ostream& out) const {
  json docs = json::array();
  for (std::size_t i = 0; i < doc_ids_.size(); ++i) docs.push_back({doc_ids_[i], doc_lengths_[i]});
  out << json{{"format", "hanrag-bm25-index"}, {"version", 1}, {"doc_count", doc_ids_.size()},
              {"avg_doc_length", avg_doc_length_}, {"docs", std::move(docs)}}
             .dump()
      << '\n';
  std::vector<std::string_view> terms;
  terms.reserve(postings_.size());
  for (const auto& [term, _] : postings_) terms.push_back(term);
  std::sort(terms.begin(), terms.end());
  for (auto term : terms) {
    json list = json::array();
    for (const auto& p : postings_.at(std::string(term))) list.push_back({p.doc, p.tf});
    out << json{{"term", term}, {"postings", std::move(list)}}.dump() << '\n';
  }
}

void Index::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write index: " + path.string());
  save(out);
}

Index Index::load(std::istream& in) {
  Index index;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const json record = json::parse(line);
      if (!have_header) {
        if (record.value("format", "") != "hanrag-bm25-index") {
          throw ParseError(line_no, "not an index snapshot");
        }
        for (const auto& d : record.at("docs")) {
          index.doc_ids_.push_back(d.at(0).get<std::string>());
          index.doc_lengths_.push_back(d.at(1).get<std::uint32_t>());
        }
        if (record.at("doc_count").get<std::size_t>() != index.doc_ids_.size()) {
          throw ParseError(line_no, "doc_count does not match docs");
        }
        have_header = true;
        continue;
      }
      auto& list = index.postings_[record.at("term").get<std::string>()];
      for (const auto& p : record.at("postings")) {
        const Posting posting{p.at(0).get<std::uint32_t>(), p.at(1).get<std::uint32_t>()};
        if (posting.doc >= index.doc_ids_.size()) {
          throw ParseError(line_no, "posting references unknown document");
        }
        if (!list.empty() && list.back().doc >= posting.doc) {
          throw ParseError(line_no, "postings are not in ascending document order");
        }
        list.push_back(posting);
      }
    } catch (const json::exception& e) {
      throw ParseError(line_no, std::string("malformed index record: ") + e.what());
    }
  }
  if (!have_header) throw ParseError(line_no, "index snapshot has no header");
  index.finish();
  return index;
}

Index Index::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open index: " + path.string());
  return load(in);
}

std::size_t Index::doc_position(std::string_view passage_id) const {
  auto it = doc_by_id_.find(std::string(passage_id));
  if (it == doc_by_id_.end()) throw NotFoundError(std::string(passage_id));
  return it->second;
}

std::uint32_t Index::doc_length(std::string_view passage_id) const {
  return doc_lengths_[doc_position(passage_id)];
}

std::span<const Posting> Index::postings(std::string_view term) const {
  auto it = postings_.find(std::string(term));
  if (it == postings_.end()) return {};
  return it->second;
}

std::size_t Index::document_frequency(std::string_view term) const { return postings(term).size(); }

bool Index::matches(const Corpus& corpus) const {
  if (corpus.doc_count() != doc_ids_.size()) return false;
  for (std::size_t i = 0; i < doc_ids_.size(); ++i) {
    if (corpus[i].id != doc_ids_[i]) return false;
  }
  return true;
}

double bm25_idf(std::size_t doc_count, std::size_t df) {
  const double n = static_cast<double>(doc_count);
  const double d = static_cast<double>(df);
  return std::log((n - d + 0.5) / (d + 0.5) + 1.0);
}

namespace {

double term_weight(double idf, double tf, double doc_len, double avg_len, Bm25Params params) {
  const double norm = avg_len > 0.0 ? doc_len / avg_len : 0.0;
  return idf * tf * (params.k1 + 1.0) / (tf + params.k1 * (1.0 - params.b + params.b * norm));
}

// Sums in ascending order so a document's score depends only on the multiset
// of its term contributions, not on query-term order. Mathematically tied
// documents then tie exactly and fall through to the id tie-break.
double canonical_sum(std::vector<double>& parts) {
  std::sort(parts.begin(), parts.end());
  double total = 0.0;
  for (double x : parts) total += x;
  return total;
}

}  // namespace

double score(const Index& index, std::span<const std::string> query_terms,
             std::string_view passage_id, Bm25Params params) {
  const std::size_t doc = index.doc_position(passage_id);
  const double doc_len = index.doc_length_at(doc);
  std::vector<double> parts;
  for (const auto& term : query_terms) {
    const auto list = index.postings(term);
    auto it = std::lower_bound(list.begin(), list.end(), doc,
                               [](const Posting& p, std::size_t d) { return p.doc < d; });
    if (it == list.end() || it->doc != doc) continue;
    parts.push_back(term_weight(bm25_idf(index.doc_count(), list.size()), it->tf, doc_len,
                                index.avg_doc_length(), params));
  }
  return canonical_sum(parts);
}

Retriever::Retriever(const Corpus& corpus, const Index& index, Bm25Params params)
    : corpus_(corpus), index_(index), params_(params) {
  if (!index.matches(corpus)) throw Error("index does not match corpus");
}

std::vector<RankedPassage> Retriever::retrieve(std::string_view query, std::size_t k) const {
  if (k == 0) throw Error("retrieve: k must be >= 1");
  const auto terms = tokenize(query);
  // Term-at-a-time: collect (doc, contribution) pairs, then sum each doc's run.
  std::vector<std::pair<std::uint32_t, double>> contributions;
  for (const auto& term : terms) {
    const auto list = index_.postings(term);
    if (list.empty()) continue;
    const double idf = bm25_idf(index_.doc_count(), list.size());
    for (const auto& p : list) {
      contributions.emplace_back(p.doc, term_weight(idf, p.tf, index_.doc_length_at(p.doc),
                                                    index_.avg_doc_length(), params_));
    }
  }
  std::sort(contributions.begin(), contributions.end());

  std::vector<double> acc(index_.doc_count(), 0.0);
  std::vector<std::uint32_t> hits;
  for (std::size_t i = 0; i < contributions.size();) {
    const std::uint32_t doc = contributions[i].first;
    double total = 0.0;
    for (; i < contributions.size() && contributions[i].first == doc; ++i) total += contributions[i].second;
    acc[doc] = total;
    if (total > 0.0) hits.push_back(doc);
  }
  const auto& ids = index_.doc_ids();
  auto better = [&](std::uint32_t x, std::uint32_t y) {
    if (acc[x] != acc[y]) return acc[x] > acc[y];
    return ids[x] < ids[y];
  };
  const std::size_t n = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(n), hits.end(), better);

  std::vector<RankedPassage> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({corpus_[hits[i]], acc[hits[i]], i + 1});
  }
  return out;
}

}  // namespace hanrag
