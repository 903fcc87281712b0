#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hanrag/corpus.hpp"
#include "hanrag/text.hpp"

namespace hanrag {

struct RetrievalConfig {
  double k1 = 1.2;
  double b = 0.75;
  std::size_t top_k_retrieve = 10;
  std::size_t top_k_context = 3;

  // Throws hanrag::Error when k1 <= 0, b outside [0,1], top_k_retrieve == 0
  // or top_k_context > top_k_retrieve.
  void validate() const;
};

struct Posting {
  std::uint32_t doc;  // position in Index::doc_ids()
  std::uint32_t tf;
};

// Inverted index over the "title: text" rendering of every passage.
class Index {
 public:
  Index() = default;

  static Index build(const Corpus& corpus);

  // JSONL dump: a header line with document ids and lengths, then one line
  // per term (sorted) with its postings.
  void save(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
  static Index load(std::istream& in);
  static Index load(const std::filesystem::path& path);

  std::size_t doc_count() const noexcept { return doc_ids_.size(); }
  double avg_doc_length() const noexcept { return avg_doc_length_; }
  const std::vector<std::string>& doc_ids() const noexcept { return doc_ids_; }
  std::uint32_t doc_length_at(std::size_t doc) const { return doc_lengths_.at(doc); }
  std::size_t term_count() const noexcept { return postings_.size(); }

  std::uint32_t doc_length(std::string_view passage_id) const;
  std::size_t document_frequency(std::string_view term) const;
  std::span<const Posting> postings(std::string_view term) const;
  std::size_t doc_position(std::string_view passage_id) const;

  // Same ids in the same order as the corpus.
  bool matches(const Corpus& corpus) const;

 private:
  void finish();

  std::vector<std::string> doc_ids_;
  std::vector<std::uint32_t> doc_lengths_;
  double avg_doc_length_ = 0.0;
  std::unordered_map<std::string, std::uint32_t> doc_by_id_;
  std::unordered_map<std::string, std::vector<Posting>> postings_;
};

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

inline Bm25Params bm25_params(const RetrievalConfig& config) { return {config.k1, config.b}; }

// ln((N - df + 0.5) / (df + 0.5) + 1); never negative.
double bm25_idf(std::size_t doc_count, std::size_t df);

// Sum of BM25 contributions of query_terms for one passage. Repeated query
// terms contribute once per occurrence. Throws NotFoundError for unknown ids.
double score(const Index& index, std::span<const std::string> query_terms,
             std::string_view passage_id, Bm25Params params = {});

struct RankedPassage {
  Passage passage;
  double score = 0.0;
  std::size_t rank = 0;  // 1-based
};

// Top-k by descending score, ties by ascending passage id. Passages scoring
// zero are never returned.
class Retriever {
 public:
  Retriever(const Corpus& corpus, const Index& index, Bm25Params params = {});

  std::vector<RankedPassage> retrieve(std::string_view query, std::size_t k) const;

  const Corpus& corpus() const noexcept { return corpus_; }
  const Index& index() const noexcept { return index_; }

 private:
  const Corpus& corpus_;
  const Index& index_;
  Bm25Params params_;
};

}  // namespace hanrag
