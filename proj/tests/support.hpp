#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "hanrag/corpus.hpp"
#include "hanrag/evalkit.hpp"
#include "hanrag/llm.hpp"
#include "hanrag/pipeline.hpp"
#include "hanrag/retriever.hpp"

namespace test_support {

std::filesystem::path fixture_dir();
std::filesystem::path case_study_dir();

// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

std::string read_file(const std::filesystem::path& path);

// Independent BM25 reference: ASCII tokenization, every document scored
// directly from raw text, no inverted index.
class BruteForceBm25 {
 public:
  BruteForceBm25(const hanrag::Corpus& corpus, double k1, double b);
  static std::vector<std::string> ascii_terms(const std::string& text);
  double score(const std::vector<std::string>& query_terms, std::size_t doc) const;
  // (id, score) for every positive score, best first, ties by ascending id.
  std::vector<std::pair<std::string, double>> rank(const std::string& query) const;

 private:
  std::vector<std::string> ids_;
  std::vector<std::vector<std::string>> docs_;
  double k1_;
  double b_;
  double avg_len_ = 0.0;
};

// Passages made of words drawn from a small vocabulary, so terms repeat and
// ties occur.
hanrag::Corpus synthetic_corpus(std::size_t n, std::uint64_t seed);
std::vector<std::string> synthetic_queries(std::size_t n, std::uint64_t seed);

// A case-study bundle: corpus, index and oracle bound to the corpus.
struct Bundle {
  hanrag::Corpus corpus;
  hanrag::Index index;
  std::unique_ptr<hanrag::ScriptedOracle> oracle;
  std::vector<hanrag::EvalExample> examples;
};

Bundle load_case_study();

// Compound questions about invented entities with n in {2, 3, 4} attributes.
// The oracle also scripts the refiner/ending so the naive iterative baseline
// walks the sub-questions one per step.
struct CompoundCase {
  std::string question;
  std::vector<std::string> sub_questions;
  std::vector<std::string> sub_answers;
  std::vector<std::string> gold_passages;
};

struct ComplexCase {
  std::string question;
  std::vector<std::string> hops;
  std::vector<std::string> hop_answers;
  std::vector<std::string> gold_passages;
};

struct SyntheticSuite {
  hanrag::Corpus corpus;
  hanrag::Index index;
  std::unique_ptr<hanrag::ScriptedOracle> oracle;
  std::vector<CompoundCase> compound;
  std::vector<ComplexCase> complex;
};

SyntheticSuite compound_and_complex_suite(std::size_t compound_per_n, std::size_t complex_count,
                                          std::uint64_t seed);

// Single-step questions whose gold passage is outranked by distractors that
// repeat the question's words; the oracle marks every distractor irrelevant.
struct AdversarialCase {
  std::string question;
  std::string answer;
  std::string gold_passage;
  std::vector<std::string> distractors;
};

struct AdversarialSuite {
  hanrag::Corpus corpus;
  hanrag::Index index;
  std::unique_ptr<hanrag::ScriptedOracle> oracle;
  std::vector<AdversarialCase> cases;
};

AdversarialSuite adversarial_suite(std::size_t count);

// Entity-tagged corpus plus a QA/compose oracle for benchmark synthesis.
struct ToyBenchmarkSource {
  hanrag::Corpus corpus;
  std::unique_ptr<hanrag::ScriptedOracle> oracle;
};

ToyBenchmarkSource toy_benchmark_source(std::size_t entities, std::size_t passages_per_entity);

// Passage ids named in the generator prompts recorded by a RecordingBackend,
// one list per generator call, resolved through the corpus.
std::vector<std::vector<std::string>> generator_contexts(const hanrag::RecordingBackend& recorder,
                                                         const hanrag::Corpus& corpus);

}  // namespace test_support
