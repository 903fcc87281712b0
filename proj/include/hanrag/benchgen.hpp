#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "hanrag/corpus.hpp"
#include "hanrag/llm.hpp"

namespace hanrag {

// Model output that fails validation; the record is skipped and counted.
class GenerationReject : public Error {
 public:
  using Error::Error;
};

struct EntityQA {
  std::string entity;
  std::string passage_id;
  std::string question;
  std::string answer;
};

struct CompoundExample {
  std::string entity;
  std::vector<std::string> sub_questions;
  std::vector<std::string> sub_answers;
  std::vector<std::string> passage_ids;
  std::string compound_question;
  std::string answer;  // sub_answers joined with " && "
  int hop_count = 0;
};

struct Rejection {
  std::string reason;
};

using ComposeOutcome = std::variant<CompoundExample, Rejection>;

inline constexpr std::size_t k_max_passages_per_entity = 10;
inline constexpr std::size_t k_max_answer_tokens = 8;

struct EntitySample {
  std::string entity;
  std::vector<const Passage*> passages;  // up to 10, corpus order
};

// Seeded sampling without replacement over the distinct passage entities.
std::vector<EntitySample> sample_entities(const Corpus& corpus, std::size_t n, std::uint64_t seed);

// Asks the model for one short question about the entity whose answer is
// quoted from the passage. Throws GenerationReject on unusable output.
EntityQA gen_single_qa(std::string_view entity, const Passage& passage, Backend& backend,
                       const GenParams& params = {});

// 2-4 questions about one entity -> one compound question, or a rejection
// when the model answers "no".
ComposeOutcome compose_compound(std::span<const EntityQA> questions, Backend& backend,
                                const GenParams& params = {});

struct SplitCounts {
  std::size_t train = 0;
  std::size_t dev = 0;
  std::size_t test = 0;
};

struct GenerationStats {
  std::size_t qa_accepted = 0;
  std::size_t qa_rejected = 0;
  std::size_t compose_accepted = 0;
  std::size_t compose_rejected = 0;
  std::size_t duplicates_dropped = 0;
  std::size_t entities_used = 0;
};

struct Benchmark {
  std::vector<CompoundExample> train;
  std::vector<CompoundExample> dev;
  std::vector<CompoundExample> test;
  GenerationStats stats;
};

// Splits never share an entity or a compound question. Throws when the
// corpus runs out of entities before every split is filled.
Benchmark build_benchmark(const Corpus& corpus, SplitCounts counts, std::uint64_t seed, Backend& backend,
                          const GenParams& params = {});

// Dataset record in the evaluation schema, plus entity and sub_questions.
nlohmann::json to_eval_record(const CompoundExample& example, std::string id);
CompoundExample compound_from_record(const nlohmann::json& record);

// Writes train.jsonl, dev.jsonl and test.jsonl.
void write_benchmark(const Benchmark& benchmark, const std::filesystem::path& out_dir);

// ---------------------------------------------------------------------------
// Training data for the judging model

enum class TrainingTask { routing, decomposition, refinement, relevance, ending };

std::string_view to_string(TrainingTask task) noexcept;
TrainingTask parse_training_task(std::string_view name);

struct Hop {
  std::string question;
  std::string answer;
  std::vector<std::string> gold_passages;
};

struct ReasoningChain {
  std::string question;
  std::vector<Hop> hops;
};

struct SingleHopSource {
  std::string question;
  std::vector<std::string> gold_passages;
};

struct TrainingSources {
  std::vector<std::string> straightforward;
  std::vector<SingleHopSource> single;
  std::vector<ReasoningChain> complex;
  std::vector<CompoundExample> compound;
};

// JSONL records tagged with "source": straightforward | single | complex | compound.
TrainingSources load_training_sources(std::istream& in);

struct TrainingOptions {
  std::size_t negatives_per_positive = 1;
  // Label relevance pairs with the backend instead of gold provenance.
  bool label_relevance_with_backend = false;
  GenParams params;
};

struct TrainingSets {
  std::map<TrainingTask, std::vector<nlohmann::json>> records;
  // Tasks that could not be built from the given sources.
  std::map<TrainingTask, std::string> errors;
};

// corpus is needed for relevance pairs; backend only when relevance labels
// come from the model.
TrainingSets build_training_sets(const TrainingSources& sources, const Corpus* corpus, Backend* backend,
                                 std::uint64_t seed, const TrainingOptions& options = {});

// Throws hanrag::Error when the record does not match its task schema.
void validate_training_record(const nlohmann::json& record);

// One <task>.jsonl per task that has records.
void write_training_sets(const TrainingSets& sets, const std::filesystem::path& out_dir);

}  // namespace hanrag
