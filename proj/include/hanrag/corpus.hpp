#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace hanrag {

struct Passage {
  std::string id;
  std::string title;
  std::string text;
  std::optional<std::string> entity;

  friend bool operator==(const Passage&, const Passage&) = default;
};

// "title: text" when a title is present, otherwise the bare text. This is
// the form that gets indexed and shown to the model.
std::string render_passage(const Passage& passage);

enum class CorpusFormat { jsonl, tsv };

CorpusFormat parse_corpus_format(std::string_view name);

// Immutable passage collection, iterated in ingestion order.
class Corpus {
 public:
  Corpus() = default;

  // Reads one passage per record. Blank lines are skipped but still count
  // toward line numbers reported in errors.
  static Corpus ingest(std::istream& in, CorpusFormat format);

  // Format is inferred from the extension (.tsv, otherwise jsonl) when not given.
  static Corpus load(const std::filesystem::path& path,
                     std::optional<CorpusFormat> format = std::nullopt);

  static Corpus from_passages(std::vector<Passage> passages);

  // JSONL snapshot readable by ingest(..., jsonl).
  void save_snapshot(std::ostream& out) const;
  void save_snapshot(const std::filesystem::path& path) const;

  const Passage& get(std::string_view id) const;
  const Passage* find(std::string_view id) const noexcept;
  std::optional<std::size_t> position(std::string_view id) const noexcept;

  std::size_t doc_count() const noexcept { return passages_.size(); }
  bool empty() const noexcept { return passages_.empty(); }
  std::span<const Passage> passages() const noexcept { return passages_; }
  const Passage& operator[](std::size_t i) const { return passages_[i]; }

  auto begin() const noexcept { return passages_.begin(); }
  auto end() const noexcept { return passages_.end(); }

 private:
  void add(Passage passage, std::size_t line);

  std::vector<Passage> passages_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

const Passage& get_passage(const Corpus& corpus, std::string_view id);

}  // namespace hanrag
