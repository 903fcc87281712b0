#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hanrag/corpus.hpp"
#include "hanrag/errors.hpp"
#include "hanrag/prompts.hpp"

namespace hanrag {

struct GenParams {
  int max_tokens = 512;
  double temperature = 0.0;
  std::vector<std::string> stop;
};

// Network or server-side failure. Retried by the HTTP backend.
class TransportError : public Error {
 public:
  using Error::Error;
};

class TimeoutError : public TransportError {
 public:
  using TransportError::TransportError;
};

// The scripted oracle has no entry (and no default) for a prompt.
class OracleMissError : public Error {
 public:
  explicit OracleMissError(std::string key)
      : Error("scripted oracle has no entry for " + key), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

// Text completion. Implementations must accept concurrent calls.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string complete(std::string_view prompt, const GenParams& params) = 0;
};

inline std::string complete(Backend& backend, std::string_view prompt, const GenParams& params) {
  return backend.complete(prompt, params);
}

// Adapts a callable; handy for tests and for wiring ad-hoc models.
class FunctionBackend final : public Backend {
 public:
  using Fn = std::function<std::string(std::string_view, const GenParams&)>;
  explicit FunctionBackend(Fn fn) : fn_(std::move(fn)) {}
  std::string complete(std::string_view prompt, const GenParams& params) override {
    return fn_(prompt, params);
  }

 private:
  Fn fn_;
};

// Forwards to another backend and keeps every prompt/response pair.
class RecordingBackend final : public Backend {
 public:
  struct Call {
    std::optional<TemplateId> template_id;
    std::string prompt;
    std::string response;
  };

  explicit RecordingBackend(Backend& inner) : inner_(inner) {}

  std::string complete(std::string_view prompt, const GenParams& params) override;

  std::vector<Call> calls() const;
  std::size_t count(TemplateId id) const;
  std::size_t total() const;
  void clear();

 private:
  Backend& inner_;
  mutable std::mutex mutex_;
  std::vector<Call> calls_;
};

// ---------------------------------------------------------------------------
// Scripted oracle

enum class OracleKind { fact, route, relevance, ending, decompose, refine, qa, compose };

std::string_view to_string(OracleKind kind) noexcept;
OracleKind parse_oracle_kind(std::string_view name);

// A generator answer that applies only when the rendered context satisfies
// the conditions. Entries for one question are tried in insertion order.
struct FactRule {
  std::string value;
  std::vector<std::string> when_context_has;    // all of these passage ids
  std::vector<std::string> unless_context_has;  // none of these passage ids
};

// Deterministic table-driven stand-in for the language model. It recognizes
// which template a prompt was rendered from, pulls the question out of it
// and answers from the matching table. Question keys are normalize_answer()
// of the question text.
//
// Defaults may contain "{query}" (the question as written in the prompt) and,
// for compose, "{joined}" (the simple questions merged into one sentence).
class ScriptedOracle final : public Backend {
 public:
  ScriptedOracle() = default;

  // JSONL records {kind, key, value, ...}; see README for the fields of each kind.
  static ScriptedOracle load(std::istream& in);
  static ScriptedOracle load(const std::filesystem::path& path);
  void load_records(std::istream& in);

  // Lets the oracle map passage texts in prompts back to passage ids.
  void bind_corpus(const Corpus& corpus);

  void add_fact(std::string_view question, FactRule rule);
  void add_fact(std::string_view question, std::string value);
  void add_route(std::string_view question, std::string label);
  void add_relevance(std::string_view question, std::string passage_id, bool relevant);
  void add_ending(std::string_view question, std::size_t steps, bool ended);
  void add_decomposition(std::string_view question, const std::vector<std::string>& sub_questions);
  void add_decomposition_raw(std::string_view question, std::string raw_output);
  void add_refinement(std::string_view question, std::size_t step, std::string seed);
  void add_qa(std::string passage_id, std::string question, std::string answer);
  void add_qa_raw(std::string passage_id, std::string raw_output);
  void add_composition(const std::vector<std::string>& simple_questions, std::string compound);
  void set_default(OracleKind kind, std::string value);

  std::string complete(std::string_view prompt, const GenParams& params) override;

  static std::string key(std::string_view question);

 private:
  std::string resolve_passage(std::string_view doc_text) const;
  std::string miss(OracleKind kind, const std::string& key, std::string_view query,
                   std::string_view joined = {}) const;
  std::string answer_fact(const Bindings& bindings) const;
  std::string answer_compose(const Bindings& bindings) const;

  std::unordered_map<std::string, std::vector<FactRule>> facts_;
  std::unordered_map<std::string, std::string> routes_;
  std::map<std::pair<std::string, std::string>, bool> relevance_;
  std::map<std::pair<std::string, std::size_t>, bool> endings_;
  std::unordered_map<std::string, std::string> decompositions_;
  std::map<std::pair<std::string, std::size_t>, std::string> refinements_;
  std::unordered_map<std::string, std::string> qa_;
  std::unordered_map<std::string, std::string> compositions_;
  std::map<OracleKind, std::string> defaults_;
  std::unordered_map<std::string, std::string> passage_by_text_;
};

// ---------------------------------------------------------------------------
// HTTP backend (OpenAI-compatible chat completions)

struct HttpBackendConfig {
  std::string endpoint_url;  // e.g. http://127.0.0.1:8000/v1/chat/completions
  std::string api_key_env;   // name of the environment variable holding the key
  std::string model_name;
  std::size_t max_parallel = 4;
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{250};
  std::chrono::milliseconds timeout{60'000};
};

class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(HttpBackendConfig config);

  // Transport failures, 429 and 5xx responses are retried with exponential
  // backoff up to max_attempts; anything else is surfaced immediately.
  std::string complete(std::string_view prompt, const GenParams& params) override;

  std::uint64_t requests_sent() const noexcept { return requests_.load(); }
  // Requests sent by every HttpBackend in this process.
  static std::uint64_t process_requests_sent() noexcept;

  // Request body for one prompt; exposed for tests.
  std::string request_body(std::string_view prompt, const GenParams& params) const;
  static std::string parse_response(std::string_view body);

 private:
  std::string attempt(const std::string& body);

  HttpBackendConfig config_;
  std::string scheme_host_port_;
  std::string path_;
  std::string api_key_;
  std::atomic<std::uint64_t> requests_{0};

  std::mutex slots_mutex_;
  std::condition_variable slots_cv_;
  std::size_t in_flight_ = 0;
};

}  // namespace hanrag
