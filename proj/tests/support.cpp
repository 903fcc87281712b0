#include "support.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "hanrag/prompts.hpp"
#include "hanrag/text.hpp"

namespace fs = std::filesystem;
using namespace hanrag;

namespace test_support {

fs::path fixture_dir() { return HANRAG_FIXTURE_DIR; }
fs::path case_study_dir() { return fixture_dir() / "case_study"; }

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() /
          ("hanrag-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------

BruteForceBm25::BruteForceBm25(const Corpus& corpus, double k1, double b) : k1_(k1), b_(b) {
  double total = 0;
  for (const auto& p : corpus) {
    ids_.push_back(p.id);
    docs_.push_back(ascii_terms(p.title.empty() ? p.text : p.title + ": " + p.text));
    total += static_cast<double>(docs_.back().size());
  }
  if (!docs_.empty()) avg_len_ = total / static_cast<double>(docs_.size());
}

std::vector<std::string> BruteForceBm25::ascii_terms(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

double BruteForceBm25::score(const std::vector<std::string>& query_terms, std::size_t doc) const {
  const double n = static_cast<double>(docs_.size());
  // Contributions are summed smallest first, so equal multisets give equal
  // scores regardless of query-term order.
  std::vector<double> parts;
  for (const auto& t : query_terms) {
    double df = 0;
    for (const auto& d : docs_) df += std::count(d.begin(), d.end(), t) > 0 ? 1 : 0;
    const double tf = static_cast<double>(std::count(docs_[doc].begin(), docs_[doc].end(), t));
    if (tf == 0) continue;
    const double idf = std::log((n - df + 0.5) / (df + 0.5) + 1.0);
    const double len = static_cast<double>(docs_[doc].size());
    parts.push_back(idf * tf * (k1_ + 1) / (tf + k1_ * (1 - b_ + b_ * len / avg_len_)));
  }
  std::sort(parts.begin(), parts.end());
  double s = 0;
  for (double x : parts) s += x;
  return s;
}

std::vector<std::pair<std::string, double>> BruteForceBm25::rank(const std::string& query) const {
  const auto terms = ascii_terms(query);
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t i = 0; i < docs_.size(); ++i) {
    const double s = score(terms, i);
    if (s > 0) out.emplace_back(ids_[i], s);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return out;
}

namespace {

const std::vector<std::string>& vocabulary() {
  static const std::vector<std::string> words = {
      "river", "stone", "harbor", "violin", "castle", "meadow", "copper", "lantern", "orchard", "glacier",
      "falcon", "ember",  "thistle", "quarry", "saddle", "beacon", "marble", "tundra", "cedar",  "willow",
      "anchor", "prism",  "cobalt", "fjord",  "bramble", "delta", "summit", "canyon", "lagoon", "ridge"};
  return words;
}

std::string pick(std::mt19937_64& rng, const std::vector<std::string>& from) {
  return from[static_cast<std::size_t>(rng() % from.size())];
}

// Pronounceable unique-ish names: "Valorin", "Keshadu", ...
std::string made_up_word(std::mt19937_64& rng, std::size_t syllables) {
  static const std::vector<std::string> onset = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "sh", "th"};
  static const std::vector<std::string> vowel = {"a", "e", "i", "o", "u", "ai", "ou"};
  std::string w;
  for (std::size_t i = 0; i < syllables; ++i) w += pick(rng, onset) + pick(rng, vowel);
  w += pick(rng, {"n", "r", "x", "l", "s"});
  w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
  return w;
}

// Draws names until one is new; keeps generated fixtures free of collisions.
std::string fresh_name(std::mt19937_64& rng, std::set<std::string>& used, std::size_t syllables = 3) {
  for (;;) {
    std::string w = made_up_word(rng, syllables);
    if (used.insert(to_lower_utf8(w)).second) return w;
  }
}

std::string slug(const std::string& name) {
  std::string out;
  for (char c : name) {
    if (std::isalnum(static_cast<unsigned char>(c))) out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    else if (!out.empty() && out.back() != '_') out += '_';
  }
  return out;
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::string compound_of(const std::vector<std::string>& questions) {
  std::string out;
  for (std::size_t i = 0; i < questions.size(); ++i) {
    std::string q = questions[i];
    if (!q.empty() && q.back() == '?') q.pop_back();
    if (i > 0) {
      out += (i + 1 == questions.size()) ? ", and " : ", ";
      q[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(q[0])));
    }
    out += q;
  }
  return out + "?";
}

}  // namespace

Corpus synthetic_corpus(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto& vocab = vocabulary();
  std::vector<Passage> out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t len = 4 + rng() % 20;
    std::string text;
    for (std::size_t j = 0; j < len; ++j) {
      if (j) text += ' ';
      text += pick(rng, vocab);
    }
    std::string title = (i % 5 == 0) ? "" : pick(rng, vocab);
    char id[32];
    std::snprintf(id, sizeof id, "p%03zu", i);
    out.push_back({id, title, text, std::nullopt});
  }
  // Exact duplicates make tie-breaking observable.
  if (n >= 4) out[n - 1].text = out[1].text, out[n - 1].title = out[1].title;
  return Corpus::from_passages(std::move(out));
}

std::vector<std::string> synthetic_queries(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t len = 1 + rng() % 5;
    std::string q;
    for (std::size_t j = 0; j < len; ++j) {
      if (j) q += ' ';
      q += (rng() % 10 == 0) ? std::string("unseen") : pick(rng, vocabulary());
    }
    out.push_back(q);
  }
  return out;
}

Bundle load_case_study() {
  Bundle b;
  b.corpus = Corpus::load(case_study_dir() / "corpus.jsonl");
  b.index = Index::build(b.corpus);
  b.oracle = std::make_unique<ScriptedOracle>(ScriptedOracle::load(case_study_dir() / "oracle.jsonl"));
  b.oracle->bind_corpus(b.corpus);
  b.examples = load_dataset(case_study_dir() / "dataset.jsonl");
  return b;
}

SyntheticSuite compound_and_complex_suite(std::size_t compound_per_n, std::size_t complex_count,
                                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::set<std::string> used;
  SyntheticSuite s;
  s.oracle = std::make_unique<ScriptedOracle>();
  auto& o = *s.oracle;
  std::vector<Passage> passages;

  struct Attribute {
    std::string question;  // {E} is the entity
    std::string sentence;  // {E} entity, {A} answer
  };
  const std::vector<Attribute> attributes = {
      {"In which town was {E} born?", "{E} was born in the town of {A}."},
      {"Who is the spouse of {E}?", "{E} married {A} after the war."},
      {"Which instrument does {E} play?", "{E} is known for playing the {A}."},
      {"What is the name of the ship commanded by {E}?", "{E} commanded the ship {A} for a decade."},
  };
  auto fill = [](std::string t, const std::string& e, const std::string& a) {
    for (auto pos = t.find("{E}"); pos != std::string::npos; pos = t.find("{E}")) t.replace(pos, 3, e);
    for (auto pos = t.find("{A}"); pos != std::string::npos; pos = t.find("{A}")) t.replace(pos, 3, a);
    return t;
  };

  for (std::size_t n = 2; n <= 4; ++n) {
    for (std::size_t j = 0; j < compound_per_n; ++j) {
      const std::string entity = fresh_name(rng, used) + " " + fresh_name(rng, used, 2);
      CompoundCase c;
      for (std::size_t a = 0; a < n; ++a) {
        const std::string answer = fresh_name(rng, used);
        const std::string pid = slug(entity) + "_" + std::to_string(a);
        passages.push_back({pid, entity, fill(attributes[a].sentence, entity, answer), std::nullopt});
        c.sub_questions.push_back(fill(attributes[a].question, entity, ""));
        c.sub_answers.push_back(answer);
        c.gold_passages.push_back(pid);
      }
      c.question = compound_of(c.sub_questions);
      o.add_route(c.question, "compound question");
      o.add_decomposition(c.question, c.sub_questions);
      for (std::size_t a = 0; a < n; ++a) {
        o.add_relevance(c.sub_questions[a], c.gold_passages[a], true);
        o.add_fact(c.sub_questions[a], FactRule{c.sub_answers[a], {c.gold_passages[a]}, {}});
        // Iterative baseline: one sub-question per step, done after the last.
        o.add_refinement(c.question, a + 1, c.sub_questions[a]);
        o.add_ending(c.question, a + 1, a + 1 == n);
      }
      o.add_fact(c.question, join(c.sub_answers, " && "));
      s.compound.push_back(std::move(c));
    }
  }

  for (std::size_t j = 0; j < complex_count; ++j) {
    const std::size_t hops = 2 + j % 2;
    const std::string org = fresh_name(rng, used) + " Society";
    const std::string founder = fresh_name(rng, used) + " " + fresh_name(rng, used, 2);
    const std::string city = fresh_name(rng, used);
    const std::string river = fresh_name(rng, used);
    ComplexCase c;
    c.hops = {"Who founded the " + org + "?", "Where was " + founder + " born?"};
    c.hop_answers = {founder, city};
    std::vector<std::string> texts = {"The " + org + " was founded by " + founder + ".",
                                      founder + " was born in " + city + "."};
    if (hops == 3) {
      c.hops.push_back("Which river flows through " + city + "?");
      c.hop_answers.push_back(river);
      texts.push_back(city + " lies on the banks of the " + river + " river.");
      c.question = "Which river flows through the birthplace of the founder of the " + org + "?";
    } else {
      c.question = "Where was the founder of the " + org + " born?";
    }
    for (std::size_t h = 0; h < hops; ++h) {
      const std::string pid = slug(org) + "_hop" + std::to_string(h + 1);
      passages.push_back({pid, "", texts[h], std::nullopt});
      c.gold_passages.push_back(pid);
      o.add_refinement(c.question, h + 1, c.hops[h]);
      o.add_ending(c.question, h + 1, h + 1 == hops);
      o.add_relevance(c.hops[h], pid, true);
      o.add_fact(c.hops[h], FactRule{c.hop_answers[h], {pid}, {}});
    }
    o.add_route(c.question, "complex question");
    o.add_fact(c.question, c.hop_answers.back());
    s.complex.push_back(std::move(c));
  }

  o.set_default(OracleKind::relevance, "false");
  // Past the scripted hops (ending check disabled) the refiner repeats the question.
  o.set_default(OracleKind::refine, "{query}");
  s.corpus = Corpus::from_passages(std::move(passages));
  s.index = Index::build(s.corpus);
  o.bind_corpus(s.corpus);
  return s;
}

AdversarialSuite adversarial_suite(std::size_t count) {
  std::mt19937_64 rng(4242);
  std::set<std::string> used;
  AdversarialSuite s;
  s.oracle = std::make_unique<ScriptedOracle>();
  std::vector<Passage> passages;
  const std::vector<std::string> nouns = {"banner", "roof", "carriage", "uniform", "gate", "lighthouse"};
  const std::vector<std::string> colours = {"crimson", "teal", "ochre", "violet", "amber", "indigo"};
  for (std::size_t i = 0; i < count; ++i) {
    const std::string entity = fresh_name(rng, used) + " " + fresh_name(rng, used, 2);
    const std::string noun = nouns[i % nouns.size()];
    AdversarialCase c;
    c.question = "What colour is the " + noun + " of " + entity + "?";
    c.answer = colours[(i * 7) % colours.size()];
    c.gold_passage = slug(entity) + "_gold";
    passages.push_back({c.gold_passage, entity, "The " + noun + " of " + entity + " is painted " + c.answer + ".",
                        std::nullopt});
    for (int d = 0; d < 3; ++d) {
      const std::string pid = slug(entity) + "_noise" + std::to_string(d);
      passages.push_back({pid, entity,
                          "What colour is the " + noun + " of " + entity + "? Visitors often ask what colour the " +
                              noun + " of " + entity + " is, and guides at " + entity + " tell a story about the " +
                              noun + " instead.",
                          std::nullopt});
      c.distractors.push_back(pid);
    }
    s.oracle->add_route(c.question, "single-step question");
    s.oracle->add_relevance(c.question, c.gold_passage, true);
    s.oracle->add_fact(c.question, c.answer);
    s.cases.push_back(std::move(c));
  }
  s.oracle->set_default(OracleKind::relevance, "false");
  s.corpus = Corpus::from_passages(std::move(passages));
  s.index = Index::build(s.corpus);
  s.oracle->bind_corpus(s.corpus);
  return s;
}

ToyBenchmarkSource toy_benchmark_source(std::size_t entities, std::size_t passages_per_entity) {
  std::mt19937_64 rng(777);
  std::set<std::string> used;
  ToyBenchmarkSource s;
  s.oracle = std::make_unique<ScriptedOracle>();
  std::vector<Passage> passages;
  const std::vector<std::string> facets = {"birthplace", "employer", "teacher", "pet", "motto",
                                           "hometown", "rival", "horse", "ship", "garden"};
  for (std::size_t e = 0; e < entities; ++e) {
    const std::string entity = fresh_name(rng, used) + " " + fresh_name(rng, used, 2);
    for (std::size_t k = 0; k < passages_per_entity; ++k) {
      const std::string facet = facets[k % facets.size()];
      const std::string value = fresh_name(rng, used);
      const std::string pid = slug(entity) + "_" + std::to_string(k);
      passages.push_back({pid, entity, "The " + facet + " of " + entity + " is " + value + ".", entity});
      const std::string question = "What is the " + facet + " of " + entity + "?";
      if (k == 3) {
        // Answer not quoted from the passage: must be rejected.
        s.oracle->add_qa(pid, question, value + " Junior");
      } else if (k == 4) {
        s.oracle->add_qa_raw(pid, "I cannot produce JSON for this one.");
      } else {
        s.oracle->add_qa(pid, question, value);
      }
    }
  }
  s.oracle->set_default(OracleKind::compose, "{joined}");
  s.corpus = Corpus::from_passages(std::move(passages));
  s.oracle->bind_corpus(s.corpus);
  return s;
}

std::vector<std::vector<std::string>> generator_contexts(const RecordingBackend& recorder, const Corpus& corpus) {
  std::map<std::string, std::string> by_rendering;
  for (const auto& p : corpus) by_rendering.emplace(render_passage(p), p.id);
  std::vector<std::vector<std::string>> out;
  for (const auto& call : recorder.calls()) {
    if (call.template_id != TemplateId::generator) continue;
    const auto match = match_prompt(call.prompt);
    if (!match) throw std::runtime_error("generator prompt did not match its template");
    std::vector<std::string> ids;
    for (const auto& doc : parse_doc_list(match->bindings.at("your_doc_list"))) {
      auto it = by_rendering.find(doc);
      ids.push_back(it == by_rendering.end() ? doc : it->second);
    }
    out.push_back(std::move(ids));
  }
  return out;
}

}  // namespace test_support
