#include <doctest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hanrag/cli.hpp"
#include "support.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
  int rc = 0;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "hanrag");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int rc = hanrag::run_command(static_cast<int>(argv.size()), argv.data(), out, err);
  return {rc, out.str(), err.str()};
}

std::string config() { return (test_support::case_study_dir() / "config.json").string(); }
std::string dataset() { return (test_support::case_study_dir() / "dataset.jsonl").string(); }

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("ask a straightforward question") {
    const auto r = run({"ask", "Who is the first President of America?", "--config", config()});
    CHECK(r.rc == 0);
    CHECK(r.out == "answer: George Washington\nclass: straightforward\nsteps: 0\n");
  }

  TEST_CASE("ask with trace prints the result as json") {
    const auto r = run({"ask", "What is the Danish Football Union an instance of?", "--config", config(), "--trace"});
    REQUIRE(r.rc == 0);
    const auto j = json::parse(r.out);
    CHECK(j["answer"] == "International Federation of Association Football");
    CHECK(j["class"] == "complex");
    CHECK(j["steps"] == 2);
  }

  TEST_CASE("force class overrides the router") {
    const auto r = run({"ask", "Who is the first President of America?", "--config", config(), "--force-class",
                        "straightforward"});
    CHECK(r.rc == 0);
    CHECK(r.out.find("class: straightforward") != std::string::npos);
  }

  TEST_CASE("eval on the case study") {
    test_support::TempDir dir("cli-eval");
    const auto report = (dir.path() / "report.json").string();
    const auto r = run({"eval", "--config", config(), "--dataset", dataset(), "--report", report});
    CHECK(r.rc == 0);
    CHECK(r.out.find("HANRAG") != std::string::npos);
    CHECK(r.out.find("100.00") != std::string::npos);
    CHECK(r.out.find("1.33") != std::string::npos);
    const auto first = test_support::read_file(report);
    const auto j = json::parse(first);
    CHECK(j["count"] == 3);

    // Same inputs, same bytes.
    REQUIRE(run({"eval", "--config", config(), "--dataset", dataset(), "--report", report}).rc == 0);
    CHECK(test_support::read_file(report) == first);
  }

  TEST_CASE("eval ablation and baseline labels") {
    const auto ablated = run({"eval", "--config", config(), "--dataset", dataset(), "--ablate", "relevance"});
    CHECK(ablated.rc == 0);
    CHECK(ablated.out.find("-relevance") != std::string::npos);
    const auto baseline = run({"eval", "--config", config(), "--dataset", dataset(), "--baseline"});
    CHECK(baseline.rc == 0);
    CHECK(baseline.out.find("Naive-iterative") != std::string::npos);
    CHECK(run({"eval", "--config", config(), "--dataset", dataset(), "--ablate", "router"}).rc == 2);
  }

  TEST_CASE("missing dataset exits 1") {
    const auto r = run({"eval", "--config", config(), "--dataset", "/nonexistent/data.jsonl"});
    CHECK(r.rc == 1);
    CHECK(r.err.find("dataset file not found") != std::string::npos);
  }

  TEST_CASE("usage errors exit 2") {
    CHECK(run({"frobnicate"}).rc == 2);
    const auto r = run({"ask", "q?", "--no-such-flag"});
    CHECK(r.rc == 2);
    CHECK(r.err.find("Usage") != std::string::npos);
    CHECK(run({"eval", "--config", config()}).rc == 2);
  }

  TEST_CASE("help exits 0") {
    const auto r = run({"--help"});
    CHECK(r.rc == 0);
    CHECK(r.out.find("benchgen") != std::string::npos);
  }

  TEST_CASE("ingest and index") {
    test_support::TempDir dir("cli-index");
    const auto corpus = (test_support::case_study_dir() / "corpus.jsonl").string();
    const auto snapshot = (dir.path() / "snapshot.jsonl").string();
    const auto ingest = run({"ingest", "--corpus", corpus, "--out", snapshot});
    CHECK(ingest.rc == 0);
    CHECK(ingest.out == "passages: 10\n");
    CHECK(fs::exists(snapshot));

    const auto idx = (dir.path() / "corpus.idx").string();
    const auto index = run({"index", "--corpus", snapshot, "--out", idx});
    CHECK(index.rc == 0);
    CHECK(index.out.rfind("passages: 10\nterms: ", 0) == 0);

    // A prebuilt index gives the same answers as one built in memory.
    const auto ask = run({"ask", "Which English King was married to Edith Swan-Neck, also known as Edith the Fair?",
                          "--config", config(), "--index", idx});
    CHECK(ask.rc == 0);
    CHECK(ask.out.rfind("answer: Harold II\n", 0) == 0);

    CHECK(run({"ingest", "--corpus", (dir.path() / "missing.jsonl").string()}).rc == 1);
  }

  TEST_CASE("benchgen writes the splits") {
    test_support::TempDir dir("cli-bench");
    {
      std::ofstream corpus(dir.path() / "corpus.jsonl");
      std::ofstream oracle(dir.path() / "oracle.jsonl");
      const char* facets[] = {"colour", "height", "founder"};
      for (int e = 0; e < 6; ++e) {
        const std::string entity = "Entity" + std::to_string(e);
        for (int k = 0; k < 3; ++k) {
          const std::string id = "e" + std::to_string(e) + "p" + std::to_string(k);
          const std::string value = "value" + std::to_string(e * 10 + k);
          corpus << json{{"id", id}, {"title", entity}, {"text", "The " + std::string(facets[k]) + " of " + entity + " is " + value + "."},
                         {"entity", entity}}.dump()
                 << '\n';
          oracle << json{{"kind", "qa"},
                         {"key", id},
                         {"value", {{"Question", "What is the " + std::string(facets[k]) + " of " + entity + "?"},
                                    {"Answer", value}}}}.dump()
                 << '\n';
        }
      }
      oracle << json{{"kind", "default"}, {"key", "compose"}, {"value", "{joined}"}}.dump() << '\n';
    }
    const auto out_dir = (dir.path() / "bench").string();
    const std::vector<std::string> args{"benchgen", "--corpus", (dir.path() / "corpus.jsonl").string(), "--backend",
                                        "scripted", "--oracle", (dir.path() / "oracle.jsonl").string(), "--train", "2",
                                        "--dev", "1", "--test", "1", "--seed", "7", "--out-dir", out_dir};
    const auto r = run(args);
    CHECK(r.rc == 0);
    CHECK(r.out.find("train: 2") != std::string::npos);
    for (const char* f : {"train.jsonl", "dev.jsonl", "test.jsonl"}) CHECK(fs::exists(fs::path(out_dir) / f));
    const auto first = test_support::read_file(fs::path(out_dir) / "train.jsonl");
    REQUIRE(run(args).rc == 0);
    CHECK(test_support::read_file(fs::path(out_dir) / "train.jsonl") == first);
  }
}
