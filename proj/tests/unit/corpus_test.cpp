#include <doctest.h>

#include <sstream>

#include "hanrag/corpus.hpp"
#include "hanrag/errors.hpp"
#include "support.hpp"

using namespace hanrag;

TEST_SUITE("corpus") {
  TEST_CASE("three jsonl records keep their order") {
    std::istringstream in(
        R"({"id":"a","title":"A","text":"first"})"
        "\n"
        R"({"id":"b","text":"second","entity":"E"})"
        "\n"
        R"({"id":"c","title":"","text":"third"})"
        "\n");
    const Corpus c = Corpus::ingest(in, CorpusFormat::jsonl);
    REQUIRE(c.doc_count() == 3);
    CHECK(c[0].id == "a");
    CHECK(c[1].id == "b");
    CHECK(c[2].id == "c");
    CHECK(c[1].entity == std::optional<std::string>("E"));
    CHECK(c[1].title.empty());
  }

  TEST_CASE("empty stream gives an empty corpus") {
    std::istringstream in("");
    const Corpus c = Corpus::ingest(in, CorpusFormat::jsonl);
    CHECK(c.doc_count() == 0);
    CHECK(c.empty());
  }

  TEST_CASE("duplicate id reports the id and its line") {
    std::ostringstream src;
    src << R"({"id":"p0","text":"zero"})" << '\n';
    src << R"({"id":"p1","text":"one"})" << '\n';
    src << R"({"id":"p2","text":"two"})" << '\n';
    src << R"({"id":"p3","text":"three"})" << '\n';
    src << R"({"id":"p1","text":"again"})" << '\n';
    std::istringstream in(src.str());
    try {
      (void)Corpus::ingest(in, CorpusFormat::jsonl);
      FAIL("expected a duplicate-id error");
    } catch (const DuplicateIdError& e) {
      CHECK(e.id() == "p1");
      CHECK(e.line() == 5);
    }
  }

  TEST_CASE("whitespace-only text is rejected with its line number") {
    std::istringstream in(R"({"id":"a","text":"ok"})" "\n\n" R"({"id":"b","text":"  \t "})" "\n");
    try {
      (void)Corpus::ingest(in, CorpusFormat::jsonl);
      FAIL("expected an empty-text error");
    } catch (const EmptyTextError& e) {
      CHECK(e.line() == 3);
    }
  }

  TEST_CASE("malformed records are parse errors with line numbers") {
    std::istringstream bad_json(R"({"id":"a","text":"ok"})" "\n{not json\n");
    CHECK_THROWS_AS((void)Corpus::ingest(bad_json, CorpusFormat::jsonl), ParseError);
    std::istringstream missing_text(R"({"id":"a"})" "\n");
    try {
      (void)Corpus::ingest(missing_text, CorpusFormat::jsonl);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 1);
    }
    std::istringstream tsv("a\tTitle\n");
    CHECK_THROWS_AS((void)Corpus::ingest(tsv, CorpusFormat::tsv), ParseError);
  }

  TEST_CASE("tsv records") {
    std::istringstream in("p1\tTitle One\tSome text\np2\t\tMore text\n");
    const Corpus c = Corpus::ingest(in, CorpusFormat::tsv);
    REQUIRE(c.doc_count() == 2);
    CHECK(c[0].title == "Title One");
    CHECK(c[0].text == "Some text");
    CHECK(c[1].title.empty());
  }

  TEST_CASE("get_passage round trip and not-found") {
    std::istringstream in(R"({"id":"p1","title":"T","text":"hello"})" "\n");
    const Corpus c = Corpus::ingest(in, CorpusFormat::jsonl);
    CHECK(get_passage(c, "p1").text == "hello");
    const Corpus empty;
    try {
      (void)get_passage(empty, "missing");
      FAIL("expected not-found");
    } catch (const NotFoundError& e) {
      CHECK(e.key() == "missing");
    }
  }

  TEST_CASE("100 passages round-trip by id") {
    std::ostringstream src;
    for (int i = 0; i < 100; ++i) {
      src << R"({"id":"doc-)" << i << R"(","text":"text number )" << i << R"("})" << '\n';
    }
    std::istringstream in(src.str());
    const Corpus c = Corpus::ingest(in, CorpusFormat::jsonl);
    REQUIRE(c.doc_count() == 100);
    for (int i = 0; i < 100; ++i) {
      const auto& p = get_passage(c, "doc-" + std::to_string(i));
      CHECK(p.text == "text number " + std::to_string(i));
      CHECK(c.position(p.id) == std::optional<std::size_t>(i));
    }
  }

  TEST_CASE("ingest is deterministic and snapshots reload identically") {
    const auto path = test_support::case_study_dir() / "corpus.jsonl";
    const Corpus a = Corpus::load(path);
    const Corpus b = Corpus::load(path);
    REQUIRE(a.doc_count() == b.doc_count());
    CHECK(std::equal(a.begin(), a.end(), b.begin(), b.end()));

    std::ostringstream snap;
    a.save_snapshot(snap);
    std::istringstream back(snap.str());
    const Corpus c = Corpus::ingest(back, CorpusFormat::jsonl);
    CHECK(std::equal(a.begin(), a.end(), c.begin(), c.end()));
  }

  TEST_CASE("render_passage prefixes the title") {
    CHECK(render_passage({"x", "Edith of Wessex", "brother-in-law.", std::nullopt}) ==
          "Edith of Wessex: brother-in-law.");
    CHECK(render_passage({"x", "", "bare", std::nullopt}) == "bare");
  }

  TEST_CASE("format names") {
    CHECK(parse_corpus_format("jsonl") == CorpusFormat::jsonl);
    CHECK(parse_corpus_format("tsv") == CorpusFormat::tsv);
    CHECK_THROWS_AS(parse_corpus_format("xml"), Error);
  }
}
