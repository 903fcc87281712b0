#include <doctest.h>

#include <random>
#include <set>

#include "hanrag/errors.hpp"
#include "hanrag/prompts.hpp"

using namespace hanrag;

namespace {

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

Bindings bind_all(TemplateId id, const std::string& salt) {
  Bindings b;
  for (const auto& slot : template_slots(id)) b[slot] = slot + " value " + salt;
  return b;
}

}  // namespace

TEST_SUITE("prompts") {
  TEST_CASE("declared slots per template") {
    using S = std::vector<std::string>;
    CHECK(template_slots(TemplateId::router) == S{"your_query"});
    CHECK(template_slots(TemplateId::decomposer) == S{"your_query"});
    CHECK(template_slots(TemplateId::refiner) == S{"your_query", "your_thought"});
    CHECK(template_slots(TemplateId::relevance) == S{"your_query", "your_doc"});
    CHECK(template_slots(TemplateId::generator) == S{"your_query", "your_doc_list"});
    CHECK(template_slots(TemplateId::single_qa_gen) == S{"your_title", "your_doc"});
    CHECK(template_slots(TemplateId::compound_compose) == S{"simple_questions"});
    CHECK(template_slots(TemplateId::ending) == S{"your_query", "your_thought"});
  }

  TEST_CASE("router prompt ends with the query") {
    const auto p = render_prompt(TemplateId::router, {{"your_query", "Who is the first President of America?"}});
    CHECK(ends_with(p, "Query: Who is the first President of America?\nAnswer:"));
    CHECK(p.find("You only need to give the type of question") != std::string::npos);
  }

  TEST_CASE("refiner with an empty trace shows nothing") {
    const std::vector<ThoughtStep> none;
    const auto p = render_prompt(TemplateId::refiner,
                                 {{"your_query", "Who is the first President of America?"},
                                  {"your_thought", render_thought(none)}});
    CHECK(p.find("Thought: \n```\nnothing\n```") != std::string::npos);
    CHECK(p.find("help me refine the seed question") != std::string::npos);
  }

  TEST_CASE("generator with zero docs") {
    const std::vector<std::string> none;
    const auto p = render_prompt(TemplateId::generator,
                                 {{"your_query", "When was Pan Jianwei born?"}, {"your_doc_list", render_doc_list(none)}});
    CHECK(ends_with(p, "Question: When was Pan Jianwei born?\n\nAnswer:"));
  }

  TEST_CASE("template bodies carry their instructions") {
    CHECK(std::string(template_body(TemplateId::decomposer)).find("Your output must be in json format") !=
          std::string::npos);
    CHECK(std::string(template_body(TemplateId::relevance)).find("You can only output true or false") !=
          std::string::npos);
    CHECK(std::string(template_body(TemplateId::generator)).find("in the most concise language") !=
          std::string::npos);
    CHECK(std::string(template_body(TemplateId::compound_compose)).find("combine them into a compound question") !=
          std::string::npos);
    CHECK(std::string(template_body(TemplateId::ending)).find("yes or no") != std::string::npos);
  }

  TEST_CASE("doc list rendering") {
    const std::vector<std::string> docs{"alpha text", "beta text"};
    CHECK(render_doc_list(docs) == "Doc1: ```alpha text```\nDoc2: ```beta text```");
    CHECK(parse_doc_list(render_doc_list(docs)) == docs);
    CHECK(parse_doc_list("").empty());
  }

  TEST_CASE("thought rendering") {
    const std::vector<ThoughtStep> steps{{"Who is the husband of Queen Hyojeong?", "Heonjong of Joseon"},
                                         {"Who is the father of Heonjong of Joseon?", "Crown Prince Hyomyeong"}};
    const auto r = render_thought(steps);
    CHECK(r ==
          "**seed query-1**: Who is the husband of Queen Hyojeong?\n**answer-1**: Heonjong of Joseon\n"
          "**seed query-2**: Who is the father of Heonjong of Joseon?\n**answer-2**: Crown Prince Hyomyeong");
    const auto back = parse_thought(r);
    REQUIRE(back.size() == 2);
    CHECK(back[1].seed == steps[1].seed);
    CHECK(back[1].answer == steps[1].answer);
    CHECK(parse_thought("nothing").empty());
  }

  TEST_CASE("simple question list") {
    const std::vector<std::string> qs{"When was it founded?", "Who owns it?"};
    CHECK(render_simple_questions(qs) == "Simple Question1: ```When was it founded?```\nSimple Question2: ```Who owns it?```");
    CHECK(parse_simple_questions(render_simple_questions(qs)) == qs);
  }

  TEST_CASE("missing slot and unknown template") {
    try {
      (void)render_prompt(TemplateId::relevance, {{"your_query", "q"}});
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("your_doc") != std::string::npos);
    }
    CHECK_THROWS_AS((void)render_prompt("no_such_template", {}), Error);
    CHECK_THROWS_AS(parse_template_id("nope"), Error);
    CHECK(render_prompt("router", {{"your_query", "x"}}) == render_prompt(TemplateId::router, {{"your_query", "x"}}));
  }

  TEST_CASE("render then match recovers template and bindings") {
    for (int salt = 0; salt < 5; ++salt) {
      for (auto id : all_templates()) {
        const Bindings b = bind_all(id, std::to_string(salt));
        const auto m = match_prompt(render_prompt(id, b));
        REQUIRE(m.has_value());
        CHECK(m->id == id);
        for (const auto& [k, v] : b) CHECK(m->bindings.at(k) == v);
      }
    }
    CHECK_FALSE(match_prompt("just some text").has_value());
  }

  TEST_CASE("rendering is injective in the bindings") {
    std::mt19937_64 rng(99);
    for (auto id : all_templates()) {
      std::set<Bindings> inputs;
      std::set<std::string> prompts;
      for (int i = 0; i < 50; ++i) {
        Bindings b;
        for (const auto& slot : template_slots(id)) b[slot] = slot + "-" + std::to_string(rng() % 1000);
        if (!inputs.insert(b).second) continue;
        CHECK(prompts.insert(render_prompt(id, b)).second);
      }
    }
  }
}
