#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "oracles.hpp"
#include "qrw/error.hpp"
#include "qrw/labeler.hpp"
#include "qrw/rewriter.hpp"

using namespace qrw;
using oracle::toks;

namespace {

using K = DiffBlock::Kind;

LabeledExample labeled(const LabelResult& r) {
  REQUIRE(std::holds_alternative<LabeledExample>(r));
  return std::get<LabeledExample>(r);
}

}  // namespace

TEST_SUITE("labeler") {

TEST_CASE("diff of a single substitution") {
  auto blocks = diff(toks({"a", "b", "c"}), toks({"a", "x", "c"}));
  REQUIRE(blocks.size() == 3);
  CHECK(blocks[0] == DiffBlock{K::kEqual, {0, 1}, {0, 1}});
  CHECK(blocks[1] == DiffBlock{K::kReplace, {1, 2}, {1, 2}});
  CHECK(blocks[2] == DiffBlock{K::kEqual, {2, 3}, {2, 3}});
}

TEST_CASE("diff of identical sequences is one equal block") {
  auto blocks = diff(toks({"a", "b"}), toks({"a", "b"}));
  REQUIRE(blocks.size() == 1);
  CHECK(blocks[0] == DiffBlock{K::kEqual, {0, 2}, {0, 2}});
}

TEST_CASE("diff finds an insertion before the question mark") {
  auto blocks = diff(toks({"graduate", "?"}), toks({"graduate", "from", "ASU", "?"}));
  REQUIRE(blocks.size() == 3);
  CHECK(blocks[1] == DiffBlock{K::kInsert, {1, 1}, {1, 3}});
}

TEST_CASE("diff agrees with the exhaustive oracle on random pairs") {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 2000; ++trial) {
    std::uniform_int_distribution<int> len(0, 12), sym(0, 3);
    std::vector<int> a(static_cast<std::size_t>(len(rng))), b(static_cast<std::size_t>(len(rng)));
    for (auto& x : a) x = sym(rng);
    for (auto& x : b) x = sym(rng);
    CHECK(diff_ids(a, b) == oracle::brute_diff(a, b));
  }
}

TEST_CASE("Mickelson example labels") {
  Example ex;
  ex.context = {toks({"Phil", "Mickelson"}),
                toks({"Mickelson", "graduated", "from", "Arizona", "State", "University"})};
  ex.question = toks({"What", "year", "did", "he", "graduate", "?"});
  ex.rewrite = toks({"What", "year", "did", "Mickelson", "graduate", "from", "Arizona", "State", "University", "?"});
  const auto lab = labeled(derive_labels(ex));
  // slot 0 is BOS, so question token k sits at slot k + 1
  CHECK(lab.tags == std::vector<Tag>{Tag::kO, Tag::kO, Tag::kO, Tag::kO, Tag::kBReplace, Tag::kBInsert, Tag::kO});
  REQUIRE(lab.queries.size() == 2);
  CHECK(lab.queries[0].question == QuestionSpan{4, 1, Action::kReplace});
  CHECK(lab.queries[0].answer == ContextSpan{1, 1});
  CHECK(lab.queries[1].question == QuestionSpan{5, 1, Action::kInsert});
  CHECK(lab.queries[1].answer == ContextSpan{4, 7});
}

TEST_CASE("identity rewrite gives all-O tags and no queries") {
  Example ex;
  ex.context = {toks({"x"})};
  ex.question = toks({"a", "b"});
  ex.rewrite = ex.question;
  const auto lab = labeled(derive_labels(ex));
  CHECK(lab.tags == std::vector<Tag>(3, Tag::kO));
  CHECK(lab.queries.empty());
}

TEST_CASE("deletions and ungroundable targets are invalid") {
  Example ex;
  ex.context = {toks({"c", "z"})};
  ex.question = toks({"a", "b", "c"});
  ex.rewrite = toks({"a", "c"});
  auto r = derive_labels(ex);
  REQUIRE(std::holds_alternative<Invalid>(r));
  CHECK(std::get<Invalid>(r).reason == Invalid::Reason::kDeleteBlock);

  ex.rewrite = toks({"a", "b", "q", "c"});
  r = derive_labels(ex);
  REQUIRE(std::holds_alternative<Invalid>(r));
  CHECK(std::get<Invalid>(r).reason == Invalid::Reason::kAnswerNotFound);
}

TEST_CASE("answer grounding takes the leftmost occurrence") {
  CHECK(find_answer(toks({"b"}), toks({"a", "b", "c", "b"})) == ContextSpan{1, 1});
  CHECK_FALSE(find_answer(toks({"x"}), toks({"a", "b"})).has_value());
  CHECK(find_answer(toks({"b", "c"}), toks({"b", "a", "b", "c"})) == ContextSpan{2, 3});
}

TEST_CASE("planted edits round-trip and tags are well formed") {
  std::mt19937_64 rng(2024);
  int valid = 0;
  for (int i = 0; i < 1500; ++i) {
    auto ex = oracle::planted_example(rng, i);
    auto r = derive_labels(ex);
    if (!std::holds_alternative<LabeledExample>(r)) continue;
    ++valid;
    const auto& lab = std::get<LabeledExample>(r);
    REQUIRE(lab.tags.size() == ex.question.size() + 1);
    CHECK(lab.tags[0] != Tag::kBReplace);
    CHECK(lab.tags[0] != Tag::kI);
    for (std::size_t k = 1; k < lab.tags.size(); ++k)
      if (lab.tags[k] == Tag::kI) CHECK((lab.tags[k - 1] == Tag::kBReplace || lab.tags[k - 1] == Tag::kI));
    CHECK(texts(apply(plan_from_labels(lab))) == texts(*ex.rewrite));
  }
  CHECK(valid >= 1000);
}

TEST_CASE("stop-word augmentation") {
  std::set<std::string> sw{"from"};
  Example ex;
  ex.id = "e";
  ex.context = {toks({"x"})};
  ex.question = toks({"graduate", "from", "ASU", "?"});
  auto out = augment(ex, sw);
  REQUIRE(out.size() == 1);
  CHECK(texts(out[0].question) == std::vector<std::string>{"graduate", "ASU", "?"});
  CHECK(out[0].id != ex.id);

  ex.question = toks({"graduate", "ASU"});
  CHECK(augment(ex, sw).empty());
}

TEST_CASE("bundled stop-word file matches the built-in list") {
  CHECK(load_stopwords(testing::resource_path("stopwords_en.txt").string()) == default_stopwords());
}

TEST_CASE("labelled lines survive a JSON round trip") {
  auto exs = load_corpus(testing::data_path("canard_fixture.jsonl"), TokenMode::kWord);
  const auto lab = labeled(derive_labels(exs.front()));
  auto back = parse_labeled_line(to_json_line(lab, TokenMode::kWord), 1, TokenMode::kWord);
  CHECK(back.tags == lab.tags);
  REQUIRE(back.queries.size() == lab.queries.size());
  for (std::size_t i = 0; i < lab.queries.size(); ++i) {
    CHECK(back.queries[i].question == lab.queries[i].question);
    CHECK(back.queries[i].answer == lab.queries[i].answer);
  }
  CHECK(texts(back.example.question) == texts(lab.example.question));
}

TEST_CASE("tag names") {
  CHECK(to_string(Tag::kBInsert) == "B_insert");
  CHECK(to_string(Tag::kBReplace) == "B_replace");
  CHECK(parse_tag("I") == Tag::kI);
  CHECK_THROWS_AS(parse_tag("B"), LabelError);
}

}
