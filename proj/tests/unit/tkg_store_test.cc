#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "oracles.h"
#include "tkgqa/error.h"
#include "tkgqa/io.h"
#include "tkgqa/synthetic.h"
#include "tkgqa/tkg_store.h"

namespace tkgqa {
namespace {

using testing::brute_force_filter;

TEST(TkgStore, ThreeFactsGiveExactVocabularySizes) {
  const auto store = parse_tkg(
      "a|knows|b|2000|2001\n"
      "b|knows|c|2001|2001\n"
      "a|likes|c|1999|2003\n");
  EXPECT_EQ(store.size(), 3u);
  EXPECT_EQ(store.num_entities(), 3u);
  EXPECT_EQ(store.num_relations(), 2u);
  EXPECT_EQ(store.num_times(), 4u);  // 1999 2000 2001 2003
}

TEST(TkgStore, WeickerLineParsesToQuadruple) {
  const auto store =
      parse_tkg("Lowell P. Weicker|position held|Governor of Connecticut|1991|1995\n");
  ASSERT_EQ(store.size(), 1u);
  const Quadruple& f = store.fact(0);
  EXPECT_EQ(store.entity_label(f.subject), "Lowell P. Weicker");
  EXPECT_EQ(store.relation_label(f.relation), "position held");
  EXPECT_EQ(store.entity_label(f.object), "Governor of Connecticut");
  EXPECT_EQ(f.t_start, *store.find_time("1991"));
  EXPECT_EQ(f.t_end, *store.find_time("1995"));
}

TEST(TkgStore, EmptyInputGivesEmptyStore) {
  const auto store = parse_tkg("");
  EXPECT_TRUE(store.empty());
  EXPECT_EQ(store.num_entities(), 0u);
  EXPECT_EQ(store.num_relations(), 0u);
  EXPECT_EQ(store.num_times(), 0u);
}

TEST(TkgStore, MalformedLineNamesLineNumber) {
  try {
    parse_tkg("a|r|b|2000|2000\n\na|r|b|2000\n", "facts.txt");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("facts.txt:3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_tkg("a|r|b|20x0|2001\n"), ParseError);
  EXPECT_THROW(parse_tkg("a|r|b|2002|2001\n"), ParseError);
  EXPECT_THROW(parse_tkg("|r|b|2000|2001\n"), ParseError);
}

TEST(TkgStore, DuplicateYearSpellingRejected) {
  EXPECT_THROW(parse_tkg("a|r|b|2000|2000\nb|r|c|02000|2001\n"), ValidationError);
}

TEST(TkgStore, TimeIdsAreChronological) {
  const auto store = parse_tkg("a|r|b|2005|2006\nb|r|c|1990|1991\n");
  EXPECT_LT(*store.find_time("1990"), *store.find_time("2005"));
  EXPECT_EQ(store.times().year(make_id<TimeId>(0)), 1990);
}

TEST(TkgStore, LabelRoundTripsForAllVocabularies) {
  const auto store = patterned_tkg();
  for (std::size_t i = 0; i < store.num_entities(); ++i) {
    const auto e = make_id<EntityId>(i);
    EXPECT_EQ(*store.find_entity(store.entity_label(e)), e);
  }
  for (std::size_t i = 0; i < store.num_relations(); ++i) {
    const auto r = make_id<RelationId>(i);
    EXPECT_EQ(*store.find_relation(store.relation_label(r)), r);
  }
  for (std::size_t i = 0; i < store.num_times(); ++i) {
    const auto t = make_id<TimeId>(i);
    EXPECT_EQ(*store.find_time(store.time_label(t)), t);
  }
}

TEST(TkgStore, EntityIndexMatchesBruteForce) {
  const auto store = random_tkg(40, 5, 12, 300, 3);
  for (std::size_t i = 0; i < store.num_entities(); ++i) {
    const auto e = make_id<EntityId>(i);
    std::vector<FactIndex> expected;
    for (std::size_t k = 0; k < store.size(); ++k) {
      if (store.fact(k).subject == e || store.fact(k).object == e) expected.push_back(k);
    }
    const auto got = store.facts_by_entity(e);
    EXPECT_EQ(std::vector<FactIndex>(got.begin(), got.end()), expected);
  }
}

TEST(TkgStore, SaveLoadRoundTrip) {
  const auto store = random_tkg(20, 4, 8, 60, 9);
  const auto path = std::filesystem::path(testing::binary_path("tmp/roundtrip_tkg.txt"));
  save_tkg(store, path);
  const auto again = load_tkg(path);
  ASSERT_EQ(again.size(), store.size());
  // Ids are reassigned on load, so compare by label.
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& a = store.fact(i);
    const auto& b = again.fact(i);
    EXPECT_EQ(again.entity_label(b.subject), store.entity_label(a.subject));
    EXPECT_EQ(again.relation_label(b.relation), store.relation_label(a.relation));
    EXPECT_EQ(again.entity_label(b.object), store.entity_label(a.object));
    EXPECT_EQ(again.time_label(b.t_start), store.time_label(a.t_start));
    EXPECT_EQ(again.time_label(b.t_end), store.time_label(a.t_end));
  }
}

TEST(TkgStore, MissingFileIsNamed) {
  try {
    load_tkg("/nonexistent/facts.txt");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/facts.txt"), std::string::npos);
  }
}

const char* kObamaFacts =
    "Obama|hold_position|President|2009|2016\n"
    "Trump|hold_position|President|2017|2020\n"
    "Biden|hold_position|President|2021|2024\n"
    "Obama|hold_position|Senator|2005|2008\n"
    "Obama|spouse|Michelle Obama|1992|2024\n";

TEST(Questions, BeforeAfterQuestionLoads) {
  const auto store = parse_tkg(kObamaFacts);
  const auto qs = parse_questions(
      R"({"uid":"q1","text":"Who held the position of president after Obama?","entities":["Obama","President"],"times":[],"qtype":"before_after","atype":"entity","answers":["Trump"]})",
      store);
  ASSERT_EQ(qs.size(), 1u);
  EXPECT_EQ(qs[0].question_type, QuestionType::kBeforeAfter);
  EXPECT_EQ(qs[0].answer_type, AnswerType::kEntity);
  ASSERT_EQ(qs[0].annotated_entities.size(), 2u);
  EXPECT_EQ(qs[0].annotated_entities[0], *store.find_entity("Obama"));
  EXPECT_EQ(qs[0].gold_answers,
            std::vector<std::int32_t>{static_cast<std::int32_t>(idx(*store.find_entity("Trump")))});
}

TEST(Questions, EmptyGoldRejected) {
  const auto store = parse_tkg(kObamaFacts);
  EXPECT_THROW(
      parse_questions(
          R"({"uid":"q1","text":"Who?","entities":["Obama"],"times":[],"qtype":"simple_entity","atype":"entity","answers":[]})",
          store),
      ValidationError);
}

TEST(Questions, UnresolvedLabelsAreListed) {
  const auto store = parse_tkg(kObamaFacts);
  try {
    parse_questions(
        R"({"uid":"q9","text":"x","entities":["Nobody"],"times":["1800"],"qtype":"simple_entity","atype":"entity","answers":["Trump"]})",
        store);
    FAIL();
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("'Nobody'"), std::string::npos) << msg;
    EXPECT_NE(msg.find("'1800'"), std::string::npos) << msg;
  }
}

TEST(Questions, FiveRecordsKeepInputOrder) {
  const auto store = parse_tkg(kObamaFacts);
  std::string text;
  for (const char* uid : {"e", "b", "d", "a", "c"}) {
    text += std::string(R"({"uid":")") + uid +
            R"(","text":"Who was president in 2009?","entities":["President"],"times":[2009],"qtype":"simple_entity","atype":"entity","answers":["Obama"]})" +
            "\n";
  }
  const auto qs = parse_questions(text, store);
  ASSERT_EQ(qs.size(), 5u);
  const std::vector<std::string> order = {qs[0].uid, qs[1].uid, qs[2].uid, qs[3].uid, qs[4].uid};
  EXPECT_EQ(order, (std::vector<std::string>{"e", "b", "d", "a", "c"}));
}

TEST(Questions, SaveLoadRoundTrip) {
  const auto store = patterned_tkg();
  const auto qs = patterned_questions(store);
  const auto path = std::filesystem::path(testing::binary_path("tmp/roundtrip_questions.jsonl"));
  save_questions(qs, store, path);
  const auto again = load_questions(path, store);
  ASSERT_EQ(again.size(), qs.size());
  for (std::size_t i = 0; i < qs.size(); ++i) {
    EXPECT_EQ(again[i].uid, qs[i].uid);
    EXPECT_EQ(again[i].text, qs[i].text);
    EXPECT_EQ(again[i].gold_answers, qs[i].gold_answers);
    EXPECT_EQ(again[i].annotated_entities, qs[i].annotated_entities);
    EXPECT_EQ(again[i].annotated_times, qs[i].annotated_times);
    EXPECT_EQ(again[i].question_type, qs[i].question_type);
  }
}

TEST(FactsFiltered, AfterKeepsOnlyLaterFacts) {
  const auto store = parse_tkg(kObamaFacts);
  const std::vector<EntityId> ents = {*store.find_entity("President")};
  const std::vector<RelationId> rels = {*store.find_relation("hold_position")};
  const auto got = facts_filtered(store, ents, rels,
                                  TemporalConstraint::after(*store.find_time("2016")));
  ASSERT_EQ(got.size(), 2u);
  EXPECT_EQ(store.entity_label(got[0].subject), "Trump");
  EXPECT_EQ(store.entity_label(got[1].subject), "Biden");
}

TEST(FactsFiltered, NoRelationsGivesNothing) {
  const auto store = parse_tkg(kObamaFacts);
  const std::vector<EntityId> ents = {*store.find_entity("Obama")};
  EXPECT_TRUE(facts_filtered(store, ents, {}, TemporalConstraint::none()).empty());
}

TEST(FactsFiltered, MatchesBruteForceOnRandomStores) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto store = random_tkg(30, 6, 15, 200, 100 + trial);
    std::vector<EntityId> ents;
    for (std::size_t k = 0, n = 1 + rng.index(3); k < n; ++k) {
      ents.push_back(make_id<EntityId>(rng.index(store.num_entities())));
    }
    std::vector<RelationId> rels;
    for (std::size_t k = 0, n = rng.index(4); k < n; ++k) {
      rels.push_back(make_id<RelationId>(rng.index(store.num_relations())));
    }
    const auto t1 = make_id<TimeId>(rng.index(store.num_times()));
    const auto t2 = make_id<TimeId>(std::max(idx(t1), rng.index(store.num_times())));
    const TemporalConstraint cs[] = {TemporalConstraint::none(), TemporalConstraint::at(t1),
                                     TemporalConstraint::before(t1), TemporalConstraint::after(t1),
                                     TemporalConstraint::between(t1, t2)};
    for (const auto& c : cs) {
      EXPECT_EQ(facts_filtered(store, ents, rels, c), brute_force_filter(store, ents, rels, c));
    }
  }
}

}  // namespace
}  // namespace tkgqa
