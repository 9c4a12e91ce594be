#include <gtest/gtest.h>

#include <set>

#include "oracles.h"
#include "tkgqa/error.h"
#include "tkgqa/subgraph_retrieval.h"
#include "tkgqa/synthetic.h"

namespace tkgqa {
namespace {

using namespace tkgqa::testing;

TimeId year(const TkgStore& s, const char* y) { return *s.find_time(y); }

TEST(CandidateRelations, EntityWithTwoRelations) {
  const auto s = weicker_store();
  const auto q = walther_question(s);
  const auto rels = candidate_relations(s, q);
  ASSERT_EQ(rels.size(), 2u);
  EXPECT_EQ(s.relation_label(rels[0]), "award received");
  EXPECT_EQ(s.relation_label(rels[1]), "occupation");
}

TEST(CandidateRelations, IsolatedEntityHasNone) {
  TkgStoreBuilder b;
  b.add_fact("a", "r", "b", 2000, 2000);
  b.add_entity("lonely");
  const auto s = std::move(b).build();
  const auto q = make_question(s, "x", "lonely?", QuestionType::kSimpleEntity, {"lonely"});
  EXPECT_TRUE(candidate_relations(s, q).empty());
}

TEST(CandidateRelations, NoAnnotationsRejected) {
  const auto s = weicker_store();
  Question q;
  q.uid = "x";
  EXPECT_THROW(candidate_relations(s, q), ValidationError);
}

TEST(CandidateRelations, MatchesLinearScan) {
  const auto s = random_tkg(50, 8, 10, 400, 4);
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    Question q;
    q.uid = "t";
    for (std::size_t k = 0, n = 1 + rng.index(3); k < n; ++k) {
      q.annotated_entities.push_back(make_id<EntityId>(rng.index(s.num_entities())));
    }
    // First occurrence over annotated entities in order, each in fact order.
    std::vector<RelationId> expect;
    for (EntityId e : q.annotated_entities) {
      for (const Quadruple& f : s.facts()) {
        if ((f.subject == e || f.object == e) &&
            std::find(expect.begin(), expect.end(), f.relation) == expect.end()) {
          expect.push_back(f.relation);
        }
      }
    }
    EXPECT_EQ(candidate_relations(s, q), expect);
  }
}

TEST(Lexical, TokenOverlapF1) {
  EXPECT_EQ(tokenize("award_received, Daniel!"),
            (std::vector<std::string>{"award", "received", "daniel"}));
  EXPECT_DOUBLE_EQ(lexical_relation_score("plays_for", "Who plays for x?"), 2.0 * 1.0 * 0.5 / 1.5);
  EXPECT_DOUBLE_EQ(lexical_relation_score("spouse", "Who plays for x?"), 0.0);
}

TEST(RankRelations, WaltherPicksAwardReceived) {
  const auto s = weicker_store();
  const auto q = walther_question(s);
  const auto cands = candidate_relations(s, q);
  ScriptedClient client("['award received']");
  const auto r = rank_relations(client, q, cands, 1, s);
  ASSERT_EQ(r.relations.size(), 1u);
  EXPECT_EQ(s.relation_label(r.relations[0]), "award received");
  EXPECT_FALSE(r.fallback);
  EXPECT_EQ(client.calls(), 1u);
}

TEST(RankRelations, LargeKReturnsAllCandidates) {
  const auto s = weicker_store();
  const auto q = walther_question(s);
  const auto cands = candidate_relations(s, q);
  ScriptedClient client("['occupation', 'award received']");
  const auto r = rank_relations(client, q, cands, 5, s);
  ASSERT_EQ(r.relations.size(), 2u);
  EXPECT_EQ(s.relation_label(r.relations[0]), "occupation");
  EXPECT_EQ(s.relation_label(r.relations[1]), "award received");
}

TEST(RankRelations, GarbageFallsBackToLexical) {
  const auto s = weicker_store();
  const auto q = walther_question(s);
  const auto cands = candidate_relations(s, q);
  ScriptedClient client("I cannot help with that.");
  const auto r = rank_relations(client, q, cands, 1, s);
  EXPECT_TRUE(r.fallback);
  const auto lexical = lexical_rank(s, q, cands);
  EXPECT_EQ(r.relations, std::vector<RelationId>{lexical[0]});
}

TEST(RankRelations, AdversarialRepliesStayWithinCandidates) {
  const auto s = weicker_store();
  const auto q = walther_question(s);
  const auto cands = candidate_relations(s, q);
  for (const char* reply : {"['position held']", "['spouse', 'award received']", "[]", "[",
                            "['award received'", "[award received, occupation]",
                            "['award received', 'award received']", ""}) {
    ScriptedClient client(reply);
    const auto r = rank_relations(client, q, cands, 2, s);
    EXPECT_FALSE(r.relations.empty()) << reply;
    for (RelationId rel : r.relations) {
      EXPECT_NE(std::find(cands.begin(), cands.end(), rel), cands.end()) << reply;
    }
  }
}

TEST(RankRelations, TransportErrorCarriesUid) {
  const auto s = weicker_store();
  const auto q = walther_question(s);
  OfflineClient client;
  try {
    rank_relations(client, q, candidate_relations(s, q), 1, s);
    FAIL();
  } catch (const TransportError& e) {
    EXPECT_NE(std::string(e.what()).find("d1"), std::string::npos);
  }
}

TEST(ParseReplies, BracketLists) {
  EXPECT_EQ(*parse_bracket_list("Top 1 Answer: ['award received']"),
            std::vector<std::string>{"award received"});
  EXPECT_EQ(*parse_bracket_list("[a, b ,c]"), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_FALSE(parse_bracket_list("none").has_value());
}

TEST(ParseReplies, TimeReplies) {
  const auto s = weicker_store();
  EXPECT_EQ(*parse_time_reply("after 1995", s), TemporalConstraint::after(year(s, "1995")));
  EXPECT_EQ(*parse_time_reply("Response: before 1991", s),
            TemporalConstraint::before(year(s, "1991")));
  EXPECT_EQ(*parse_time_reply("between 2012 and 2014", s),
            TemporalConstraint::between(year(s, "2012"), year(s, "2014")));
  EXPECT_FALSE(parse_time_reply("after 1066", s).has_value());
  EXPECT_FALSE(parse_time_reply("between 2014 and 2012", s).has_value());
  EXPECT_FALSE(parse_time_reply("no idea", s).has_value());
}

TEST(MineTime, WeickerAfter1995) {
  const auto s = weicker_store();
  const auto q = weicker_question(s);
  const auto anchors = anchor_facts(s, q, {{*s.find_relation("position held")}});
  ASSERT_FALSE(anchors.empty());
  EXPECT_EQ(serialize_fact(anchors.front(), s),
            "[Lowell P. Weicker, position held, Governor of Connecticut, 1991, 1995]");
  ScriptedClient client;
  client.script(render_time_mining(q, anchors.front(), "after", s).messages, "after 1995");
  const auto r = mine_time(client, q, anchors, s);
  EXPECT_EQ(r.constraint, TemporalConstraint::after(year(s, "1995")));
  EXPECT_FALSE(r.fallback);
}

TEST(MineTime, TimeJoinBetween) {
  const auto s = weicker_store();
  const auto q = reggiana_question(s);
  const auto anchors = anchor_facts(s, q, {{*s.find_relation("member of sports team")}});
  ScriptedClient client("between 2012 and 2014");
  const auto r = mine_time(client, q, anchors, s);
  EXPECT_EQ(r.constraint, TemporalConstraint::between(year(s, "2012"), year(s, "2014")));
}

TEST(MineTime, ExplicitYear) {
  const auto s = weicker_store();
  const auto q = make_question(s, "e1", "Which team did Luca Bianchi play for in 2008?",
                               QuestionType::kSimpleEntity, {"Luca Bianchi"});
  const auto anchors = anchor_facts(s, q, {{*s.find_relation("member of sports team")}});
  ScriptedClient client("in 2008");
  EXPECT_EQ(mine_time(client, q, anchors, s).constraint, TemporalConstraint::at(year(s, "2008")));
}

TEST(MineTime, UnparseableReplyFallsBackToRule) {
  const auto s = weicker_store();
  const auto q = weicker_question(s);
  const auto anchors = anchor_facts(s, q, {{*s.find_relation("position held")}});
  ScriptedClient client("it depends");
  const auto r = mine_time(client, q, anchors, s);
  EXPECT_TRUE(r.fallback);
  EXPECT_EQ(r.constraint, rule_time(q, anchors, s));
}

TEST(MineTime, NoAnchorSendsNothing) {
  const auto s = weicker_store();
  const auto q = weicker_question(s);
  OfflineClient client;
  const auto r = mine_time(client, q, {}, s);
  EXPECT_EQ(client.calls(), 0u);
  EXPECT_EQ(r.constraint.kind, ConstraintKind::kNone);
}

TEST(RuleTime, WeickerAfter1995) {
  const auto s = weicker_store();
  const auto q = weicker_question(s);
  const auto anchors = anchor_facts(s, q, {{*s.find_relation("position held")}});
  EXPECT_EQ(rule_time(q, anchors, s), TemporalConstraint::after(year(s, "1995")));
}

TEST(RuleTime, ExplicitYearIsAt) {
  const auto s = parse_tkg("Xavier Darcos|position held|dean|1995|1998\nY|position held|dean|1997|1997\n");
  const auto q = make_question(s, "x", "Who was the dean in 1997?", QuestionType::kSimpleEntity,
                               {"dean"});
  EXPECT_EQ(rule_time(q, {}, s), TemporalConstraint::at(year(s, "1997")));
}

TEST(RuleTime, FirstLastWithoutYearIsNone) {
  const auto s = weicker_store();
  const auto q = make_question(s, "f", "Who was the first Governor of Connecticut?",
                               QuestionType::kFirstLast, {"Governor of Connecticut"});
  const auto anchors = anchor_facts(s, q, {{*s.find_relation("position held")}});
  EXPECT_EQ(rule_time(q, anchors, s).kind, ConstraintKind::kNone);
}

TEST(RuleTime, BeforeUsesAnchorStart) {
  const auto s = weicker_store();
  const auto q = make_question(s, "b", "Who held Governor of Connecticut position before Lowell P. Weicker?",
                               QuestionType::kBeforeAfter,
                               {"Lowell P. Weicker", "Governor of Connecticut"});
  const auto anchors = anchor_facts(s, q, {{*s.find_relation("position held")}});
  EXPECT_EQ(rule_time(q, anchors, s), TemporalConstraint::before(year(s, "1991")));
}

TEST(RuleTime, IsPure) {
  const auto s = weicker_store();
  const auto q = reggiana_question(s);
  const auto anchors = anchor_facts(s, q, {{*s.find_relation("member of sports team")}});
  EXPECT_EQ(rule_time(q, anchors, s), rule_time(q, anchors, s));
  EXPECT_EQ(rule_time(q, anchors, s),
            TemporalConstraint::between(year(s, "2012"), year(s, "2014")));
}

TEST(Constraint, BoundaryCasesMatchDefinition) {
  // Every interval and every constraint over a 6-year vocabulary.
  const int years = 6;
  std::vector<TemporalConstraint> cs = {TemporalConstraint::none()};
  for (int a = 0; a < years; ++a) {
    const auto ta = make_id<TimeId>(static_cast<std::size_t>(a));
    cs.push_back(TemporalConstraint::at(ta));
    cs.push_back(TemporalConstraint::before(ta));
    cs.push_back(TemporalConstraint::after(ta));
    for (int b = a; b < years; ++b) {
      cs.push_back(TemporalConstraint::between(ta, make_id<TimeId>(static_cast<std::size_t>(b))));
    }
  }
  for (int s = 0; s < years; ++s) {
    for (int e = s; e < years; ++e) {
      Quadruple f{};
      f.t_start = make_id<TimeId>(static_cast<std::size_t>(s));
      f.t_end = make_id<TimeId>(static_cast<std::size_t>(e));
      for (const auto& c : cs) EXPECT_EQ(constraint_satisfied(f, c), satisfies(f, c));
    }
  }
}

TEST(Constraint, WorkedExamples) {
  const auto s = parse_tkg(
      "a|r|b|1991|1995\na|r|c|1995|1999\nGeorge A. W.|position held|Governor of Iowa|1939|1943\n"
      "x|r|y|1945|1945\n");
  EXPECT_FALSE(constraint_satisfied(s.fact(0), TemporalConstraint::after(year(s, "1995"))));
  EXPECT_TRUE(constraint_satisfied(s.fact(1), TemporalConstraint::after(year(s, "1995"))));
  EXPECT_TRUE(constraint_satisfied(s.fact(2), TemporalConstraint::none()));
  EXPECT_TRUE(constraint_satisfied(
      s.fact(2), TemporalConstraint::between(year(s, "1939"), year(s, "1945"))));
}

TEST(Constraint, MalformedRejected) {
  EXPECT_THROW((TemporalConstraint{ConstraintKind::kAt, std::nullopt, std::nullopt}.validate()),
               ValidationError);
  EXPECT_THROW(TemporalConstraint::between(make_id<TimeId>(3), make_id<TimeId>(1)).validate(),
               ValidationError);
  EXPECT_NO_THROW(TemporalConstraint::none().validate());
}

TEST(RetrieveSubgraph, WeickerSuccessors) {
  const auto s = weicker_store();
  const auto q = weicker_question(s);
  const std::vector<RelationId> rels = {*s.find_relation("position held")};
  const auto sub = retrieve_subgraph(s, q, rels, TemporalConstraint::after(year(s, "1995")));
  ASSERT_EQ(sub.facts.size(), 2u);
  EXPECT_LE(sub.facts.size(), 10u);
  EXPECT_EQ(s.entity_label(sub.facts[0].subject), "John G. Rowland");
  EXPECT_EQ(s.entity_label(sub.facts[1].subject), "Jodi Rell");
  for (const auto& f : sub.facts) {
    EXPECT_EQ(s.entity_label(f.object), "Governor of Connecticut");
    EXPECT_GT(f.t_end, year(s, "1995"));
  }
  EXPECT_FALSE(sub.empty);
  EXPECT_EQ(sub.relations, rels);
}

TEST(RetrieveSubgraph, ExcludingConstraintFlagsEmpty) {
  const auto s = weicker_store();
  const auto q = weicker_question(s);
  const std::vector<RelationId> rels = {*s.find_relation("position held")};
  const auto sub = retrieve_subgraph(s, q, rels, TemporalConstraint::after(year(s, "2015")));
  EXPECT_TRUE(sub.facts.empty());
  EXPECT_TRUE(sub.empty);
}

TEST(RetrieveSubgraph, MatchesBruteForceWithTruncation) {
  const auto s = random_tkg(30, 4, 12, 600, 8);
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    Question q;
    q.uid = "t";
    q.annotated_entities = {make_id<EntityId>(rng.index(s.num_entities()))};
    const std::vector<RelationId> rels = {make_id<RelationId>(rng.index(s.num_relations()))};
    const auto t = make_id<TimeId>(rng.index(s.num_times()));
    const TemporalConstraint c = trial % 2 ? TemporalConstraint::after(t) : TemporalConstraint::before(t);
    const std::size_t n = 1 + rng.index(6);
    auto expect = brute_force_filter(s, q.annotated_entities, rels, c);
    if (expect.size() > n) expect.resize(n);
    EXPECT_EQ(retrieve_subgraph(s, q, rels, c, n).facts, expect);
  }
}

TEST(RetrieveForQuestion, OracleModeNeedsNoClient) {
  const auto s = weicker_store();
  const auto q = weicker_question(s);
  const auto sub = retrieve_for_question(s, q, nullptr, {.oracle = true});
  EXPECT_EQ(sub.constraint, TemporalConstraint::after(year(s, "1995")));
  EXPECT_EQ(sub.facts.size(), 2u);
}

TEST(RetrieveForQuestion, LlmModeWithoutClientRejected) {
  const auto s = weicker_store();
  EXPECT_THROW(retrieve_for_question(s, weicker_question(s), nullptr, {}), ValidationError);
}

TEST(RetrieveForQuestion, UnannotatedQuestionIsEmpty) {
  const auto s = weicker_store();
  Question q;
  q.uid = "u";
  const auto sub = retrieve_for_question(s, q, nullptr, {.oracle = true});
  EXPECT_TRUE(sub.empty);
}

TEST(RetrieveAll, OrderAndThreadCountInvariant) {
  const auto s = patterned_tkg();
  const auto qs = patterned_questions(s);
  const auto one = retrieve_all(s, qs, nullptr, {.oracle = true, .jobs = 1});
  const auto four = retrieve_all(s, qs, nullptr, {.oracle = true, .jobs = 4});
  ASSERT_EQ(one.size(), qs.size());
  for (std::size_t i = 0; i < qs.size(); ++i) {
    EXPECT_EQ(one[i].question_uid, qs[i].uid);
    EXPECT_EQ(one[i].facts, four[i].facts);
  }
}

}  // namespace
}  // namespace tkgqa
