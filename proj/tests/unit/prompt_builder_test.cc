#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.h"
#include "tkgqa/error.h"
#include "tkgqa/prompt_builder.h"
#include "tkgqa/synthetic.h"

namespace tkgqa {
namespace {

using namespace tkgqa::testing;

std::vector<Quadruple> facts_of(const TkgStore& s, std::initializer_list<const char*> subjects,
                                const char* relation) {
  std::vector<Quadruple> out;
  for (const char* name : subjects) {
    for (const auto& f : s.facts()) {
      if (s.entity_label(f.subject) == name && s.relation_label(f.relation) == relation) {
        out.push_back(f);
      }
    }
  }
  return out;
}

// Set TKGQA_UPDATE_GOLDEN=1 to rewrite the files after a reviewed change.
void expect_golden(const std::string& name, const std::string& rendered) {
  const std::filesystem::path path = source_path("tests/fixtures/golden/" + name + ".txt");
  if (std::getenv("TKGQA_UPDATE_GOLDEN") != nullptr) {
    std::ofstream(path, std::ios::binary) << rendered;
  }
  std::ifstream in(path, std::ios::binary);
  ASSERT_TRUE(in) << "missing golden " << path;
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(rendered, ss.str()) << "golden " << name << " differs";
}

TEST(Golden, RelationRanking) {
  const auto s = weicker_store();
  const auto q = walther_question(s);
  const std::vector<RelationId> cands = {*s.find_relation("award received"),
                                         *s.find_relation("occupation")};
  expect_golden("relation_ranking", render_relation_ranking(q, cands, 1, s).text());
}

TEST(Golden, TimeMining) {
  const auto s = weicker_store();
  const auto q = weicker_question(s);
  const auto anchor = facts_of(s, {"Lowell P. Weicker"}, "position held").at(0);
  expect_golden("time_mining", render_time_mining(q, anchor, time_mining_type(q), s).text());
}

TEST(Golden, InstructionTrainAndInfer) {
  const auto s = weicker_store();
  const auto q = weicker_question(s);
  const auto ev = facts_of(s, {"John G. Rowland", "Jodi Rell"}, "position held");
  expect_golden("instruction_train",
                render_instruction(q, ev, std::vector<std::string>{"John G. Rowland"}, s).text());
  expect_golden("instruction_infer", render_instruction(q, ev, std::nullopt, s).text());
}

TEST(Golden, BaselineWithAndWithoutEvidence) {
  const auto s = weicker_store();
  const auto q = walther_question(s);
  expect_golden("baseline_with_evidence",
                render_baseline(q, facts_of(s, {"Daniel Walther"}, "award received"), s).text());
  expect_golden("baseline_without_evidence", render_baseline(q, std::nullopt, s).text());
}

TEST(RenderTemplate, SubstitutesEveryOccurrence) {
  EXPECT_EQ(render_template("top {k} of {k}", {{"k", "3"}}), "top 3 of 3");
  EXPECT_EQ(render_template("no placeholders", {}), "no placeholders");
}

TEST(RenderTemplate, MissingSubstitutionNamed) {
  try {
    render_template("a {x} b", {{"y", "1"}});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("x"), std::string::npos) << e.what();
  }
}

TEST(RelationRanking, KAppearsInEveryPlaceholder) {
  const auto s = weicker_store();
  const auto q = walther_question(s);
  const std::vector<RelationId> cands = {*s.find_relation("award received")};
  const auto text = render_relation_ranking(q, cands, 7, s).text();
  EXPECT_EQ(text.find("{k}"), std::string::npos);
  EXPECT_NE(text.find("Top 7 Answer:"), std::string::npos);
  EXPECT_NE(text.find("Sentence: Which was awarded to Daniel Walther in 1980?"), std::string::npos);
  EXPECT_NE(text.find("Words List: ['award received']"), std::string::npos);
}

TEST(RenderedPrompts, NoUnresolvedPlaceholders) {
  const auto s = weicker_store();
  const auto q = weicker_question(s);
  const auto ev = facts_of(s, {"John G. Rowland"}, "position held");
  for (const auto& text : {render_instruction(q, ev, std::nullopt, s).text(),
                           render_baseline(q, ev, s).text(),
                           render_time_mining(q, ev[0], "after", s).text()}) {
    for (const char* name : {"{question}", "{evidence_set}", "{answer}", "{context}", "{type}"}) {
      EXPECT_EQ(text.find(name), std::string::npos) << name;
    }
  }
}

TEST(Instruction, EvidenceOverCapRejectedAndInferResponseEmpty) {
  const auto s = patterned_tkg();
  const auto qs = patterned_questions(s);
  const std::vector<Quadruple> ev(s.facts().begin(), s.facts().begin() + 11);
  EXPECT_THROW(render_instruction(qs[0], ev, std::nullopt, s, 10), ValidationError);
  const auto text = render_instruction(qs[0], std::span(ev).first(10), std::nullopt, s, 10).text();
  std::size_t opens = 0;
  for (std::size_t p = text.find("Evidence set: "); p < text.size(); ++p) opens += text[p] == '[';
  EXPECT_EQ(opens, 11u);  // outer list plus ten facts
  EXPECT_TRUE(text.ends_with("Response:"));
}

TEST(Serialize, FactFormats) {
  const auto s = weicker_store();
  const auto f = facts_of(s, {"Lowell P. Weicker"}, "position held").at(0);
  EXPECT_EQ(serialize_fact(f, s),
            "[Lowell P. Weicker, position held, Governor of Connecticut, 1991, 1995]");
  EXPECT_EQ(serialize_fact_quoted(f, s),
            "['Lowell P. Weicker', 'position held', 'Governor of Connecticut', '1991', '1995']");
  const std::vector<std::string> labels = {"a", "b c"};
  EXPECT_EQ(serialize_label_list(labels), "['a', 'b c']");
}

TEST(Serialize, ParseFactInvertsBothStyles) {
  const auto s = random_tkg(30, 6, 12, 200, 8);
  for (const auto& f : s.facts()) {
    EXPECT_EQ(parse_fact(serialize_fact(f, s), s), f);
    EXPECT_EQ(parse_fact(serialize_fact_quoted(f, s), s), f);
  }
  const auto w = weicker_store();
  for (const auto& f : w.facts()) EXPECT_EQ(parse_fact(serialize_fact(f, w), w), f);
}

TEST(Serialize, LabelsWithSeparatorsStillParse) {
  const auto s = parse_tkg("Smith, John|works for|Acme, Inc.|2000|2001\n");
  EXPECT_EQ(parse_fact(serialize_fact(s.fact(0), s), s), s.fact(0));
}

TEST(Serialize, UnknownLabelsRejected) {
  const auto s = weicker_store();
  EXPECT_THROW(parse_fact("[Nobody, position held, Governor of Connecticut, 1991, 1995]", s),
               Error);
  EXPECT_THROW(parse_fact("not a fact", s), Error);
}

TEST(TimeMiningType, KeywordsAndTypeNames) {
  const auto s = weicker_store();
  EXPECT_EQ(time_mining_type(weicker_question(s)), "after");
  EXPECT_EQ(time_mining_type(reggiana_question(s)), "time_join");
  auto q = weicker_question(s);
  q.text = "Who held Governor of Connecticut position before Jodi Rell?";
  EXPECT_EQ(time_mining_type(q), "before");
}

TEST(AnswerLabels, EntityAndTimeAnswers) {
  const auto s = weicker_store();
  EXPECT_EQ(answer_labels(weicker_question(s), s), std::vector<std::string>{"John G. Rowland"});
  Question q;
  q.answer_type = AnswerType::kTime;
  q.gold_answers = {static_cast<std::int32_t>(idx(*s.find_time("1995")))};
  EXPECT_EQ(answer_labels(q, s), std::vector<std::string>{"1995"});
}

TEST(TemplateIds, NamesRoundTrip) {
  for (auto id : {TemplateId::kRelationRanking, TemplateId::kTimeMining, TemplateId::kInstruction,
                  TemplateId::kBaselineWithEvidence, TemplateId::kBaselineWithoutEvidence}) {
    EXPECT_EQ(template_id_from_string(to_string(id)), id);
    EXPECT_FALSE(template_text(id).empty());
  }
  EXPECT_THROW(template_id_from_string("nope"), ValidationError);
}

}  // namespace
}  // namespace tkgqa
