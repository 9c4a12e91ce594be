#include <gtest/gtest.h>

#include "oracles.h"
#include "tkgqa/error.h"
#include "tkgqa/evaluation.h"
#include "tkgqa/synthetic.h"

namespace tkgqa {
namespace {

using namespace tkgqa::testing;

RankRecord rec(std::string uid, std::optional<std::size_t> rank,
               QuestionType type = QuestionType::kSimpleEntity,
               AnswerType atype = AnswerType::kEntity) {
  return {std::move(uid), type, atype, rank, {}};
}

TEST(RankOf, FirstGoldPosition) {
  const std::vector<std::string> preds = {"a", "b", "c"};
  EXPECT_EQ(rank_of(preds, std::vector<std::string>{"c"}), 3u);
  EXPECT_EQ(rank_of(preds, std::vector<std::string>{"c", "b"}), 2u);
  EXPECT_EQ(rank_of(preds, std::vector<std::string>{"z"}), std::nullopt);
  EXPECT_EQ(rank_of(std::vector<std::string>{}, std::vector<std::string>{"a"}), std::nullopt);
}

TEST(RankOf, DuplicatePredictionRejected) {
  const std::vector<std::string> preds = {"a", "b", "a"};
  EXPECT_THROW(rank_of(preds, std::vector<std::string>{"a"}), ValidationError);
}

TEST(HitsAtK, CraftedRanks) {
  const std::vector<RankRecord> r = {rec("a", 1), rec("b", 2), rec("c", 11), rec("d", std::nullopt)};
  EXPECT_EQ(hits_at_k(r, 1), 0.25);
  EXPECT_EQ(hits_at_k(r, 2), 0.5);
  EXPECT_EQ(hits_at_k(r, 10), 0.5);
  EXPECT_EQ(hits_at_k(r, 11), 0.75);
  EXPECT_THROW(hits_at_k(std::vector<RankRecord>{}, 1), ValidationError);
}

TEST(ParseGenerated, TrimDedupAndCap) {
  EXPECT_EQ(parse_generated(" a \t\tb\ta\t  \n"), (std::vector<std::string>{"a", "b"}));
  EXPECT_TRUE(parse_generated("").empty());
  std::string many;
  for (int i = 0; i < 15; ++i) many += "x" + std::to_string(i) + "\t";
  const auto got = parse_generated(many);
  ASSERT_EQ(got.size(), 10u);
  EXPECT_EQ(got.back(), "x9");
  EXPECT_EQ(parse_generated("John G. Rowland"), std::vector<std::string>{"John G. Rowland"});
}

TEST(RankPredictions, UsesGoldLabels) {
  const auto s = weicker_store();
  const std::vector<Question> qs = {weicker_question(s)};
  const std::vector<std::vector<std::string>> preds = {{"Jodi Rell", "John G. Rowland"}};
  const auto r = rank_predictions(qs, preds, s);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].rank, 2u);
  EXPECT_EQ(r[0].uid, "w1");
  EXPECT_THROW(rank_predictions(qs, std::vector<std::vector<std::string>>{}, s), ValidationError);
}

std::vector<RankRecord> random_records(Rng& rng, std::size_t n) {
  const QuestionType types[] = {QuestionType::kSimpleEntity, QuestionType::kSimpleTime,
                                QuestionType::kBeforeAfter, QuestionType::kFirstLast,
                                QuestionType::kTimeJoin};
  std::vector<RankRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto t = types[rng.index(5)];
    const auto a = t == QuestionType::kSimpleTime ? AnswerType::kTime : AnswerType::kEntity;
    const std::optional<std::size_t> rank =
        rng.index(4) == 0 ? std::nullopt : std::optional<std::size_t>(1 + rng.index(15));
    out.push_back(rec("u" + std::to_string(i), rank, t, a));
  }
  return out;
}

double weighted(std::initializer_list<MetricCell> cells, double MetricCell::*field) {
  double num = 0.0;
  std::size_t den = 0;
  for (const auto& c : cells) {
    num += c.*field * static_cast<double>(c.count);
    den += c.count;
  }
  return num / static_cast<double>(den);
}

TEST(Report, OverallIsWeightedMeanOfBreakdowns) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto rep = make_report(random_records(rng, 1 + rng.index(60)));
    for (auto field : {&MetricCell::hits1, &MetricCell::hits10}) {
      EXPECT_NEAR(weighted({rep.simple, rep.complex}, field), rep.overall.*field, 1e-12);
      EXPECT_NEAR(weighted({rep.entity, rep.time}, field), rep.overall.*field, 1e-12);
      double num = 0.0;
      std::size_t den = 0;
      for (const auto& [type, cell] : rep.by_type) {
        num += cell.*field * static_cast<double>(cell.count);
        den += cell.count;
      }
      EXPECT_EQ(den, rep.overall.count);
      EXPECT_NEAR(num / static_cast<double>(den), rep.overall.*field, 1e-12);
    }
  }
}

TEST(Report, PermutationInvariant) {
  Rng rng(4);
  auto records = random_records(rng, 40);
  const auto a = make_report(records);
  rng.shuffle(records.begin(), records.end());
  const auto b = make_report(records);
  EXPECT_EQ(a.overall.hits1, b.overall.hits1);
  EXPECT_EQ(a.overall.hits10, b.overall.hits10);
  EXPECT_EQ(format_report(a), format_report(b));
}

TEST(Report, AbsentTypesOmittedAndEmptyRejected) {
  const auto rep = make_report({rec("a", 1)});
  EXPECT_EQ(rep.by_type.size(), 1u);
  EXPECT_EQ(rep.complex.count, 0u);
  EXPECT_NE(format_report(rep).find("TempKGQA"), std::string::npos);
  EXPECT_THROW(make_report({}), ValidationError);
}

TEST(Records, JsonlRoundTrip) {
  Rng rng(5);
  auto records = random_records(rng, 20);
  records[0].predictions = {"a", "b\tc", "\"quoted\""};
  const auto back = records_from_jsonl(records_to_jsonl(records));
  ASSERT_EQ(back.size(), records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    EXPECT_EQ(back[i].uid, records[i].uid);
    EXPECT_EQ(back[i].rank, records[i].rank);
    EXPECT_EQ(back[i].question_type, records[i].question_type);
    EXPECT_EQ(back[i].answer_type, records[i].answer_type);
    EXPECT_EQ(back[i].predictions, records[i].predictions);
  }
  EXPECT_THROW(records_from_jsonl("{not json}\n", "r.jsonl"), ParseError);
}

}  // namespace
}  // namespace tkgqa
