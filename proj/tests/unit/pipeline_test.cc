#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "oracles.h"
#include "tkgqa/dumps.h"
#include "tkgqa/error.h"
#include "tkgqa/io.h"
#include "tkgqa/pipeline.h"
#include "tkgqa/subgraph_retrieval.h"

namespace tkgqa {
namespace {

using namespace tkgqa::testing;
namespace fs = std::filesystem;

RetrievedSubgraph weicker_subgraph(const TkgStore& s) {
  RetrievedSubgraph g;
  g.question_uid = "w1";
  g.relations = {*s.find_relation("position held")};
  g.constraint = TemporalConstraint::after(*s.find_time("1995"));
  for (const auto& f : s.facts()) {
    if (s.entity_label(f.object) == "Governor of Connecticut" && idx(f.t_start) >= idx(*s.find_time("1995"))) {
      g.facts.push_back(f);
    }
  }
  g.time_fallback = true;
  return g;
}

TEST(Dumps, RetrievalRecordRoundTrip) {
  const auto s = weicker_store();
  const auto g = weicker_subgraph(s);
  const auto back = parse_retrieval_record(retrieval_record(g, s), s);
  EXPECT_EQ(back.question_uid, g.question_uid);
  EXPECT_EQ(back.facts, g.facts);
  EXPECT_EQ(back.relations, g.relations);
  EXPECT_EQ(back.constraint, g.constraint);
  EXPECT_EQ(back.time_fallback, true);
  EXPECT_EQ(back.relation_fallback, false);
  EXPECT_EQ(back.empty, false);
}

TEST(Dumps, RetrievalFileRoundTripKeepsOrder) {
  const auto s = weicker_store();
  auto a = weicker_subgraph(s);
  RetrievedSubgraph b;
  b.question_uid = "empty";
  b.empty = true;
  const std::vector<RetrievedSubgraph> all = {b, a};
  const auto path = binary_path("tmp/retrieval.jsonl");
  write_retrieval_dump(path, all, s);
  const auto back = read_retrieval_dump(path, s);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].question_uid, "empty");
  EXPECT_TRUE(back[0].empty);
  EXPECT_EQ(back[1].facts, a.facts);
}

TEST(Dumps, IndicatorRecordRoundTripAtFloatPrecision) {
  const auto s = weicker_store();
  IndicatorRecord r{weicker_subgraph(s), {}};
  Rng rng(1);
  for (Vector* v : {&r.indicators.h_sub, &r.indicators.h_rel, &r.indicators.h_obj,
                    &r.indicators.v_sub, &r.indicators.v_rel, &r.indicators.v_obj}) {
    v->resize(6);
    for (Eigen::Index i = 0; i < 6; ++i) (*v)(i) = static_cast<float>(rng.uniform(-2, 2));
  }
  r.indicators.t_min = *s.find_time("1995");
  r.indicators.t_max = *s.find_time("2011");
  const auto back = parse_indicator_record(indicator_record(r, s), s);
  EXPECT_EQ(back.indicators.h_sub, r.indicators.h_sub);
  EXPECT_EQ(back.indicators.v_obj, r.indicators.v_obj);
  EXPECT_EQ(back.indicators.t_min, r.indicators.t_min);
  EXPECT_EQ(back.indicators.t_max, r.indicators.t_max);
  EXPECT_EQ(back.subgraph.facts, r.subgraph.facts);
}

TEST(Dumps, PromptRecordRebuildsBundle) {
  const auto s = weicker_store();
  const auto q = weicker_question(s);
  const PromptRecord r{"w1", render_instruction(q, weicker_subgraph(s).facts, std::nullopt, s)};
  const auto back = parse_prompt_record(prompt_record(r));
  EXPECT_EQ(back.uid, "w1");
  EXPECT_EQ(back.bundle.template_id, TemplateId::kInstruction);
  EXPECT_EQ(back.bundle.messages, r.bundle.messages);
  EXPECT_EQ(back.bundle.substitutions, r.bundle.substitutions);
}

TEST(Dumps, PredictionFileRoundTrip) {
  const std::vector<PredictionRecord> recs = {{"a", {"x", "y"}}, {"b", {}}};
  const auto path = binary_path("tmp/predictions.jsonl");
  write_prediction_dump(path, recs);
  const auto back = read_prediction_dump(path);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].predictions, recs[0].predictions);
  EXPECT_EQ(back[1].uid, "b");
}

TEST(Dumps, MalformedLineNamesFile) {
  const auto s = weicker_store();
  const auto path = binary_path("tmp/bad_retrieval.jsonl");
  write_file(path, "{\"uid\": 3}\n");
  try {
    read_retrieval_dump(path, s);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("bad_retrieval.jsonl:1"), std::string::npos) << e.what();
  }
}

TEST(RunConfig, ValidateListsEveryBadField) {
  RunConfig c = desk_config(binary_path("tmp/unused"));
  c.dim = 0;
  c.pool = "sum";
  c.lr = -1.0;
  try {
    c.validate();
    FAIL();
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    for (const char* field : {"dim", "pool", "lr"}) {
      EXPECT_NE(msg.find(field), std::string::npos) << field << " missing from: " << msg;
    }
  }
  EXPECT_NO_THROW(desk_config(binary_path("tmp/unused")).validate());
}

TEST(Stages, NamesRoundTrip) {
  for (auto st : {Stage::kBuildKg, Stage::kPretrainBase, Stage::kPretrainTgnn, Stage::kRetrieve,
                  Stage::kBuildPrompts, Stage::kBuildIndicators, Stage::kTrainHead, Stage::kPredict,
                  Stage::kEvaluate, Stage::kEndToEnd}) {
    EXPECT_EQ(stage_from_string(to_string(st)), st);
  }
  EXPECT_THROW(stage_from_string("fly"), ValidationError);
}

TEST(Pipeline, MissingArtifactIsNamed) {
  const fs::path dir = binary_path("tmp/empty_run");
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ostringstream log;
  try {
    run_stage(Stage::kPredict, desk_config(dir), log);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find(dir.string()), std::string::npos) << e.what();
  }
}

TEST(Pipeline, OracleEndToEndSendsNoPrompts) {
  const fs::path dir = binary_path("tmp/pipeline_e2e");
  fs::remove_all(dir);
  OfflineClient offline;
  std::ostringstream log;
  const auto report = run_stage(Stage::kEndToEnd, desk_config(dir), log, &offline);
  ASSERT_TRUE(report.has_value());
  EXPECT_EQ(offline.calls(), 0u);
  EXPECT_GT(report->overall.count, 0u);
  const Artifacts a(dir);
  for (const auto& p : {a.kg, a.base_embeddings, a.tgnn, a.retrieval_test, a.prompts_test,
                        a.indicators_test, a.head, a.predictions, a.report, a.records}) {
    EXPECT_TRUE(fs::exists(p)) << p;
  }
}

}  // namespace
}  // namespace tkgqa
