#ifndef TKGQA_EVALUATION_H_
#define TKGQA_EVALUATION_H_

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tkgqa/tkg_store.h"

namespace tkgqa {

// 1-based position of the first prediction found in `gold`; nullopt when
// none is. Throws ValidationError if `predictions` holds a duplicate.
std::optional<std::size_t> rank_of(std::span<const std::string> predictions,
                                   std::span<const std::string> gold);

struct RankRecord {
  std::string uid;
  QuestionType question_type = QuestionType::kSimpleEntity;
  AnswerType answer_type = AnswerType::kEntity;
  std::optional<std::size_t> rank;
  std::vector<std::string> predictions;
};

// Fraction of records with rank <= k. Throws ValidationError when empty.
double hits_at_k(std::span<const RankRecord> records, std::size_t k);

// Tab-separated generated answers: trimmed, empties dropped, first
// occurrence kept, at most 10.
std::vector<std::string> parse_generated(std::string_view text);

struct MetricCell {
  std::size_t count = 0;
  double hits1 = 0.0;
  double hits10 = 0.0;
};

struct EvalReport {
  MetricCell overall;
  MetricCell simple;
  MetricCell complex;
  MetricCell entity;
  MetricCell time;
  // Only the types present in the records.
  std::map<QuestionType, MetricCell> by_type;
  std::vector<RankRecord> records;
};

// Ranks each prediction list against the question's gold labels. Questions
// and predictions pair up by position.
std::vector<RankRecord> rank_predictions(std::span<const Question> questions,
                                         std::span<const std::vector<std::string>> predictions,
                                         const TkgStore& store);

// Aggregates records; the result does not depend on record order except for
// `records`, which is kept as given. Throws ValidationError when empty.
EvalReport make_report(std::vector<RankRecord> records);

// Table layout: one row per model line, columns Overall, question type,
// answer type, then fine types; Hits@1 block followed by Hits@10 block.
std::string format_report(const EvalReport& report, std::string_view model_name = "TempKGQA");
// One JSON object per record.
std::string records_to_jsonl(std::span<const RankRecord> records);
std::vector<RankRecord> records_from_jsonl(std::string_view text,
                                           std::string_view source_name = "<memory>");

void write_report(const EvalReport& report, const std::filesystem::path& table_path,
                  const std::filesystem::path& records_path);

}  // namespace tkgqa

#endif  // TKGQA_EVALUATION_H_
