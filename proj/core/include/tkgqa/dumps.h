#ifndef TKGQA_DUMPS_H_
#define TKGQA_DUMPS_H_

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tkgqa/indicators.h"
#include "tkgqa/prompt_builder.h"
#include "tkgqa/subgraph_retrieval.h"
#include "tkgqa/tkg_store.h"

namespace tkgqa {

// Retrieval dump: one JSON object per line with uid, relations (labels),
// constraint {kind, t1, t2}, facts as "s|r|o|start|end" strings and the
// relation_fallback / time_fallback / empty flags.
std::string retrieval_record(const RetrievedSubgraph& subgraph, const TkgStore& store);
RetrievedSubgraph parse_retrieval_record(std::string_view line, const TkgStore& store);

void write_retrieval_dump(const std::filesystem::path& path,
                          std::span<const RetrievedSubgraph> subgraphs, const TkgStore& store);
std::vector<RetrievedSubgraph> read_retrieval_dump(const std::filesystem::path& path,
                                                   const TkgStore& store);

// Indicator dump: the retrieval record extended with t_min/t_max labels and
// the h_* and v_* vectors as float32 arrays.
struct IndicatorRecord {
  RetrievedSubgraph subgraph;
  IndicatorSet indicators;
};

std::string indicator_record(const IndicatorRecord& record, const TkgStore& store);
IndicatorRecord parse_indicator_record(std::string_view line, const TkgStore& store);

void write_indicator_dump(const std::filesystem::path& path,
                          std::span<const IndicatorRecord> records, const TkgStore& store);
std::vector<IndicatorRecord> read_indicator_dump(const std::filesystem::path& path,
                                                 const TkgStore& store);

// Prompt dump: uid, template, messages and substitutions, enough to rebuild
// the bundle exactly.
struct PromptRecord {
  std::string uid;
  PromptBundle bundle;
};

std::string prompt_record(const PromptRecord& record);
PromptRecord parse_prompt_record(std::string_view line);

void write_prompt_dump(const std::filesystem::path& path, std::span<const PromptRecord> records);
std::vector<PromptRecord> read_prompt_dump(const std::filesystem::path& path);

// Prediction dump: uid and ranked answer labels.
struct PredictionRecord {
  std::string uid;
  std::vector<std::string> predictions;
};

void write_prediction_dump(const std::filesystem::path& path,
                           std::span<const PredictionRecord> records);
std::vector<PredictionRecord> read_prediction_dump(const std::filesystem::path& path);

}  // namespace tkgqa

#endif  // TKGQA_DUMPS_H_
