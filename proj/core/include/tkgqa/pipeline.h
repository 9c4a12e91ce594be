#ifndef TKGQA_PIPELINE_H_
#define TKGQA_PIPELINE_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tkgqa/evaluation.h"
#include "tkgqa/llm_client.h"

namespace tkgqa {

struct RunConfig {
  // Inputs.
  std::filesystem::path tkg;
  std::filesystem::path train_questions;
  std::filesystem::path test_questions;
  // Every stage reads and writes under this directory.
  std::filesystem::path dump_dir = "run";

  std::uint64_t seed = 17;
  std::size_t jobs = 1;

  // Graph side.
  std::size_t dim = 512;
  int layers = 1;
  double base_lr = 0.1;
  int base_epochs = 1;
  std::size_t base_max_steps = 0;
  double tgnn_lr = 0.05;
  int tgnn_epochs = 1;
  std::size_t tgnn_max_steps = 0;
  std::size_t graph_batch = 8;
  std::size_t max_edges = 64;
  std::string edge_time = "start";
  bool freeze_embeddings = false;

  // Retrieval.
  std::size_t top_k = 1;
  std::size_t max_facts = 10;
  bool oracle = false;
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model = "gpt-3.5-turbo-0613";
  double temperature = 0.0;
  int max_tokens = 256;
  int max_attempts = 4;
  int timeout_ms = 30000;
  std::size_t max_in_flight = 4;

  // Indicators and answer head.
  std::string pool = "mean";
  std::size_t llm_dim = 4096;
  double lr = 3e-4;
  int epochs = 4;
  std::size_t batch = 8;
  double weight_decay = 0.0;
  bool train_projection = true;
  std::size_t top_answers = 10;

  // Throws ValidationError listing every offending field.
  void validate() const;
  // "key = value" lines in a stable order.
  std::string describe() const;
};

enum class Stage {
  kBuildKg,
  kPretrainBase,
  kPretrainTgnn,
  kRetrieve,
  kBuildPrompts,
  kBuildIndicators,
  kTrainHead,
  kPredict,
  kEvaluate,
  kEndToEnd,
};

std::string_view to_string(Stage stage);
Stage stage_from_string(std::string_view name);

// Artifact locations under dump_dir.
struct Artifacts {
  std::filesystem::path kg, train, test;
  std::filesystem::path base_embeddings, tgnn_embeddings, tgnn;
  std::filesystem::path retrieval_train, retrieval_test;
  std::filesystem::path prompts_train, prompts_test;
  std::filesystem::path projection, indicators_train, indicators_test;
  std::filesystem::path head, predictions;
  std::filesystem::path report, records;

  explicit Artifacts(const std::filesystem::path& dump_dir);
};

// Runs one stage (kEndToEnd runs them all in order). `client` serves the
// retrieve stage when oracle mode is off; when null a RemoteClient is built
// from the config and TEMPKGQA_API_KEY. Progress goes to `log`. Returns the
// report for evaluate and e2e.
std::optional<EvalReport> run_stage(Stage stage, const RunConfig& config, std::ostream& log,
                                    LlmClient* client = nullptr);

}  // namespace tkgqa

#endif  // TKGQA_PIPELINE_H_
