#ifndef TKGQA_ANSWER_HEAD_H_
#define TKGQA_ANSWER_HEAD_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tkgqa/indicators.h"
#include "tkgqa/linalg.h"
#include "tkgqa/prompt_builder.h"
#include "tkgqa/tkg_store.h"

namespace tkgqa {

// Closed answer vocabulary: entities first, then timestamps.
class AnswerSpace {
 public:
  explicit AnswerSpace(const TkgStore& store);

  std::size_t size() const { return labels_.size(); }
  const std::string& label(std::size_t a) const { return labels_.at(a); }
  std::size_t num_entities() const { return num_entities_; }
  std::size_t entity_answer(EntityId e) const { return idx(e); }
  std::size_t time_answer(TimeId t) const { return num_entities_ + idx(t); }
  // Answer indices of a question's gold set.
  std::vector<std::size_t> gold(const Question& q) const;

 private:
  std::size_t num_entities_ = 0;
  std::vector<std::string> labels_;
};

// The sequence V:I:Q(:A) in structured form. The three virtual vectors come
// first, then the instruction text, the question block and optionally the
// answer; instruction + query + answer reproduces the rendered prompt.
class AssembledInput {
 public:
  static constexpr std::size_t kVirtualTokens = 3;

  const std::array<Vector, kVirtualTokens>& virtual_tokens() const { return virtual_; }
  const IndicatorSet& indicators() const { return indicators_; }
  const std::string& instruction() const { return instruction_; }
  const std::string& query() const { return query_; }
  const std::optional<std::string>& answer() const { return answer_; }
  const std::string& question_text() const { return question_text_; }
  bool training() const { return answer_.has_value(); }
  // instruction + query (+ answer).
  std::string text() const;

 private:
  friend AssembledInput assemble(const IndicatorSet&, const PromptBundle&, const Question&);
  std::array<Vector, kVirtualTokens> virtual_;
  IndicatorSet indicators_;
  std::string instruction_;
  std::string query_;
  std::optional<std::string> answer_;
  std::string question_text_;
};

// Splits a rendered instruction prompt into I, Q and A and prepends the
// projected indicators. Throws ValidationError if the indicators are not
// projected or the bundle is not an instruction prompt.
AssembledInput assemble(const IndicatorSet& indicators, const PromptBundle& instruction,
                        const Question& question);

struct HeadParams {
  std::vector<std::string> tokens;  // index 0 is the unknown token
  Matrix token_embedding;           // |tokens| x d_llm
  Matrix scoring;                   // d_llm x |answers|
  // Fixed mixing weights of [v_sub, v_rel, v_obj, mean token]; the mean.
  std::array<double, 4> combination{0.25, 0.25, 0.25, 0.25};

  std::size_t llm_dim() const { return static_cast<std::size_t>(scoring.rows()); }
  std::size_t num_answers() const { return static_cast<std::size_t>(scoring.cols()); }
  // Token ids for `text`; unknown tokens map to 0. Never empty.
  std::vector<std::size_t> encode(std::string_view text) const;
  void rebuild_index();

 private:
  std::unordered_map<std::string, std::size_t> index_;
};

inline constexpr const char* kUnknownToken = "<unk>";

// Token vocabulary from `texts` in first-occurrence order.
HeadParams init_head(std::span<const std::string> texts, std::size_t llm_dim,
                     std::size_t num_answers, std::uint64_t seed);

// feature = sum_i combination_i * [v_sub, v_rel, v_obj, mean token]_i.
Vector head_feature(const std::array<Vector, 3>& virtual_tokens, std::string_view question_text,
                    const HeadParams& params);
// softmax(scoring^T feature).
Vector score(const AssembledInput& input, const HeadParams& params);

struct HeadExample {
  AssembledInput input;
  std::vector<std::size_t> gold;  // answer indices
  std::string uid;
};

struct HeadGradients {
  Matrix token_embedding;
  Matrix scoring;
  Matrix projection;
  double loss = 0.0;
};

// Mean cross-entropy over the gold answers, with the virtual tokens
// recomputed from the example's h vectors through `proj`.
double head_loss(const HeadExample& example, const HeadParams& params, const Projection& proj);
HeadGradients head_gradients(const HeadExample& example, const HeadParams& params,
                             const Projection& proj);

struct HeadTrainConfig {
  double learning_rate = 3e-4;
  int epochs = 4;
  std::size_t batch_size = 8;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
  std::uint64_t seed = 17;
  bool train_projection = true;
};

struct HeadModel {
  HeadParams params;
  Projection projection;
};

// AdamW over the head and W_p. The dataset is put in uid order before the
// seeded shuffles, so input order does not affect the result.
HeadModel train_head(std::vector<HeadExample> dataset, HeadParams params, Projection proj,
                     const HeadTrainConfig& config, TrainStats* stats = nullptr);

// Answer indices by descending probability; ties broken by smaller index.
std::vector<std::size_t> topk_indices(const Vector& probabilities, std::size_t k);
std::vector<std::string> predict_topk(const AssembledInput& input, const HeadParams& params,
                                      const AnswerSpace& answers, std::size_t k);

void save_head(const HeadModel& model, const std::filesystem::path& path);
HeadModel load_head(const std::filesystem::path& path);

}  // namespace tkgqa

#endif  // TKGQA_ANSWER_HEAD_H_
