#ifndef TKGQA_PROMPT_BUILDER_H_
#define TKGQA_PROMPT_BUILDER_H_

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tkgqa/ids.h"
#include "tkgqa/tkg_store.h"

namespace tkgqa {

struct ChatMessage {
  std::string role;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

enum class TemplateId {
  kRelationRanking,
  kTimeMining,
  kInstruction,
  kBaselineWithEvidence,
  kBaselineWithoutEvidence,
};

std::string_view to_string(TemplateId id);
TemplateId template_id_from_string(std::string_view name);

struct PromptBundle {
  TemplateId template_id = TemplateId::kRelationRanking;
  std::vector<ChatMessage> messages;
  std::map<std::string, std::string> substitutions;

  // Concatenated message contents; the rendered prompt for single-message
  // bundles.
  std::string text() const;
};

// Replaces every {name} in `tmpl`. Throws ValidationError naming the first
// placeholder without a substitution.
std::string render_template(std::string_view tmpl,
                            const std::map<std::string, std::string>& substitutions);

// Raw template texts, exposed for golden-file review.
std::string_view template_text(TemplateId id);

// "[head, relation, tail, start, end]" with surface labels.
std::string serialize_fact(const Quadruple& fact, const TkgStore& store);
// "['head', 'relation', 'tail', 'start', 'end']".
std::string serialize_fact_quoted(const Quadruple& fact, const TkgStore& store);
// Inverse of serialize_fact (either quoting style). Labels may contain ", "
// as long as the split is unambiguous against the store vocabularies.
Quadruple parse_fact(std::string_view text, const TkgStore& store);

// "['a', 'b', ...]".
std::string serialize_label_list(std::span<const std::string> labels);

// Type string shown in the time-mining prompt: "before"/"after" for
// before/after questions (by keyword), otherwise the question type name.
std::string time_mining_type(const Question& question);

PromptBundle render_relation_ranking(const Question& question,
                                     std::span<const RelationId> candidates, std::size_t k,
                                     const TkgStore& store);
PromptBundle render_time_mining(const Question& question, const Quadruple& anchor,
                                std::string_view question_type, const TkgStore& store);
// Training records pass the gold answers; inference records pass nullopt and
// leave the response empty.
PromptBundle render_instruction(const Question& question, std::span<const Quadruple> evidence,
                                const std::optional<std::vector<std::string>>& answer,
                                const TkgStore& store, std::size_t max_evidence = 10);
PromptBundle render_baseline(const Question& question,
                             const std::optional<std::vector<Quadruple>>& evidence,
                             const TkgStore& store);

// Gold answer labels for a question, in id order.
std::vector<std::string> answer_labels(const Question& question, const TkgStore& store);

}  // namespace tkgqa

#endif  // TKGQA_PROMPT_BUILDER_H_
