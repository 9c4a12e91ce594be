#ifndef TKGQA_SUBGRAPH_RETRIEVAL_H_
#define TKGQA_SUBGRAPH_RETRIEVAL_H_

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tkgqa/ids.h"
#include "tkgqa/llm_client.h"
#include "tkgqa/temporal_constraint.h"
#include "tkgqa/tkg_store.h"

namespace tkgqa {

inline constexpr std::size_t kDefaultTopRelations = 1;
inline constexpr std::size_t kDefaultMaxFacts = 10;

struct RetrievedSubgraph {
  std::string question_uid;
  std::vector<Quadruple> facts;
  std::vector<RelationId> relations;
  TemporalConstraint constraint;
  bool relation_fallback = false;
  bool time_fallback = false;
  bool empty = false;
};

// Relations of every fact incident to an annotated entity, deduplicated in
// first-occurrence order. Throws ValidationError without annotated entities.
std::vector<RelationId> candidate_relations(const TkgStore& store, const Question& question);

// Lowercased alphanumeric tokens; '_' and punctuation separate tokens.
std::vector<std::string> tokenize(std::string_view text);

// Token-overlap F1 between a relation label and the question text.
double lexical_relation_score(std::string_view relation_label, std::string_view question_text);

// Candidates ordered by descending lexical score; ties keep input order.
std::vector<RelationId> lexical_rank(const TkgStore& store, const Question& question,
                                     std::span<const RelationId> candidates);

struct RankResult {
  std::vector<RelationId> relations;
  bool fallback = false;
};

// Parses a bracketed list reply ("['a', 'b']"); nullopt if no list found.
std::optional<std::vector<std::string>> parse_bracket_list(std::string_view reply);

// Asks the LLM for the top-k relations. Replies that do not parse or name a
// non-candidate fall back to lexical_rank and set `fallback`. Short replies
// are completed from the lexical order. Transport failures propagate as
// TransportError carrying the question uid.
RankResult rank_relations(LlmClient& client, const Question& question,
                          std::span<const RelationId> candidates, std::size_t k,
                          const TkgStore& store, const GenerationParams& params = {});

// Facts joining the annotated entities under `relations`: facts with both
// endpoints annotated when two or more entities are annotated, otherwise
// facts touching the single entity. Sorted by (t_start, t_end).
std::vector<Quadruple> anchor_facts(const TkgStore& store, const Question& question,
                                    std::span<const RelationId> relations);

// Deterministic time oracle.
TemporalConstraint rule_time(const Question& question, std::span<const Quadruple> anchors,
                             const TkgStore& store);

// Parses "before Y", "after Y", "between Y1 and Y2" (also "in Y"/"at Y").
// Years outside the store's vocabulary make the reply unusable.
std::optional<TemporalConstraint> parse_time_reply(std::string_view reply, const TkgStore& store);

struct TimeResult {
  TemporalConstraint constraint;
  bool fallback = false;
};

// Renders the time-mining prompt with the earliest anchor as knowledge
// context and parses the reply; falls back to rule_time when it cannot.
// Without an anchor no prompt is sent and the rule result is returned.
TimeResult mine_time(LlmClient& client, const Question& question,
                     std::span<const Quadruple> anchors, const TkgStore& store,
                     const GenerationParams& params = {});

// facts_filtered over annotated entities x relations x constraint, first n.
RetrievedSubgraph retrieve_subgraph(const TkgStore& store, const Question& question,
                                    std::span<const RelationId> relations,
                                    const TemporalConstraint& constraint,
                                    std::size_t n = kDefaultMaxFacts);

struct RetrievalConfig {
  std::size_t top_k = kDefaultTopRelations;
  std::size_t max_facts = kDefaultMaxFacts;
  // Skip the LLM: lexical relation ranking and rule_time.
  bool oracle = false;
  GenerationParams generation;
  std::size_t jobs = 1;
};

// Full per-question retrieval. Questions without annotated entities or
// candidate relations yield an empty, flagged subgraph.
RetrievedSubgraph retrieve_for_question(const TkgStore& store, const Question& question,
                                        LlmClient* client, const RetrievalConfig& config);

// Runs retrieve_for_question over all questions on up to config.jobs
// workers; output order follows input order.
std::vector<RetrievedSubgraph> retrieve_all(const TkgStore& store,
                                            std::span<const Question> questions,
                                            LlmClient* client, const RetrievalConfig& config);

}  // namespace tkgqa

#endif  // TKGQA_SUBGRAPH_RETRIEVAL_H_
