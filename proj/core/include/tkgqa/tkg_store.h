#ifndef TKGQA_TKG_STORE_H_
#define TKGQA_TKG_STORE_H_

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tkgqa/ids.h"
#include "tkgqa/temporal_constraint.h"

namespace tkgqa {

using FactIndex = std::size_t;

// Bidirectional label <-> dense id map. Ids are contiguous from 0 in
// insertion order.
class Vocabulary {
 public:
  // Returns the existing id for `label` or appends it.
  std::size_t intern(std::string_view label);
  // Appends `label`; throws ValidationError if it is already present.
  std::size_t add_unique(std::string_view label);

  std::optional<std::size_t> find(std::string_view label) const;
  const std::string& label(std::size_t id) const { return labels_.at(id); }
  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Year vocabulary. Ids follow chronological order, so TimeId comparisons
// are year comparisons.
class TimeVocabulary {
 public:
  TimeVocabulary() = default;
  // `years` need not be sorted or unique.
  explicit TimeVocabulary(std::vector<int> years);

  std::optional<TimeId> find(int year) const;
  std::optional<TimeId> find(std::string_view label) const;
  int year(TimeId id) const { return years_.at(idx(id)); }
  std::string label(TimeId id) const { return std::to_string(year(id)); }
  std::size_t size() const { return years_.size(); }
  const std::vector<int>& years() const { return years_; }

 private:
  std::vector<int> years_;
};

// Parses a canonical decimal year ("1991"); nullopt for anything else.
std::optional<int> parse_year(std::string_view text);

class TkgStore;

// Accumulates labelled facts; `build` assigns time ids chronologically and
// materializes the indexes.
class TkgStoreBuilder {
 public:
  void add_fact(std::string_view subject, std::string_view relation, std::string_view object,
                int start_year, int end_year);
  // Registers a label without a fact (answers or annotations that never
  // appear in a fact).
  EntityId add_entity(std::string_view label);
  RelationId add_relation(std::string_view label);
  void add_year(int year);

  TkgStore build() &&;

 private:
  struct RawFact {
    std::size_t subject, relation, object;
    int start, end;
  };
  Vocabulary entities_;
  Vocabulary relations_;
  std::vector<int> years_;
  std::vector<RawFact> facts_;
};

// Immutable in-memory temporal knowledge graph.
class TkgStore {
 public:
  TkgStore() = default;

  const Vocabulary& entities() const { return entities_; }
  const Vocabulary& relations() const { return relations_; }
  const TimeVocabulary& times() const { return times_; }

  std::size_t num_entities() const { return entities_.size(); }
  std::size_t num_relations() const { return relations_.size(); }
  std::size_t num_times() const { return times_.size(); }

  std::span<const Quadruple> facts() const { return facts_; }
  const Quadruple& fact(FactIndex i) const { return facts_.at(i); }
  std::size_t size() const { return facts_.size(); }
  bool empty() const { return facts_.empty(); }

  // Facts where `e` is subject or object, in insertion order; a self-loop
  // appears once.
  std::span<const FactIndex> facts_by_entity(EntityId e) const;
  std::span<const FactIndex> facts_by_relation(RelationId r) const;
  // All facts ordered by (t_start, t_end, insertion order).
  std::span<const FactIndex> facts_by_start() const { return by_start_; }
  // Position of each fact in facts_by_start().
  std::size_t start_rank(FactIndex i) const { return start_rank_.at(i); }

  std::optional<EntityId> find_entity(std::string_view label) const;
  std::optional<RelationId> find_relation(std::string_view label) const;
  std::optional<TimeId> find_time(std::string_view label) const { return times_.find(label); }

  const std::string& entity_label(EntityId e) const { return entities_.label(idx(e)); }
  const std::string& relation_label(RelationId r) const { return relations_.label(idx(r)); }
  std::string time_label(TimeId t) const { return times_.label(t); }

 private:
  friend class TkgStoreBuilder;

  Vocabulary entities_;
  Vocabulary relations_;
  TimeVocabulary times_;
  std::vector<Quadruple> facts_;
  std::vector<std::vector<FactIndex>> by_entity_;
  std::vector<std::vector<FactIndex>> by_relation_;
  std::vector<FactIndex> by_start_;
  std::vector<std::size_t> start_rank_;
};

// Reads the "subject|relation|object|start_year|end_year" fact format.
TkgStore load_tkg(const std::filesystem::path& path);
TkgStore parse_tkg(std::string_view text, std::string_view source_name = "<memory>");
// Writes the same format; load_tkg(save) reproduces the store.
void save_tkg(const TkgStore& store, const std::filesystem::path& path);

enum class QuestionType {
  kSimpleEntity,
  kSimpleTime,
  kBeforeAfter,
  kFirstLast,
  kTimeJoin,
  kExplicit,
  kImplicit,
  kTemporal,
  kOrdinal,
};

enum class AnswerType { kEntity, kTime };

std::string_view to_string(QuestionType t);
std::string_view to_string(AnswerType t);
QuestionType question_type_from_string(std::string_view name);
AnswerType answer_type_from_string(std::string_view name);
bool is_simple(QuestionType t);

struct Question {
  std::string uid;
  std::string text;
  std::vector<EntityId> annotated_entities;
  std::vector<TimeId> annotated_times;
  QuestionType question_type = QuestionType::kSimpleEntity;
  AnswerType answer_type = AnswerType::kEntity;
  // Ids in the vocabulary selected by answer_type, sorted and unique.
  std::vector<std::int32_t> gold_answers;
};

// One JSON object per line with keys uid, text, entities, times, qtype,
// atype, answers. Labels resolve against `store`.
std::vector<Question> load_questions(const std::filesystem::path& path, const TkgStore& store);
std::vector<Question> parse_questions(std::string_view text, const TkgStore& store,
                                      std::string_view source_name = "<memory>");
std::string question_to_json_line(const Question& q, const TkgStore& store);
void save_questions(const std::vector<Question>& questions, const TkgStore& store,
                    const std::filesystem::path& path);

// Facts touching any of `entities` whose relation is in `relations` and that
// satisfy `interval`, sorted by (t_start, t_end, insertion order).
std::vector<Quadruple> facts_filtered(const TkgStore& store, std::span<const EntityId> entities,
                                      std::span<const RelationId> relations,
                                      const TemporalConstraint& interval);

}  // namespace tkgqa

#endif  // TKGQA_TKG_STORE_H_
