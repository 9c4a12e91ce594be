#ifndef TKGQA_SYNTHETIC_H_
#define TKGQA_SYNTHETIC_H_

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "tkgqa/subgraph_retrieval.h"
#include "tkgqa/tkg_store.h"

namespace tkgqa {

// Patterned store: 60 people and 40 organisations, 8 relations, years
// 2000-2009 and 600 single-year facts. Each person keeps one relation and
// holds it with an early organisation for 2000-2004 and a late one for
// 2005-2009, so every (person, relation, organisation) triple repeats. An
// organisation is only ever active in one of the two halves.
TkgStore patterned_tkg();

inline constexpr std::size_t kPatternedPeople = 60;
inline constexpr std::size_t kPatternedOrgs = 40;
inline constexpr std::size_t kPatternedRelations = 8;
inline constexpr int kPatternedFirstYear = 2000;
inline constexpr std::size_t kPatternedYears = 10;

// Templated questions over the patterned store covering simple_entity,
// simple_time, before_after, first_last and time_join. Only questions whose
// oracle retrieval (lexical ranking, rule_time, `config`) returns a fact
// that carries a gold answer are kept. Uids are "q0000", "q0001", ...
std::vector<Question> patterned_questions(const TkgStore& store,
                                          const RetrievalConfig& config = {.oracle = true});

// Uniformly random store for stress tests: entities "e0000"..., relations
// built from a fixed word list, years from 1900 on, intervals up to 5 years.
TkgStore random_tkg(std::size_t num_entities, std::size_t num_relations, std::size_t num_years,
                    std::size_t num_facts, std::uint64_t seed);

// Random questions mixing explicit years (in/before/after/between), implicit
// before/after and time_join wording. Answers are taken from a random fact
// of the annotated entity; retrievability is not guaranteed.
std::vector<Question> random_questions(const TkgStore& store, std::size_t count,
                                       std::uint64_t seed);

// Seeded split into (train, test); order within each part follows uid.
std::pair<std::vector<Question>, std::vector<Question>> split_questions(
    std::vector<Question> questions, double test_fraction, std::uint64_t seed);

struct FactSplit {
  TkgStore train;
  // Expressed in train's ids, which equal the source store's ids.
  std::vector<Quadruple> heldout;
};

// Moves a seeded `fraction` of the facts out of the store. The training
// store keeps the full entity, relation and year vocabularies.
FactSplit holdout_facts(const TkgStore& store, double fraction, std::uint64_t seed);

}  // namespace tkgqa

#endif  // TKGQA_SYNTHETIC_H_
