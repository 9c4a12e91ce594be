#ifndef TKGQA_EMBEDDINGS_H_
#define TKGQA_EMBEDDINGS_H_

#include <cstddef>
#include <cstdint>
#include <vector>

#include "tkgqa/ids.h"
#include "tkgqa/linalg.h"
#include "tkgqa/tkg_store.h"

namespace tkgqa {

// Base vectors for entities, relations and timestamps. Relations carry two
// rows each: forward rows [0, R) and independent inverse rows [R, 2R).
struct EmbeddingTable {
  std::size_t dim = 0;
  Matrix entity;
  Matrix relation;
  Matrix time;

  std::size_t num_relations() const { return static_cast<std::size_t>(relation.rows()) / 2; }
  std::size_t relation_row(RelationId r, bool inverse) const {
    return idx(r) + (inverse ? num_relations() : 0);
  }
  // Same shapes, all zeros.
  EmbeddingTable zeros_like() const;
  bool all_finite() const;
  // Throws ValidationError if shapes disagree with `store`.
  void check_compatible(const TkgStore& store) const;
};

// Entries ~ Uniform(-1/sqrt(d), 1/sqrt(d)), deterministic in `seed`.
EmbeddingTable init_random(std::size_t num_entities, std::size_t num_relations,
                           std::size_t num_times, std::size_t dim, std::uint64_t seed);
EmbeddingTable init_random(const TkgStore& store, std::size_t dim, std::uint64_t seed);

// One masked-entity query for the additive base scorer
//   score(known, r, candidate, t) = (e_known + r + t_mid) . e_candidate
// where t_mid is the mean of the start and end time rows. Subject-masking
// queries use the inverse relation row.
struct BaseQuery {
  EntityId known{};
  RelationId relation{};
  bool inverse = false;
  TimeId t_start{};
  TimeId t_end{};
  EntityId target{};
};

// Both masking directions for a fact.
BaseQuery object_query(const Quadruple& fact);
BaseQuery subject_query(const Quadruple& fact);

// Scores of every entity as the masked slot.
Vector base_scores(const EmbeddingTable& table, const BaseQuery& query);

// Cross-entropy -log p(target). When `grad` is non-null the exact gradient
// is added into it (shapes must match `table`).
double base_query_loss(const EmbeddingTable& table, const BaseQuery& query,
                       EmbeddingTable* grad = nullptr);

struct BasePretrainConfig {
  double learning_rate = 0.1;
  int epochs = 1;
  std::size_t batch_size = 8;
  // Stop after this many optimizer steps; 0 means run all epochs.
  std::size_t max_steps = 0;
  std::uint64_t seed = 17;
};

struct TrainStats {
  // Sum of per-query losses over each completed (or partial) epoch.
  std::vector<double> epoch_loss;
  std::size_t steps = 0;
};

// Plain minibatch SGD on the masked-entity cross-entropy, both masking
// directions per fact. Throws NumericError on a non-finite loss.
EmbeddingTable pretrain_base(const TkgStore& store, EmbeddingTable table,
                             const BasePretrainConfig& config, TrainStats* stats = nullptr);

}  // namespace tkgqa

#endif  // TKGQA_EMBEDDINGS_H_
