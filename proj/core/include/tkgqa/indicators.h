#ifndef TKGQA_INDICATORS_H_
#define TKGQA_INDICATORS_H_

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "tkgqa/embeddings.h"
#include "tkgqa/linalg.h"
#include "tkgqa/subgraph_retrieval.h"
#include "tkgqa/tgnn.h"

namespace tkgqa {

enum class PoolMode { kMean, kMax };

std::string_view to_string(PoolMode mode);
PoolMode pool_mode_from_string(std::string_view name);

// Linear map from graph space (d) into the language-model input space
// (d_llm); no bias.
struct Projection {
  Matrix weight;  // d x d_llm

  std::size_t in_dim() const { return static_cast<std::size_t>(weight.rows()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(weight.cols()); }
  Vector apply(const Vector& h) const;
};

// Uniform(+-1/sqrt(d)) like the embedding tables.
Projection init_projection(std::size_t dim, std::size_t llm_dim, std::uint64_t seed);

// [SUB], [REL], [OBJ] before (h_*) and after (v_*) projection.
struct IndicatorSet {
  Vector h_sub, h_rel, h_obj;
  Vector v_sub, v_rel, v_obj;
  TimeId t_min{};
  TimeId t_max{};

  bool all_finite() const;
};

// Elementwise mean or max. Throws ValidationError on empty input.
Vector local_pool(std::span<const Vector> vectors, PoolMode mode);

// h + t_min + t_max.
Vector temporal_enhance(const Vector& h, const Vector& t_min_emb, const Vector& t_max_emb);

// Earliest and latest time over every start and end of `facts`.
std::pair<TimeId, TimeId> time_span(std::span<const Quadruple> facts);

// Pools T-GNN states of subjects and objects and base relation rows over the
// distinct facts of `facts`, enhances each with the subgraph time span and
// projects. `nodes` are the tgnn_forward outputs for `batch`.
IndicatorSet build_indicators(std::span<const Quadruple> facts, const SubgraphBatch& batch,
                              const Matrix& nodes, const EmbeddingTable& table,
                              const Projection& proj, PoolMode mode);

// Convenience: builds the subgraph batch, runs the T-GNN and pools.
IndicatorSet build_indicators(const RetrievedSubgraph& subgraph, const EmbeddingTable& table,
                              const TgnnParams& params, const Projection& proj, PoolMode mode,
                              EdgeTime edge_time = EdgeTime::kStart);

// Re-projects the h_* vectors with `proj`.
void project_indicators(IndicatorSet& set, const Projection& proj);

}  // namespace tkgqa

#endif  // TKGQA_INDICATORS_H_
