#ifndef TKGQA_TGNN_H_
#define TKGQA_TGNN_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "tkgqa/embeddings.h"
#include "tkgqa/ids.h"
#include "tkgqa/linalg.h"
#include "tkgqa/tkg_store.h"

namespace tkgqa {

// Trainable parameters of the temporal graph attention layer and its
// masked-entity decoder. The same W_m/W_q/W_k are reused by every layer.
struct TgnnParams {
  Matrix w_message;  // d x d
  Matrix w_query;    // d x d
  Matrix w_key;      // d x d
  Matrix mlp_w;      // d x |E|
  Vector mlp_b;      // |E|
  int layers = 1;

  std::size_t dim() const { return static_cast<std::size_t>(w_message.rows()); }
  std::size_t num_entities() const { return static_cast<std::size_t>(mlp_b.size()); }
  bool all_finite() const;
  void check_compatible(const EmbeddingTable& table) const;
};

// W_* ~ Uniform(+-1/sqrt(d)); decoder weights likewise; bias zero.
TgnnParams init_tgnn(std::size_t dim, std::size_t num_entities, std::uint64_t seed,
                     int layers = 1);

// Which time row(s) an interval fact contributes to its edges.
enum class EdgeTime { kStart, kEnd, kMean };

struct SubgraphEdge {
  std::size_t source = 0;
  std::size_t target = 0;
  RelationId relation{};
  bool inverse = false;
  // The edge time embedding is (T[time_a] + T[time_b]) / 2, which is T[t]
  // exactly when both are t.
  TimeId time_a{};
  TimeId time_b{};
};

// Nodes are entities or the single reserved MASK node (nullopt). Incoming
// edges are indexed per target node after finalize().
class SubgraphBatch {
 public:
  std::size_t add_node(std::optional<EntityId> entity);
  void add_edge(const SubgraphEdge& edge);
  // Adds the forward edge subject->object and the inverse edge
  // object->subject for `fact`.
  void add_fact_edges(std::size_t subject_node, std::size_t object_node, const Quadruple& fact,
                      EdgeTime edge_time);
  // Validates endpoints and builds the incoming-edge index.
  void finalize();

  std::span<const std::optional<EntityId>> nodes() const { return nodes_; }
  std::span<const SubgraphEdge> edges() const { return edges_; }
  std::size_t num_nodes() const { return nodes_.size(); }
  // Edge indices targeting `node`, in edge insertion order.
  std::span<const std::size_t> incoming(std::size_t node) const;
  std::size_t mask_count() const;
  // Index of the MASK node; throws ValidationError unless exactly one.
  std::size_t mask_node() const;
  // Node holding entity `e`, if any.
  std::optional<std::size_t> node_of(EntityId e) const;

 private:
  std::vector<std::optional<EntityId>> nodes_;
  std::vector<SubgraphEdge> edges_;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> incoming_;
  bool finalized_ = false;
};

// Distinct entities of `facts` become nodes in ascending id order; each fact
// adds a forward and an inverse edge. Edges are sorted canonically so the
// result does not depend on fact order.
SubgraphBatch subgraph_from_facts(std::span<const Quadruple> facts,
                                  EdgeTime edge_time = EdgeTime::kStart);

enum class MaskSide { kObject, kSubject };

// Pre-training subgraph for masking one side of `fact`: the unmasked entity,
// the MASK node joined to it by the fact's edges, and up to `max_edges`
// facts of the unmasked entity's 1-hop neighbourhood sampled uniformly.
// `exclude` removes the masked fact itself from the neighbourhood.
SubgraphBatch masked_query_subgraph(const TkgStore& store, const Quadruple& fact, MaskSide side,
                                    std::optional<FactIndex> exclude, std::size_t max_edges,
                                    EdgeTime edge_time, Rng& rng);

// m = W_m (e + r + t).
Vector message(const Vector& e, const Vector& r, const Vector& t, const TgnnParams& params);

// alpha = softmax(u), u_i = relu((W_q query_i)^T (W_k m_i)). The per-message
// query is the source node state of each edge.
std::vector<double> attention_weights(std::span<const Vector> queries,
                                      std::span<const Vector> messages, const TgnnParams& params);
// Same query for every message.
std::vector<double> attention_weights(const Vector& query, std::span<const Vector> messages,
                                      const TgnnParams& params);

// Per-layer intermediates kept for the backward pass.
struct LayerTrace {
  Matrix input;                  // n x d
  std::vector<Vector> pre;       // e_i + r_ij + t_ij per edge
  std::vector<Vector> messages;  // m_ij per edge
  std::vector<Vector> queries;   // W_q e_i per edge
  std::vector<Vector> keys;      // W_k m_ij per edge
  std::vector<double> scores;    // pre-relu logits per edge
  std::vector<double> alpha;     // attention per edge
};

struct ForwardTrace {
  std::vector<LayerTrace> layers;
};

// Layer-0 embeddings: entity rows, zero for MASK.
Matrix initial_node_embeddings(const SubgraphBatch& batch, const EmbeddingTable& table);

// Runs `params.layers` rounds of attention message passing. Nodes without
// incoming edges keep their previous state.
Matrix tgnn_forward(const SubgraphBatch& batch, const EmbeddingTable& table,
                    const TgnnParams& params, ForwardTrace* trace = nullptr);

// Probability over all entities for the MASK node.
Vector mask_predict(const SubgraphBatch& batch, const EmbeddingTable& table,
                    const TgnnParams& params);

// Gradients of -log p(target) for one masked query. Table gradients are
// sparse: only touched rows appear.
struct TgnnGradients {
  Matrix w_message, w_query, w_key, mlp_w;
  Vector mlp_b;
  std::map<std::size_t, Vector> entity, relation, time;
  double loss = 0.0;

  static TgnnGradients zeros(const TgnnParams& params);
  void accumulate(const TgnnGradients& other);
  double squared_norm() const;
};

double mask_loss(const SubgraphBatch& batch, const EmbeddingTable& table,
                 const TgnnParams& params, EntityId target);

TgnnGradients tgnn_gradients(const SubgraphBatch& batch, const EmbeddingTable& table,
                             const TgnnParams& params, EntityId target);

struct TgnnPretrainConfig {
  double learning_rate = 0.05;
  int epochs = 1;
  std::size_t batch_size = 8;
  std::size_t max_steps = 0;  // 0: run all epochs
  std::uint64_t seed = 17;
  std::size_t max_edges = 64;
  EdgeTime edge_time = EdgeTime::kStart;
  bool freeze_embeddings = false;
  std::size_t jobs = 1;
};

struct TgnnModel {
  EmbeddingTable table;
  TgnnParams params;
};

// SGD over both masking directions of every fact. Per-query gradients may be
// computed on `jobs` threads; they are reduced in query order so results do
// not depend on the thread count. Throws NumericError on a non-finite loss.
TgnnModel pretrain_tgnn(const TkgStore& store, EmbeddingTable table, TgnnParams params,
                        const TgnnPretrainConfig& config, TrainStats* stats = nullptr);

// Raw (unfiltered) masked-entity Hits@k over both directions of each fact in
// `facts`, with neighbourhoods drawn from `context`.
double masked_hits_at_k(const TkgStore& context, std::span<const Quadruple> facts,
                        const EmbeddingTable& table, const TgnnParams& params, std::size_t k,
                        const TgnnPretrainConfig& config);

void save_tgnn(const TgnnParams& params, const std::filesystem::path& path);
TgnnParams load_tgnn(const std::filesystem::path& path);

}  // namespace tkgqa

#endif  // TKGQA_TGNN_H_
