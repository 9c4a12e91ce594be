#include "tkgqa/tgnn.h"

#include <algorithm>
#include <tuple>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "tkgqa/checkpoint.h"
#include "tkgqa/error.h"
#include "tkgqa/parallel.h"

namespace tkgqa {
namespace {

constexpr std::array<char, 4> kTgnnMagic = {'T', 'G', 'N', 'N'};

Eigen::Index row(std::size_t i) { return static_cast<Eigen::Index>(i); }

Vector edge_time(const EmbeddingTable& table, const SubgraphEdge& e) {
  return 0.5 * (table.time.row(row(idx(e.time_a))) + table.time.row(row(idx(e.time_b))))
                   .transpose();
}

void add_row(std::map<std::size_t, Vector>& rows, std::size_t i, const Vector& v) {
  auto [it, inserted] = rows.try_emplace(i, v);
  if (!inserted) it->second += v;
}

}  // namespace

bool TgnnParams::all_finite() const {
  return w_message.allFinite() && w_query.allFinite() && w_key.allFinite() &&
         mlp_w.allFinite() && mlp_b.allFinite();
}

void TgnnParams::check_compatible(const EmbeddingTable& table) const {
  const auto d = row(table.dim);
  const bool ok = w_message.rows() == d && w_message.cols() == d && w_query.rows() == d &&
                  w_query.cols() == d && w_key.rows() == d && w_key.cols() == d &&
                  mlp_w.rows() == d && mlp_w.cols() == table.entity.rows() &&
                  mlp_b.size() == table.entity.rows() && layers >= 1;
  if (!ok) {
    std::ostringstream msg;
    msg << "T-GNN parameters (d=" << w_message.rows() << ", |E|=" << mlp_b.size()
        << ", layers=" << layers << ") do not match embedding table (d=" << table.dim
        << ", |E|=" << table.entity.rows() << ")";
    throw ValidationError(msg.str());
  }
}

TgnnParams init_tgnn(std::size_t dim, std::size_t num_entities, std::uint64_t seed, int layers) {
  if (dim == 0 || num_entities == 0) throw ValidationError("T-GNN needs d >= 1 and |E| >= 1");
  if (layers < 1) throw ValidationError("T-GNN layer count must be >= 1");
  const auto d = row(dim);
  TgnnParams p;
  p.layers = layers;
  p.w_message.resize(d, d);
  p.w_query.resize(d, d);
  p.w_key.resize(d, d);
  p.mlp_w.resize(d, row(num_entities));
  p.mlp_b = Vector::Zero(row(num_entities));
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  Rng rng(seed);
  fill_uniform(p.w_message, scale, rng);
  fill_uniform(p.w_query, scale, rng);
  fill_uniform(p.w_key, scale, rng);
  fill_uniform(p.mlp_w, scale, rng);
  return p;
}

std::size_t SubgraphBatch::add_node(std::optional<EntityId> entity) {
  finalized_ = false;
  nodes_.push_back(entity);
  return nodes_.size() - 1;
}

void SubgraphBatch::add_edge(const SubgraphEdge& edge) {
  finalized_ = false;
  edges_.push_back(edge);
}

void SubgraphBatch::add_fact_edges(std::size_t subject_node, std::size_t object_node,
                                   const Quadruple& fact, EdgeTime edge_time) {
  TimeId a = fact.t_start;
  TimeId b = fact.t_start;
  if (edge_time == EdgeTime::kEnd) {
    a = b = fact.t_end;
  } else if (edge_time == EdgeTime::kMean) {
    b = fact.t_end;
  }
  add_edge({subject_node, object_node, fact.relation, false, a, b});
  add_edge({object_node, subject_node, fact.relation, true, a, b});
}

void SubgraphBatch::finalize() {
  const std::size_t n = nodes_.size();
  offsets_.assign(n + 1, 0);
  for (const SubgraphEdge& e : edges_) {
    if (e.source >= n || e.target >= n) {
      throw ValidationError("subgraph edge endpoint out of range");
    }
    ++offsets_[e.target + 1];
  }
  std::partial_sum(offsets_.begin(), offsets_.end(), offsets_.begin());
  incoming_.assign(edges_.size(), 0);
  std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
  for (std::size_t k = 0; k < edges_.size(); ++k) incoming_[cursor[edges_[k].target]++] = k;
  finalized_ = true;
}

std::span<const std::size_t> SubgraphBatch::incoming(std::size_t node) const {
  if (!finalized_) throw ValidationError("subgraph batch used before finalize()");
  return std::span<const std::size_t>(incoming_).subspan(offsets_.at(node),
                                                         offsets_[node + 1] - offsets_[node]);
}

std::size_t SubgraphBatch::mask_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const auto& n) { return !n.has_value(); }));
}

std::size_t SubgraphBatch::mask_node() const {
  const std::size_t count = mask_count();
  if (count != 1) {
    throw ValidationError("subgraph must contain exactly one MASK node, found " +
                          std::to_string(count));
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!nodes_[i]) return i;
  }
  return 0;  // unreachable
}

std::optional<std::size_t> SubgraphBatch::node_of(EntityId e) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i] == e) return i;
  }
  return std::nullopt;
}

SubgraphBatch subgraph_from_facts(std::span<const Quadruple> facts, EdgeTime edge_time) {
  std::vector<EntityId> entities;
  for (const Quadruple& f : facts) {
    entities.push_back(f.subject);
    entities.push_back(f.object);
  }
  std::sort(entities.begin(), entities.end());
  entities.erase(std::unique(entities.begin(), entities.end()), entities.end());

  std::vector<Quadruple> sorted(facts.begin(), facts.end());
  std::sort(sorted.begin(), sorted.end(), [](const Quadruple& a, const Quadruple& b) {
    return std::tie(a.subject, a.relation, a.object, a.t_start, a.t_end) <
           std::tie(b.subject, b.relation, b.object, b.t_start, b.t_end);
  });
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  SubgraphBatch batch;
  for (EntityId e : entities) batch.add_node(e);
  auto node = [&](EntityId e) {
    return static_cast<std::size_t>(std::lower_bound(entities.begin(), entities.end(), e) -
                                    entities.begin());
  };
  for (const Quadruple& f : sorted) {
    batch.add_fact_edges(node(f.subject), node(f.object), f, edge_time);
  }
  batch.finalize();
  return batch;
}

SubgraphBatch masked_query_subgraph(const TkgStore& store, const Quadruple& fact, MaskSide side,
                                    std::optional<FactIndex> exclude, std::size_t max_edges,
                                    EdgeTime edge_time, Rng& rng) {
  const EntityId known = side == MaskSide::kObject ? fact.subject : fact.object;
  SubgraphBatch batch;
  std::unordered_map<std::int32_t, std::size_t> node_of;
  auto entity_node = [&](EntityId e) {
    auto [it, inserted] = node_of.try_emplace(static_cast<std::int32_t>(idx(e)), 0);
    if (inserted) it->second = batch.add_node(e);
    return it->second;
  };
  const std::size_t known_node = entity_node(known);
  const std::size_t mask = batch.add_node(std::nullopt);
  if (side == MaskSide::kObject) {
    batch.add_fact_edges(known_node, mask, fact, edge_time);
  } else {
    batch.add_fact_edges(mask, known_node, fact, edge_time);
  }

  std::vector<FactIndex> neighbourhood;
  for (FactIndex i : store.facts_by_entity(known)) {
    if (exclude && *exclude == i) continue;
    neighbourhood.push_back(i);
  }
  if (neighbourhood.size() > max_edges) {
    for (std::size_t i = 0; i < max_edges; ++i) {
      const std::size_t j = i + rng.index(neighbourhood.size() - i);
      std::swap(neighbourhood[i], neighbourhood[j]);
    }
    neighbourhood.resize(max_edges);
    std::sort(neighbourhood.begin(), neighbourhood.end());
  }
  for (FactIndex i : neighbourhood) {
    const Quadruple& f = store.fact(i);
    const std::size_t s = entity_node(f.subject);
    const std::size_t o = entity_node(f.object);
    batch.add_fact_edges(s, o, f, edge_time);
  }
  batch.finalize();
  return batch;
}

Vector message(const Vector& e, const Vector& r, const Vector& t, const TgnnParams& params) {
  const auto d = params.w_message.cols();
  if (e.size() != d || r.size() != d || t.size() != d) {
    throw ValidationError("message inputs must all have dimension " + std::to_string(d));
  }
  return params.w_message * (e + r + t);
}

std::vector<double> attention_weights(std::span<const Vector> queries,
                                      std::span<const Vector> messages,
                                      const TgnnParams& params) {
  if (messages.empty()) throw ValidationError("attention over an empty message list");
  if (queries.size() != messages.size()) {
    throw ValidationError("attention needs one query per message");
  }
  Vector u(row(messages.size()));
  for (std::size_t i = 0; i < messages.size(); ++i) {
    const double s = (params.w_query * queries[i]).dot(params.w_key * messages[i]);
    u(row(i)) = std::max(0.0, s);
  }
  const Vector alpha = softmax(u);
  return {alpha.data(), alpha.data() + alpha.size()};
}

std::vector<double> attention_weights(const Vector& query, std::span<const Vector> messages,
                                      const TgnnParams& params) {
  const std::vector<Vector> queries(messages.size(), query);
  return attention_weights(queries, messages, params);
}

Matrix initial_node_embeddings(const SubgraphBatch& batch, const EmbeddingTable& table) {
  Matrix x = Matrix::Zero(row(batch.num_nodes()), row(table.dim));
  const auto nodes = batch.nodes();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i]) x.row(row(i)) = table.entity.row(row(idx(*nodes[i])));
  }
  return x;
}

Matrix tgnn_forward(const SubgraphBatch& batch, const EmbeddingTable& table,
                    const TgnnParams& params, ForwardTrace* trace) {
  params.check_compatible(table);
  Matrix x = initial_node_embeddings(batch, table);
  const auto edges = batch.edges();
  if (trace != nullptr) trace->layers.clear();

  for (int layer = 0; layer < params.layers; ++layer) {
    LayerTrace lt;
    lt.pre.resize(edges.size());
    lt.messages.resize(edges.size());
    lt.queries.resize(edges.size());
    lt.keys.resize(edges.size());
    lt.scores.resize(edges.size());
    lt.alpha.resize(edges.size());
    for (std::size_t k = 0; k < edges.size(); ++k) {
      const SubgraphEdge& e = edges[k];
      const Vector src = x.row(row(e.source)).transpose();
      lt.pre[k] = src +
                  table.relation.row(row(table.relation_row(e.relation, e.inverse))).transpose() +
                  edge_time(table, e);
      lt.messages[k] = params.w_message * lt.pre[k];
      lt.queries[k] = params.w_query * src;
      lt.keys[k] = params.w_key * lt.messages[k];
      lt.scores[k] = lt.queries[k].dot(lt.keys[k]);
    }

    Matrix y = x;
    for (std::size_t j = 0; j < batch.num_nodes(); ++j) {
      const auto in = batch.incoming(j);
      if (in.empty()) continue;
      Vector u(row(in.size()));
      for (std::size_t n = 0; n < in.size(); ++n) u(row(n)) = std::max(0.0, lt.scores[in[n]]);
      const Vector alpha = softmax(u);
      Vector out = Vector::Zero(row(table.dim));
      for (std::size_t n = 0; n < in.size(); ++n) {
        lt.alpha[in[n]] = alpha(row(n));
        out += alpha(row(n)) * lt.messages[in[n]];
      }
      y.row(row(j)) = out.transpose();
    }
    if (trace != nullptr) {
      lt.input = std::move(x);
      trace->layers.push_back(std::move(lt));
    }
    x = std::move(y);
  }
  return x;
}

namespace {

Vector mask_logits(const Matrix& nodes, std::size_t mask, const TgnnParams& params) {
  return params.mlp_w.transpose() * nodes.row(row(mask)).transpose() + params.mlp_b;
}

}  // namespace

Vector mask_predict(const SubgraphBatch& batch, const EmbeddingTable& table,
                    const TgnnParams& params) {
  const std::size_t mask = batch.mask_node();
  return softmax(mask_logits(tgnn_forward(batch, table, params), mask, params));
}

double mask_loss(const SubgraphBatch& batch, const EmbeddingTable& table,
                 const TgnnParams& params, EntityId target) {
  const std::size_t mask = batch.mask_node();
  const Vector logits = mask_logits(tgnn_forward(batch, table, params), mask, params);
  return log_sum_exp(logits) - logits(row(idx(target)));
}

TgnnGradients TgnnGradients::zeros(const TgnnParams& params) {
  TgnnGradients g;
  g.w_message = Matrix::Zero(params.w_message.rows(), params.w_message.cols());
  g.w_query = Matrix::Zero(params.w_query.rows(), params.w_query.cols());
  g.w_key = Matrix::Zero(params.w_key.rows(), params.w_key.cols());
  g.mlp_w = Matrix::Zero(params.mlp_w.rows(), params.mlp_w.cols());
  g.mlp_b = Vector::Zero(params.mlp_b.size());
  return g;
}

void TgnnGradients::accumulate(const TgnnGradients& o) {
  w_message += o.w_message;
  w_query += o.w_query;
  w_key += o.w_key;
  mlp_w += o.mlp_w;
  mlp_b += o.mlp_b;
  for (const auto& [i, v] : o.entity) add_row(entity, i, v);
  for (const auto& [i, v] : o.relation) add_row(relation, i, v);
  for (const auto& [i, v] : o.time) add_row(time, i, v);
  loss += o.loss;
}

double TgnnGradients::squared_norm() const {
  double s = w_message.squaredNorm() + w_query.squaredNorm() + w_key.squaredNorm() +
             mlp_w.squaredNorm() + mlp_b.squaredNorm();
  for (const auto* rows : {&entity, &relation, &time}) {
    for (const auto& [i, v] : *rows) s += v.squaredNorm();
  }
  return s;
}

TgnnGradients tgnn_gradients(const SubgraphBatch& batch, const EmbeddingTable& table,
                             const TgnnParams& params, EntityId target) {
  const std::size_t mask = batch.mask_node();
  ForwardTrace trace;
  const Matrix out = tgnn_forward(batch, table, params, &trace);
  const Vector logits = mask_logits(out, mask, params);

  TgnnGradients g = TgnnGradients::zeros(params);
  g.loss = log_sum_exp(logits) - logits(row(idx(target)));

  // Decoder: logits = mlp_w^T h + b.
  Vector dlogits = softmax(logits);
  dlogits(row(idx(target))) -= 1.0;
  const Vector h = out.row(row(mask)).transpose();
  g.mlp_w = h * dlogits.transpose();
  g.mlp_b = dlogits;
  Matrix dy = Matrix::Zero(out.rows(), out.cols());
  dy.row(row(mask)) = (params.mlp_w * dlogits).transpose();

  const auto edges = batch.edges();
  for (auto layer = trace.layers.rbegin(); layer != trace.layers.rend(); ++layer) {
    const LayerTrace& lt = *layer;
    Matrix dx = Matrix::Zero(dy.rows(), dy.cols());
    std::vector<Vector> dm(edges.size(), Vector::Zero(row(table.dim)));
    for (std::size_t j = 0; j < batch.num_nodes(); ++j) {
      const auto in = batch.incoming(j);
      const Vector dyj = dy.row(row(j)).transpose();
      if (in.empty()) {
        // Identity fallback for nodes without neighbours.
        dx.row(row(j)) += dyj.transpose();
        continue;
      }
      // y_j = sum_k alpha_k m_k, alpha = softmax(relu(s)).
      std::vector<double> dalpha(in.size());
      double mean = 0.0;
      for (std::size_t n = 0; n < in.size(); ++n) {
        const std::size_t k = in[n];
        dm[k] += lt.alpha[k] * dyj;
        dalpha[n] = lt.messages[k].dot(dyj);
        mean += lt.alpha[k] * dalpha[n];
      }
      for (std::size_t n = 0; n < in.size(); ++n) {
        const std::size_t k = in[n];
        const double du = lt.alpha[k] * (dalpha[n] - mean);
        const double ds = lt.scores[k] > 0.0 ? du : 0.0;
        if (ds == 0.0) continue;
        const Vector dq = ds * lt.keys[k];
        const Vector dkey = ds * lt.queries[k];
        const auto src = row(edges[k].source);
        g.w_query.noalias() += dq * lt.input.row(src);
        dx.row(src) += (params.w_query.transpose() * dq).transpose();
        g.w_key.noalias() += dkey * lt.messages[k].transpose();
        dm[k] += params.w_key.transpose() * dkey;
      }
    }
    for (std::size_t k = 0; k < edges.size(); ++k) {
      if (dm[k].isZero(0.0)) continue;
      const SubgraphEdge& e = edges[k];
      g.w_message.noalias() += dm[k] * lt.pre[k].transpose();
      const Vector dpre = params.w_message.transpose() * dm[k];
      dx.row(row(e.source)) += dpre.transpose();
      add_row(g.relation, table.relation_row(e.relation, e.inverse), dpre);
      add_row(g.time, idx(e.time_a), 0.5 * dpre);
      add_row(g.time, idx(e.time_b), 0.5 * dpre);
    }
    dy = std::move(dx);
  }

  const auto nodes = batch.nodes();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i] && !dy.row(row(i)).isZero(0.0)) {
      add_row(g.entity, idx(*nodes[i]), dy.row(row(i)).transpose());
    }
  }
  return g;
}

namespace {

struct MaskedQuery {
  FactIndex fact;
  MaskSide side;
};

EntityId masked_target(const Quadruple& f, MaskSide side) {
  return side == MaskSide::kObject ? f.object : f.subject;
}

void apply_sparse(Matrix& m, const std::map<std::size_t, Vector>& rows, double step) {
  for (const auto& [i, v] : rows) m.row(row(i)) -= step * v.transpose();
}

}  // namespace

TgnnModel pretrain_tgnn(const TkgStore& store, EmbeddingTable table, TgnnParams params,
                        const TgnnPretrainConfig& config, TrainStats* stats) {
  if (store.empty()) throw ValidationError("cannot pre-train the T-GNN on an empty store");
  if (config.batch_size == 0) throw ValidationError("batch_size must be >= 1");
  table.check_compatible(store);
  params.check_compatible(table);

  std::vector<MaskedQuery> queries;
  queries.reserve(2 * store.size());
  for (FactIndex i = 0; i < store.size(); ++i) {
    queries.push_back({i, MaskSide::kObject});
    queries.push_back({i, MaskSide::kSubject});
  }

  Rng rng(config.seed);
  std::vector<std::size_t> order(queries.size());
  std::size_t steps = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order.begin(), order.end());
    double epoch_loss = 0.0;
    bool stop = false;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      const std::size_t n = end - begin;
      // Subgraph sampling stays on this thread so the RNG stream is fixed.
      std::vector<SubgraphBatch> batches;
      batches.reserve(n);
      for (std::size_t i = begin; i < end; ++i) {
        const MaskedQuery& q = queries[order[i]];
        batches.push_back(masked_query_subgraph(store, store.fact(q.fact), q.side, q.fact,
                                                config.max_edges, config.edge_time, rng));
      }
      std::vector<TgnnGradients> grads(n);
      parallel_for(n, config.jobs, [&](std::size_t b) {
        const MaskedQuery& q = queries[order[begin + b]];
        grads[b] = tgnn_gradients(batches[b], table, params,
                                  masked_target(store.fact(q.fact), q.side));
      });
      TgnnGradients total = TgnnGradients::zeros(params);
      for (std::size_t b = 0; b < n; ++b) {
        if (!std::isfinite(grads[b].loss)) {
          std::ostringstream msg;
          msg << "non-finite T-GNN loss at epoch " << epoch << ", step " << steps << ", fact "
              << queries[order[begin + b]].fact;
          throw NumericError(msg.str());
        }
        total.accumulate(grads[b]);
      }
      epoch_loss += total.loss;

      const double step = config.learning_rate / static_cast<double>(n);
      params.w_message -= step * total.w_message;
      params.w_query -= step * total.w_query;
      params.w_key -= step * total.w_key;
      params.mlp_w -= step * total.mlp_w;
      params.mlp_b -= step * total.mlp_b;
      if (!config.freeze_embeddings) {
        apply_sparse(table.entity, total.entity, step);
        apply_sparse(table.relation, total.relation, step);
        apply_sparse(table.time, total.time, step);
      }
      ++steps;
      if (config.max_steps != 0 && steps >= config.max_steps) {
        stop = true;
        break;
      }
    }
    if (stats != nullptr) stats->epoch_loss.push_back(epoch_loss);
    if (stop) break;
  }
  if (stats != nullptr) stats->steps = steps;
  return {std::move(table), std::move(params)};
}

double masked_hits_at_k(const TkgStore& context, std::span<const Quadruple> facts,
                        const EmbeddingTable& table, const TgnnParams& params, std::size_t k,
                        const TgnnPretrainConfig& config) {
  if (facts.empty()) throw ValidationError("no facts to evaluate");
  Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::size_t hits = 0;
  for (const Quadruple& f : facts) {
    for (MaskSide side : {MaskSide::kObject, MaskSide::kSubject}) {
      const SubgraphBatch batch = masked_query_subgraph(context, f, side, std::nullopt,
                                                        config.max_edges, config.edge_time, rng);
      const Vector p = mask_predict(batch, table, params);
      const double target = p(row(idx(masked_target(f, side))));
      std::size_t better = 0;
      for (Eigen::Index i = 0; i < p.size(); ++i) {
        if (p(i) > target) ++better;
      }
      if (better < k) ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(2 * facts.size());
}

void save_tgnn(const TgnnParams& params, const std::filesystem::path& path) {
  MatrixBundle b;
  b.magic = kTgnnMagic;
  b.dim = static_cast<std::uint32_t>(params.dim());
  Matrix bias = params.mlp_b.transpose();
  Matrix layers(1, 1);
  layers(0, 0) = params.layers;
  b.matrices = {params.w_message, params.w_query, params.w_key, params.mlp_w, bias, layers};
  write_bundle(b, path);
}

TgnnParams load_tgnn(const std::filesystem::path& path) {
  MatrixBundle b = read_bundle(path, kTgnnMagic);
  if (b.matrices.size() != 6) throw ParseError(path.string() + ": expected 6 matrices");
  TgnnParams p;
  p.w_message = std::move(b.matrices[0]);
  p.w_query = std::move(b.matrices[1]);
  p.w_key = std::move(b.matrices[2]);
  p.mlp_w = std::move(b.matrices[3]);
  p.mlp_b = b.matrices[4].row(0).transpose();
  p.layers = static_cast<int>(b.matrices[5](0, 0));
  return p;
}

}  // namespace tkgqa
