#include "tkgqa/indicators.h"

#include <algorithm>
#include <tuple>
#include <cmath>

#include "tkgqa/error.h"

namespace tkgqa {
namespace {

Eigen::Index row(std::size_t i) { return static_cast<Eigen::Index>(i); }

std::vector<Quadruple> distinct_facts(std::span<const Quadruple> facts) {
  std::vector<Quadruple> out(facts.begin(), facts.end());
  auto key = [](const Quadruple& q) {
    return std::tie(q.subject, q.relation, q.object, q.t_start, q.t_end);
  };
  std::sort(out.begin(), out.end(),
            [&](const Quadruple& a, const Quadruple& b) { return key(a) < key(b); });
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

std::string_view to_string(PoolMode mode) { return mode == PoolMode::kMean ? "mean" : "max"; }

PoolMode pool_mode_from_string(std::string_view name) {
  if (name == "mean") return PoolMode::kMean;
  if (name == "max") return PoolMode::kMax;
  throw ValidationError("unknown pooling mode: " + std::string(name));
}

Vector Projection::apply(const Vector& h) const {
  if (h.size() != weight.rows()) {
    throw ValidationError("projection expects dimension " + std::to_string(weight.rows()) +
                          ", got " + std::to_string(h.size()));
  }
  return weight.transpose() * h;
}

Projection init_projection(std::size_t dim, std::size_t llm_dim, std::uint64_t seed) {
  if (dim == 0 || llm_dim == 0) throw ValidationError("projection dimensions must be >= 1");
  Projection p;
  p.weight.resize(row(dim), row(llm_dim));
  Rng rng(seed);
  fill_uniform(p.weight, 1.0 / std::sqrt(static_cast<double>(dim)), rng);
  return p;
}

bool IndicatorSet::all_finite() const {
  return h_sub.allFinite() && h_rel.allFinite() && h_obj.allFinite() && v_sub.allFinite() &&
         v_rel.allFinite() && v_obj.allFinite();
}

Vector local_pool(std::span<const Vector> vectors, PoolMode mode) {
  if (vectors.empty()) throw ValidationError("cannot pool an empty vector list");
  Vector out = vectors.front();
  for (std::size_t i = 1; i < vectors.size(); ++i) {
    if (vectors[i].size() != out.size()) throw ValidationError("pooled vectors differ in size");
    if (mode == PoolMode::kMean) {
      out += vectors[i];
    } else {
      out = out.cwiseMax(vectors[i]);
    }
  }
  if (mode == PoolMode::kMean) out /= static_cast<double>(vectors.size());
  return out;
}

Vector temporal_enhance(const Vector& h, const Vector& t_min_emb, const Vector& t_max_emb) {
  if (h.size() != t_min_emb.size() || h.size() != t_max_emb.size()) {
    throw ValidationError("temporal enhancement inputs differ in size");
  }
  return h + t_min_emb + t_max_emb;
}

std::pair<TimeId, TimeId> time_span(std::span<const Quadruple> facts) {
  if (facts.empty()) throw ValidationError("time span of an empty subgraph");
  TimeId lo = facts.front().t_start;
  TimeId hi = facts.front().t_end;
  for (const Quadruple& f : facts) {
    lo = std::min({lo, f.t_start, f.t_end});
    hi = std::max({hi, f.t_start, f.t_end});
  }
  return {lo, hi};
}

IndicatorSet build_indicators(std::span<const Quadruple> facts, const SubgraphBatch& batch,
                              const Matrix& nodes, const EmbeddingTable& table,
                              const Projection& proj, PoolMode mode) {
  if (facts.empty()) throw ValidationError("cannot build indicators for an empty subgraph");
  if (proj.in_dim() != table.dim) throw ValidationError("projection input dim must equal d");
  const auto distinct = distinct_facts(facts);

  auto node_state = [&](EntityId e) -> Vector {
    const auto n = batch.node_of(e);
    if (!n) throw ValidationError("subgraph entity missing from the T-GNN batch");
    return nodes.row(row(*n)).transpose();
  };
  std::vector<Vector> subjects, relations, objects;
  for (const Quadruple& f : distinct) {
    subjects.push_back(node_state(f.subject));
    objects.push_back(node_state(f.object));
    relations.push_back(table.relation.row(row(table.relation_row(f.relation, false))).transpose());
  }

  IndicatorSet set;
  std::tie(set.t_min, set.t_max) = time_span(distinct);
  const Vector t_min = table.time.row(row(idx(set.t_min))).transpose();
  const Vector t_max = table.time.row(row(idx(set.t_max))).transpose();
  set.h_sub = temporal_enhance(local_pool(subjects, mode), t_min, t_max);
  set.h_rel = temporal_enhance(local_pool(relations, mode), t_min, t_max);
  set.h_obj = temporal_enhance(local_pool(objects, mode), t_min, t_max);
  project_indicators(set, proj);
  return set;
}

IndicatorSet build_indicators(const RetrievedSubgraph& subgraph, const EmbeddingTable& table,
                              const TgnnParams& params, const Projection& proj, PoolMode mode,
                              EdgeTime edge_time) {
  if (subgraph.facts.empty()) {
    throw ValidationError("question " + subgraph.question_uid + ": empty subgraph");
  }
  const SubgraphBatch batch = subgraph_from_facts(subgraph.facts, edge_time);
  const Matrix nodes = tgnn_forward(batch, table, params);
  return build_indicators(subgraph.facts, batch, nodes, table, proj, mode);
}

void project_indicators(IndicatorSet& set, const Projection& proj) {
  set.v_sub = proj.apply(set.h_sub);
  set.v_rel = proj.apply(set.h_rel);
  set.v_obj = proj.apply(set.h_obj);
}

}  // namespace tkgqa
