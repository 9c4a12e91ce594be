#include "tkgqa/embeddings.h"

#include <cmath>
#include <numeric>
#include <sstream>

#include "tkgqa/error.h"

namespace tkgqa {

EmbeddingTable EmbeddingTable::zeros_like() const {
  EmbeddingTable z;
  z.dim = dim;
  z.entity = Matrix::Zero(entity.rows(), entity.cols());
  z.relation = Matrix::Zero(relation.rows(), relation.cols());
  z.time = Matrix::Zero(time.rows(), time.cols());
  return z;
}

bool EmbeddingTable::all_finite() const {
  return entity.allFinite() && relation.allFinite() && time.allFinite();
}

void EmbeddingTable::check_compatible(const TkgStore& store) const {
  const auto d = static_cast<Eigen::Index>(dim);
  if (entity.rows() != static_cast<Eigen::Index>(store.num_entities()) ||
      relation.rows() != static_cast<Eigen::Index>(2 * store.num_relations()) ||
      time.rows() != static_cast<Eigen::Index>(store.num_times()) || entity.cols() != d ||
      relation.cols() != d || time.cols() != d) {
    std::ostringstream msg;
    msg << "embedding table shape (" << entity.rows() << ", " << relation.rows() << ", "
        << time.rows() << ") x " << dim << " does not match store vocabularies ("
        << store.num_entities() << ", 2*" << store.num_relations() << ", " << store.num_times()
        << ")";
    throw ValidationError(msg.str());
  }
}

EmbeddingTable init_random(std::size_t num_entities, std::size_t num_relations,
                           std::size_t num_times, std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw ValidationError("embedding dimension must be >= 1");
  if (num_entities == 0) throw ValidationError("entity vocabulary is empty");
  const auto d = static_cast<Eigen::Index>(dim);
  EmbeddingTable t;
  t.dim = dim;
  t.entity.resize(static_cast<Eigen::Index>(num_entities), d);
  t.relation.resize(static_cast<Eigen::Index>(2 * num_relations), d);
  t.time.resize(static_cast<Eigen::Index>(num_times), d);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  Rng rng(seed);
  fill_uniform(t.entity, scale, rng);
  fill_uniform(t.relation, scale, rng);
  fill_uniform(t.time, scale, rng);
  return t;
}

EmbeddingTable init_random(const TkgStore& store, std::size_t dim, std::uint64_t seed) {
  return init_random(store.num_entities(), store.num_relations(), store.num_times(), dim, seed);
}

BaseQuery object_query(const Quadruple& f) {
  return {f.subject, f.relation, false, f.t_start, f.t_end, f.object};
}

BaseQuery subject_query(const Quadruple& f) {
  return {f.object, f.relation, true, f.t_start, f.t_end, f.subject};
}

namespace {

Vector query_vector(const EmbeddingTable& table, const BaseQuery& q) {
  const auto rel = static_cast<Eigen::Index>(table.relation_row(q.relation, q.inverse));
  return table.entity.row(static_cast<Eigen::Index>(idx(q.known))).transpose() +
         table.relation.row(rel).transpose() +
         0.5 * (table.time.row(static_cast<Eigen::Index>(idx(q.t_start))) +
                table.time.row(static_cast<Eigen::Index>(idx(q.t_end))))
                   .transpose();
}

}  // namespace

Vector base_scores(const EmbeddingTable& table, const BaseQuery& query) {
  return table.entity * query_vector(table, query);
}

double base_query_loss(const EmbeddingTable& table, const BaseQuery& q, EmbeddingTable* grad) {
  const Vector query = query_vector(table, q);
  const Vector logits = table.entity * query;
  const auto target = static_cast<Eigen::Index>(idx(q.target));
  const double loss = log_sum_exp(logits) - logits(target);
  if (grad != nullptr) {
    Vector dlogits = softmax(logits);
    dlogits(target) -= 1.0;
    // logits = E q: dE += dlogits q^T, dq = E^T dlogits.
    grad->entity.noalias() += dlogits * query.transpose();
    const Vector dquery = table.entity.transpose() * dlogits;
    grad->entity.row(static_cast<Eigen::Index>(idx(q.known))) += dquery.transpose();
    grad->relation.row(static_cast<Eigen::Index>(table.relation_row(q.relation, q.inverse))) +=
        dquery.transpose();
    grad->time.row(static_cast<Eigen::Index>(idx(q.t_start))) += 0.5 * dquery.transpose();
    grad->time.row(static_cast<Eigen::Index>(idx(q.t_end))) += 0.5 * dquery.transpose();
  }
  return loss;
}

EmbeddingTable pretrain_base(const TkgStore& store, EmbeddingTable table,
                             const BasePretrainConfig& config, TrainStats* stats) {
  if (store.empty()) throw ValidationError("cannot pre-train on an empty store");
  if (config.batch_size == 0) throw ValidationError("batch_size must be >= 1");
  table.check_compatible(store);

  std::vector<BaseQuery> queries;
  queries.reserve(2 * store.size());
  for (const Quadruple& f : store.facts()) {
    queries.push_back(object_query(f));
    queries.push_back(subject_query(f));
  }

  Rng rng(config.seed);
  std::vector<std::size_t> order(queries.size());
  std::size_t steps = 0;
  EmbeddingTable grad = table.zeros_like();
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order.begin(), order.end());
    double epoch_loss = 0.0;
    bool stop = false;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      grad.entity.setZero();
      grad.relation.setZero();
      grad.time.setZero();
      for (std::size_t i = begin; i < end; ++i) {
        const double loss = base_query_loss(table, queries[order[i]], &grad);
        if (!std::isfinite(loss)) {
          std::ostringstream msg;
          msg << "non-finite base pre-training loss at epoch " << epoch << ", step " << steps
              << ", query " << order[i];
          throw NumericError(msg.str());
        }
        epoch_loss += loss;
      }
      const double step = config.learning_rate / static_cast<double>(end - begin);
      table.entity -= step * grad.entity;
      table.relation -= step * grad.relation;
      table.time -= step * grad.time;
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
  return table;
}

}  // namespace tkgqa
