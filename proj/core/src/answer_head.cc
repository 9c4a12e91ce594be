#include "tkgqa/answer_head.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "tkgqa/checkpoint.h"
#include "tkgqa/error.h"
#include "tkgqa/subgraph_retrieval.h"

namespace tkgqa {
namespace {

constexpr std::array<char, 4> kHeadMagic = {'H', 'E', 'A', 'D'};

Eigen::Index row(std::size_t i) { return static_cast<Eigen::Index>(i); }

std::array<Vector, 3> project_all(const IndicatorSet& set, const Projection& proj) {
  return {proj.apply(set.h_sub), proj.apply(set.h_rel), proj.apply(set.h_obj)};
}

Vector mean_token(const std::vector<std::size_t>& ids, const HeadParams& params) {
  Vector m = Vector::Zero(params.token_embedding.cols());
  for (std::size_t t : ids) m += params.token_embedding.row(row(t)).transpose();
  return m / static_cast<double>(ids.size());
}

}  // namespace

AnswerSpace::AnswerSpace(const TkgStore& store) : num_entities_(store.num_entities()) {
  labels_ = store.entities().labels();
  for (std::size_t t = 0; t < store.num_times(); ++t) {
    labels_.push_back(store.time_label(make_id<TimeId>(t)));
  }
}

std::vector<std::size_t> AnswerSpace::gold(const Question& q) const {
  std::vector<std::size_t> out;
  for (std::int32_t a : q.gold_answers) {
    const auto i = static_cast<std::size_t>(a);
    out.push_back(q.answer_type == AnswerType::kEntity ? i : num_entities_ + i);
  }
  return out;
}

std::string AssembledInput::text() const {
  return instruction_ + query_ + answer_.value_or(std::string());
}

AssembledInput assemble(const IndicatorSet& indicators, const PromptBundle& prompt,
                        const Question& question) {
  if (prompt.template_id != TemplateId::kInstruction) {
    throw ValidationError("assemble expects an instruction prompt");
  }
  if (indicators.v_sub.size() == 0 || indicators.v_sub.size() != indicators.v_rel.size() ||
      indicators.v_sub.size() != indicators.v_obj.size()) {
    throw ValidationError("indicators must be projected to a common d_llm before assembly");
  }
  const std::string text = prompt.text();
  const auto split = text.find("\nInput:\n");
  if (split == std::string::npos) throw ValidationError("instruction prompt lacks an Input block");
  const std::string& answer = prompt.substitutions.at("answer");
  if (text.size() < answer.size() || text.compare(text.size() - answer.size(), answer.size(),
                                                  answer) != 0) {
    throw ValidationError("instruction prompt does not end with its answer");
  }

  AssembledInput in;
  in.virtual_ = {indicators.v_sub, indicators.v_rel, indicators.v_obj};
  in.indicators_ = indicators;
  in.instruction_ = text.substr(0, split + 1);
  in.query_ = text.substr(split + 1, text.size() - answer.size() - split - 1);
  if (!answer.empty()) in.answer_ = answer;
  in.question_text_ = question.text;
  return in;
}

void HeadParams::rebuild_index() {
  index_.clear();
  for (std::size_t i = 0; i < tokens.size(); ++i) index_.emplace(tokens[i], i);
}

std::vector<std::size_t> HeadParams::encode(std::string_view text) const {
  std::vector<std::size_t> ids;
  for (const auto& tok : tokenize(text)) {
    auto it = index_.find(tok);
    ids.push_back(it == index_.end() ? 0 : it->second);
  }
  if (ids.empty()) ids.push_back(0);
  return ids;
}

HeadParams init_head(std::span<const std::string> texts, std::size_t llm_dim,
                     std::size_t num_answers, std::uint64_t seed) {
  if (llm_dim == 0 || num_answers == 0) {
    throw ValidationError("answer head needs d_llm >= 1 and a non-empty answer space");
  }
  HeadParams p;
  p.tokens.push_back(kUnknownToken);
  std::unordered_map<std::string, std::size_t> seen{{kUnknownToken, 0}};
  for (const auto& text : texts) {
    for (auto& tok : tokenize(text)) {
      if (seen.emplace(tok, p.tokens.size()).second) p.tokens.push_back(std::move(tok));
    }
  }
  p.rebuild_index();
  p.token_embedding.resize(row(p.tokens.size()), row(llm_dim));
  p.scoring.resize(row(llm_dim), row(num_answers));
  const double scale = 1.0 / std::sqrt(static_cast<double>(llm_dim));
  Rng rng(seed);
  fill_uniform(p.token_embedding, scale, rng);
  fill_uniform(p.scoring, scale, rng);
  return p;
}

Vector head_feature(const std::array<Vector, 3>& v, std::string_view question_text,
                    const HeadParams& params) {
  const auto d = row(params.llm_dim());
  for (const Vector& x : v) {
    if (x.size() != d) throw ValidationError("virtual token dimension differs from d_llm");
  }
  const auto& c = params.combination;
  return c[0] * v[0] + c[1] * v[1] + c[2] * v[2] +
         c[3] * mean_token(params.encode(question_text), params);
}

Vector score(const AssembledInput& input, const HeadParams& params) {
  const Vector f = head_feature(input.virtual_tokens(), input.question_text(), params);
  return softmax(params.scoring.transpose() * f);
}

namespace {

double gold_loss(const Vector& logits, const std::vector<std::size_t>& gold) {
  const double lse = log_sum_exp(logits);
  double loss = 0.0;
  for (std::size_t g : gold) loss += lse - logits(row(g));
  return loss / static_cast<double>(gold.size());
}

}  // namespace

double head_loss(const HeadExample& ex, const HeadParams& params, const Projection& proj) {
  if (ex.gold.empty()) throw ValidationError("example " + ex.uid + " has no gold answers");
  const auto v = project_all(ex.input.indicators(), proj);
  const Vector f = head_feature(v, ex.input.question_text(), params);
  return gold_loss(params.scoring.transpose() * f, ex.gold);
}

HeadGradients head_gradients(const HeadExample& ex, const HeadParams& params,
                             const Projection& proj) {
  if (ex.gold.empty()) throw ValidationError("example " + ex.uid + " has no gold answers");
  const IndicatorSet& ind = ex.input.indicators();
  const auto v = project_all(ind, proj);
  const auto tokens = params.encode(ex.input.question_text());
  const Vector f = head_feature(v, ex.input.question_text(), params);
  const Vector logits = params.scoring.transpose() * f;

  HeadGradients g;
  g.loss = gold_loss(logits, ex.gold);
  // d/dlogits of mean_g(-log p_g) = p - mean of one-hots.
  Vector dlogits = softmax(logits);
  const double share = 1.0 / static_cast<double>(ex.gold.size());
  for (std::size_t a : ex.gold) dlogits(row(a)) -= share;

  g.scoring = f * dlogits.transpose();
  const Vector df = params.scoring * dlogits;
  const auto& c = params.combination;
  // v = W_p^T h, so dW_p = h dv^T.
  g.projection = c[0] * ind.h_sub * df.transpose() + c[1] * ind.h_rel * df.transpose() +
                 c[2] * ind.h_obj * df.transpose();
  g.token_embedding = Matrix::Zero(params.token_embedding.rows(), params.token_embedding.cols());
  const Vector dtok = (c[3] / static_cast<double>(tokens.size())) * df;
  for (std::size_t t : tokens) g.token_embedding.row(row(t)) += dtok.transpose();
  return g;
}

namespace {

// AdamW moment buffers for one parameter matrix.
struct AdamSlot {
  Matrix m, v;

  explicit AdamSlot(const Matrix& like)
      : m(Matrix::Zero(like.rows(), like.cols())), v(Matrix::Zero(like.rows(), like.cols())) {}

  void step(Matrix& param, const Matrix& grad, const HeadTrainConfig& c, std::size_t t) {
    m = c.beta1 * m + (1.0 - c.beta1) * grad;
    v = c.beta2 * v + (1.0 - c.beta2) * grad.cwiseProduct(grad);
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(t));
    if (c.weight_decay != 0.0) param *= (1.0 - c.learning_rate * c.weight_decay);
    param.array() -= c.learning_rate * (m.array() / bc1) / ((v.array() / bc2).sqrt() + c.epsilon);
  }
};

}  // namespace

HeadModel train_head(std::vector<HeadExample> dataset, HeadParams params, Projection proj,
                     const HeadTrainConfig& config, TrainStats* stats) {
  if (dataset.empty()) throw ValidationError("cannot train the answer head on an empty dataset");
  if (config.batch_size == 0) throw ValidationError("batch_size must be >= 1");
  std::stable_sort(dataset.begin(), dataset.end(),
                   [](const HeadExample& a, const HeadExample& b) { return a.uid < b.uid; });

  AdamSlot tok_slot(params.token_embedding), score_slot(params.scoring), proj_slot(proj.weight);
  Rng rng(config.seed);
  std::vector<std::size_t> order(dataset.size());
  std::size_t t = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order.begin(), order.end());
    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      Matrix d_tok = Matrix::Zero(params.token_embedding.rows(), params.token_embedding.cols());
      Matrix d_score = Matrix::Zero(params.scoring.rows(), params.scoring.cols());
      Matrix d_proj = Matrix::Zero(proj.weight.rows(), proj.weight.cols());
      for (std::size_t i = begin; i < end; ++i) {
        const HeadGradients g = head_gradients(dataset[order[i]], params, proj);
        if (!std::isfinite(g.loss)) {
          std::ostringstream msg;
          msg << "non-finite answer-head loss at epoch " << epoch << " on example "
              << dataset[order[i]].uid;
          throw NumericError(msg.str());
        }
        epoch_loss += g.loss;
        d_tok += g.token_embedding;
        d_score += g.scoring;
        d_proj += g.projection;
      }
      const double inv = 1.0 / static_cast<double>(end - begin);
      ++t;
      tok_slot.step(params.token_embedding, d_tok * inv, config, t);
      score_slot.step(params.scoring, d_score * inv, config, t);
      if (config.train_projection) proj_slot.step(proj.weight, d_proj * inv, config, t);
    }
    if (stats != nullptr) stats->epoch_loss.push_back(epoch_loss);
  }
  if (stats != nullptr) stats->steps = t;
  return {std::move(params), std::move(proj)};
}

std::vector<std::size_t> topk_indices(const Vector& p, std::size_t k) {
  std::vector<std::size_t> order(static_cast<std::size_t>(p.size()));
  std::iota(order.begin(), order.end(), std::size_t{0});
  k = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (p(row(a)) != p(row(b))) return p(row(a)) > p(row(b));
                      return a < b;
                    });
  order.resize(k);
  return order;
}

std::vector<std::string> predict_topk(const AssembledInput& input, const HeadParams& params,
                                      const AnswerSpace& answers, std::size_t k) {
  if (k == 0) throw ValidationError("predict_topk needs K >= 1");
  if (params.num_answers() != answers.size()) {
    throw ValidationError("answer head size does not match the answer space");
  }
  std::vector<std::string> out;
  for (std::size_t a : topk_indices(score(input, params), k)) out.push_back(answers.label(a));
  return out;
}

void save_head(const HeadModel& model, const std::filesystem::path& path) {
  MatrixBundle b;
  b.magic = kHeadMagic;
  b.dim = static_cast<std::uint32_t>(model.params.llm_dim());
  Matrix combo(1, 4);
  for (int i = 0; i < 4; ++i) combo(0, i) = model.params.combination[static_cast<std::size_t>(i)];
  b.matrices = {model.params.token_embedding, model.params.scoring, combo,
                model.projection.weight};
  b.strings = model.params.tokens;
  write_bundle(b, path);
}

HeadModel load_head(const std::filesystem::path& path) {
  MatrixBundle b = read_bundle(path, kHeadMagic);
  if (b.matrices.size() != 4) throw ParseError(path.string() + ": expected 4 matrices");
  HeadModel m;
  m.params.token_embedding = std::move(b.matrices[0]);
  m.params.scoring = std::move(b.matrices[1]);
  for (int i = 0; i < 4; ++i) m.params.combination[static_cast<std::size_t>(i)] = b.matrices[2](0, i);
  m.projection.weight = std::move(b.matrices[3]);
  m.params.tokens = std::move(b.strings);
  if (m.params.tokens.size() != static_cast<std::size_t>(m.params.token_embedding.rows())) {
    throw ParseError(path.string() + ": token list does not match the embedding rows");
  }
  m.params.rebuild_index();
  return m;
}

}  // namespace tkgqa
