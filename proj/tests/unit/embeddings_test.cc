#include <gtest/gtest.h>

#include <cmath>

#include "oracles.h"
#include "tkgqa/checkpoint.h"
#include "tkgqa/embeddings.h"
#include "tkgqa/error.h"
#include "tkgqa/synthetic.h"

namespace tkgqa {
namespace {

using testing::central_differences;
using testing::flat;
using testing::relative_error;

TEST(InitRandom, SameSeedSameTable) {
  const auto a = init_random(10, 3, 4, 8, 42);
  const auto b = init_random(10, 3, 4, 8, 42);
  EXPECT_EQ(a.entity, b.entity);
  EXPECT_EQ(a.relation, b.relation);
  EXPECT_EQ(a.time, b.time);
  const auto c = init_random(10, 3, 4, 8, 43);
  EXPECT_NE(a.entity, c.entity);
}

TEST(InitRandom, ShapeAndScale) {
  const auto t = init_random(10, 3, 4, 16, 1);
  EXPECT_EQ(t.entity.rows(), 10);
  EXPECT_EQ(t.entity.cols(), 16);
  EXPECT_EQ(t.relation.rows(), 6);
  EXPECT_EQ(t.time.rows(), 4);
  EXPECT_LE(t.entity.cwiseAbs().maxCoeff(), 0.25);
  EXPECT_LT(t.entity.cwiseAbs().maxCoeff(), 1.0);
}

TEST(InitRandom, ColumnMeansNearZero) {
  const std::size_t n = 10000, d = 16;
  const auto t = init_random(n, 1, 1, d, 7);
  // Uniform(-a, a) has variance a^2 / 3.
  const double a = 1.0 / std::sqrt(static_cast<double>(d));
  const double sigma = a / std::sqrt(3.0 * static_cast<double>(n));
  for (Eigen::Index c = 0; c < t.entity.cols(); ++c) {
    EXPECT_LT(std::abs(t.entity.col(c).mean()), 5.0 * sigma);
  }
}

TEST(InitRandom, EmptyEntityVocabularyRejected) {
  EXPECT_THROW(init_random(0, 1, 1, 4, 1), ValidationError);
}

TEST(BaseScorer, ScoresMatchDefinition) {
  const auto t = init_random(5, 2, 3, 4, 3);
  BaseQuery q{make_id<EntityId>(1), make_id<RelationId>(1), true, make_id<TimeId>(0),
              make_id<TimeId>(2), make_id<EntityId>(4)};
  const Vector s = base_scores(t, q);
  for (Eigen::Index e = 0; e < 5; ++e) {
    double expect = 0.0;
    for (Eigen::Index c = 0; c < 4; ++c) {
      const double lhs = t.entity(1, c) + t.relation(3, c) + 0.5 * (t.time(0, c) + t.time(2, c));
      expect += lhs * t.entity(e, c);
    }
    EXPECT_NEAR(s(e), expect, 1e-12);
  }
}

TEST(BaseScorer, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto t = init_random(7, 3, 5, 16, seed);
    Rng rng(seed);
    BaseQuery q{make_id<EntityId>(rng.index(7)), make_id<RelationId>(rng.index(3)),
                rng.index(2) == 1, make_id<TimeId>(1), make_id<TimeId>(3),
                make_id<EntityId>(rng.index(7))};
    EmbeddingTable g = t.zeros_like();
    base_query_loss(t, q, &g);
    auto f = [&] { return base_query_loss(t, q); };
    for (auto [m, gm] : {std::pair{&t.entity, &g.entity}, std::pair{&t.relation, &g.relation},
                         std::pair{&t.time, &g.time}}) {
      const auto numeric = central_differences(m->data(), static_cast<std::size_t>(m->size()), f);
      EXPECT_LT(relative_error(flat(*gm), numeric), 1e-4) << "seed " << seed;
    }
  }
}

TEST(PretrainBase, OneEpochChangesTableWithFiniteLoss) {
  const auto store = parse_tkg("a|r|b|2000|2000\nb|r|c|2001|2002\nc|s|a|2002|2002\n");
  const auto init = init_random(store, 8, 1);
  TrainStats stats;
  const auto out = pretrain_base(store, init, {.learning_rate = 0.1, .epochs = 1}, &stats);
  ASSERT_EQ(stats.epoch_loss.size(), 1u);
  EXPECT_TRUE(std::isfinite(stats.epoch_loss[0]));
  EXPECT_NE(out.entity, init.entity);
}

TEST(PretrainBase, ZeroLearningRateIsIdentity) {
  const auto store = patterned_tkg();
  const auto init = init_random(store, 8, 1);
  const auto out = pretrain_base(store, init, {.learning_rate = 0.0, .epochs = 1});
  EXPECT_EQ(out.entity, init.entity);
  EXPECT_EQ(out.relation, init.relation);
  EXPECT_EQ(out.time, init.time);
}

TEST(PretrainBase, Deterministic) {
  const auto store = patterned_tkg();
  const auto init = init_random(store, 8, 1);
  const BasePretrainConfig cfg{.learning_rate = 0.1, .epochs = 1, .seed = 5};
  EXPECT_EQ(pretrain_base(store, init, cfg).entity, pretrain_base(store, init, cfg).entity);
}

TEST(PretrainBase, NonFiniteLossAborts) {
  const auto store = parse_tkg("a|r|b|2000|2000\n");
  auto init = init_random(store, 4, 1);
  init.entity(0, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(pretrain_base(store, init, {.learning_rate = 0.1, .epochs = 1}), NumericError);
}

// Raw Hits@10 of the base scorer on held-out facts, both directions.
double base_hits10(const EmbeddingTable& t, const std::vector<Quadruple>& facts) {
  std::size_t hits = 0;
  for (const auto& f : facts) {
    for (const BaseQuery& q : {object_query(f), subject_query(f)}) {
      const Vector s = base_scores(t, q);
      std::size_t better = 0;
      for (Eigen::Index e = 0; e < s.size(); ++e) better += s(e) > s(static_cast<Eigen::Index>(idx(q.target)));
      hits += better < 10;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(2 * facts.size());
}

TEST(PretrainBase, HeldOutHitsBeatRandomThreefold) {
  const auto split = holdout_facts(patterned_tkg(), 0.1, 17);
  const auto init = init_random(split.train, 32, 17);
  TrainStats stats;
  const auto out = pretrain_base(split.train, init,
                                 {.learning_rate = 0.1, .epochs = 100, .max_steps = 500}, &stats);
  EXPECT_EQ(stats.steps, 500u);
  const double baseline = 10.0 / static_cast<double>(split.train.num_entities());
  EXPECT_GE(base_hits10(out, split.heldout), 3.0 * baseline);
}

TEST(EmbeddingCheckpoint, RoundTripIsExactAfterRounding) {
  auto t = init_random(6, 2, 3, 5, 9);
  round_to_float(t.entity);
  round_to_float(t.relation);
  round_to_float(t.time);
  const auto path = testing::binary_path("tmp/emb.tkge");
  save_embeddings(t, path);
  const auto back = load_embeddings(path);
  EXPECT_EQ(back.dim, t.dim);
  EXPECT_EQ(back.entity, t.entity);
  EXPECT_EQ(back.relation, t.relation);
  EXPECT_EQ(back.time, t.time);
}

TEST(EmbeddingCheckpoint, WrongMagicAndTruncationRejected) {
  const auto t = init_random(6, 2, 3, 5, 9);
  std::string bytes = encode_bundle({{'T', 'K', 'G', 'E'}, 5, {t.entity, t.relation, t.time}, {}});
  EXPECT_THROW(decode_bundle(bytes, {'H', 'E', 'A', 'D'}), ParseError);
  EXPECT_THROW(decode_bundle(bytes.substr(0, bytes.size() - 3), {'T', 'K', 'G', 'E'}), ParseError);
  EXPECT_THROW(decode_bundle(bytes + "x", {'T', 'K', 'G', 'E'}), ParseError);
}

}  // namespace
}  // namespace tkgqa
