#include <benchmark/benchmark.h>

#include "tkgqa/answer_head.h"
#include "tkgqa/prompt_builder.h"
#include "tkgqa/subgraph_retrieval.h"
#include "tkgqa/synthetic.h"
#include "tkgqa/tgnn.h"

namespace tkgqa {
namespace {

struct GraphFixture {
  // Dense enough that neighbourhoods exceed max_edges.
  TkgStore store = random_tkg(200, 8, 20, 5000, 1);
  EmbeddingTable table;
  TgnnParams params;
  SubgraphBatch batch;

  GraphFixture(std::size_t dim, std::size_t max_edges) {
    table = init_random(store, dim, 1);
    params = init_tgnn(dim, store.num_entities(), 2);
    Rng rng(3);
    batch = masked_query_subgraph(store, store.fact(0), MaskSide::kObject, 0, max_edges,
                                  EdgeTime::kStart, rng);
  }
};

void BM_TgnnForward(benchmark::State& state) {
  GraphFixture f(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(tgnn_forward(f.batch, f.table, f.params));
  state.counters["edges"] = static_cast<double>(f.batch.edges().size());
}
BENCHMARK(BM_TgnnForward)->Args({32, 16})->Args({128, 16})->Args({128, 64});

void BM_TgnnGradients(benchmark::State& state) {
  GraphFixture f(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  const EntityId target = f.store.fact(0).object;
  for (auto _ : state) benchmark::DoNotOptimize(tgnn_gradients(f.batch, f.table, f.params, target));
}
BENCHMARK(BM_TgnnGradients)->Args({32, 16})->Args({128, 16})->Args({128, 64});

void BM_FactsFiltered(benchmark::State& state) {
  const auto store = random_tkg(1000, 20, 50, static_cast<std::size_t>(state.range(0)), 5);
  const auto questions = random_questions(store, 256, 5);
  const std::vector<RelationId> rels = {make_id<RelationId>(0), make_id<RelationId>(1),
                                        make_id<RelationId>(2)};
  const auto c = TemporalConstraint::between(make_id<TimeId>(10), make_id<TimeId>(30));
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& q = questions[i++ % questions.size()];
    benchmark::DoNotOptimize(facts_filtered(store, q.annotated_entities, rels, c));
  }
}
BENCHMARK(BM_FactsFiltered)->Arg(10'000)->Arg(100'000);

void BM_OracleRetrieval(benchmark::State& state) {
  const auto store = random_tkg(500, 12, 40, 10'000, 4);
  const auto questions = random_questions(store, 256, 4);
  const RetrievalConfig cfg{.oracle = true};
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(retrieve_for_question(store, questions[i++ % questions.size()], nullptr, cfg));
  }
}
BENCHMARK(BM_OracleRetrieval);

void BM_RenderInstruction(benchmark::State& state) {
  const auto store = patterned_tkg();
  const auto questions = patterned_questions(store);
  const std::vector<Quadruple> evidence(store.facts().begin(), store.facts().begin() + 10);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        render_instruction(questions[i++ % questions.size()], evidence, std::nullopt, store));
  }
}
BENCHMARK(BM_RenderInstruction);

void BM_RenderRelationRanking(benchmark::State& state) {
  const auto store = patterned_tkg();
  const auto questions = patterned_questions(store);
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& q = questions[i++ % questions.size()];
    const auto cands = candidate_relations(store, q);
    benchmark::DoNotOptimize(render_relation_ranking(q, cands, 1, store));
  }
}
BENCHMARK(BM_RenderRelationRanking);

}  // namespace
}  // namespace tkgqa

// The packaged benchmark_main archive carries LTO bytecode from another
// compiler build, so the entry point is defined here.
BENCHMARK_MAIN();
