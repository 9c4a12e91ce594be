#include "tkgqa/pipeline.h"

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>

#include "tkgqa/answer_head.h"
#include "tkgqa/checkpoint.h"
#include "tkgqa/dumps.h"
#include "tkgqa/embeddings.h"
#include "tkgqa/error.h"
#include "tkgqa/indicators.h"
#include "tkgqa/io.h"
#include "tkgqa/parallel.h"
#include "tkgqa/prompt_builder.h"
#include "tkgqa/subgraph_retrieval.h"
#include "tkgqa/tgnn.h"
#include "tkgqa/tkg_store.h"

namespace tkgqa {
namespace {

constexpr std::array<char, 4> kProjectionMagic = {'W', 'P', 'R', 'J'};

constexpr std::pair<Stage, std::string_view> kStageNames[] = {
    {Stage::kBuildKg, "build-kg"},
    {Stage::kPretrainBase, "pretrain-base"},
    {Stage::kPretrainTgnn, "pretrain-tgnn"},
    {Stage::kRetrieve, "retrieve"},
    {Stage::kBuildPrompts, "build-prompts"},
    {Stage::kBuildIndicators, "build-indicators"},
    {Stage::kTrainHead, "train-head"},
    {Stage::kPredict, "predict"},
    {Stage::kEvaluate, "evaluate"},
    {Stage::kEndToEnd, "e2e"},
};

EdgeTime edge_time_from_string(std::string_view s) {
  if (s == "start") return EdgeTime::kStart;
  if (s == "end") return EdgeTime::kEnd;
  if (s == "mean") return EdgeTime::kMean;
  throw ValidationError("unknown edge_time '" + std::string(s) + "'");
}

void require(const std::filesystem::path& path, Stage producer) {
  if (!std::filesystem::exists(path)) {
    throw Error("missing input artifact " + path.string() + " (produced by stage '" +
                std::string(to_string(producer)) + "')");
  }
}

// Sub-seeds so that stages do not share random streams.
std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t salt) {
  return seed * 0x9E3779B97F4A7C15ULL + salt;
}

class StageTimer {
 public:
  StageTimer(Stage stage, std::ostream& log)
      : stage_(stage), log_(log), unwinding_(std::uncaught_exceptions()) {
    log_ << "[tkgqa] stage " << to_string(stage_) << " started\n";
  }
  ~StageTimer() {
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now() - start_)
                        .count();
    const bool failed = std::uncaught_exceptions() > unwinding_;
    log_ << "[tkgqa] stage " << to_string(stage_) << (failed ? " failed after " : " finished in ")
         << ms << " ms\n";
  }

 private:
  Stage stage_;
  std::ostream& log_;
  int unwinding_;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

TkgStore load_kg(const Artifacts& a) {
  require(a.kg, Stage::kBuildKg);
  return load_tkg(a.kg);
}

std::vector<Question> load_split(const std::filesystem::path& path, const TkgStore& store) {
  require(path, Stage::kBuildKg);
  return load_questions(path, store);
}

void build_kg(const RunConfig& c, const Artifacts& a, std::ostream& log) {
  if (c.tkg.empty() || c.train_questions.empty() || c.test_questions.empty()) {
    throw ValidationError("build-kg needs tkg, train_questions and test_questions paths");
  }
  for (const auto& p : {c.tkg, c.train_questions, c.test_questions}) {
    if (!std::filesystem::exists(p)) throw Error("missing input file " + p.string());
  }
  const TkgStore store = load_tkg(c.tkg);
  const auto train = load_questions(c.train_questions, store);
  const auto test = load_questions(c.test_questions, store);
  std::filesystem::create_directories(c.dump_dir);
  save_tkg(store, a.kg);
  save_questions(train, store, a.train);
  save_questions(test, store, a.test);
  log << "[tkgqa] " << store.size() << " facts, " << store.num_entities() << " entities, "
      << store.num_relations() << " relations, " << store.num_times() << " timestamps; "
      << train.size() << " train / " << test.size() << " test questions\n";
}

void pretrain_base_stage(const RunConfig& c, const Artifacts& a, std::ostream& log) {
  const TkgStore store = load_kg(a);
  BasePretrainConfig bc;
  bc.learning_rate = c.base_lr;
  bc.epochs = c.base_epochs;
  bc.batch_size = c.graph_batch;
  bc.max_steps = c.base_max_steps;
  bc.seed = sub_seed(c.seed, 1);
  TrainStats stats;
  EmbeddingTable table = pretrain_base(store, init_random(store, c.dim, sub_seed(c.seed, 0)), bc,
                                       &stats);
  save_embeddings(table, a.base_embeddings);
  log << "[tkgqa] base pretraining: " << stats.steps << " steps";
  if (!stats.epoch_loss.empty()) log << ", last epoch loss " << stats.epoch_loss.back();
  log << '\n';
}

void pretrain_tgnn_stage(const RunConfig& c, const Artifacts& a, std::ostream& log) {
  const TkgStore store = load_kg(a);
  require(a.base_embeddings, Stage::kPretrainBase);
  EmbeddingTable table = load_embeddings(a.base_embeddings);
  table.check_compatible(store);
  TgnnPretrainConfig tc;
  tc.learning_rate = c.tgnn_lr;
  tc.epochs = c.tgnn_epochs;
  tc.batch_size = c.graph_batch;
  tc.max_steps = c.tgnn_max_steps;
  tc.seed = sub_seed(c.seed, 3);
  tc.max_edges = c.max_edges;
  tc.edge_time = edge_time_from_string(c.edge_time);
  tc.freeze_embeddings = c.freeze_embeddings;
  tc.jobs = c.jobs;
  TrainStats stats;
  TgnnModel model = pretrain_tgnn(
      store, std::move(table),
      init_tgnn(c.dim, store.num_entities(), sub_seed(c.seed, 2), c.layers), tc, &stats);
  save_embeddings(model.table, a.tgnn_embeddings);
  save_tgnn(model.params, a.tgnn);
  log << "[tkgqa] T-GNN pretraining: " << stats.steps << " steps";
  if (!stats.epoch_loss.empty()) log << ", last epoch loss " << stats.epoch_loss.back();
  log << '\n';
}

std::unique_ptr<LlmClient> make_remote(const RunConfig& c) {
  RemoteClientConfig rc;
  rc.endpoint = c.endpoint;
  if (const char* key = std::getenv("TEMPKGQA_API_KEY")) rc.api_key = key;
  rc.timeout = std::chrono::milliseconds(c.timeout_ms);
  rc.max_attempts = c.max_attempts;
  rc.max_in_flight = c.max_in_flight;
  return std::make_unique<RemoteClient>(rc);
}

void retrieve_stage(const RunConfig& c, const Artifacts& a, std::ostream& log,
                    LlmClient* client) {
  const TkgStore store = load_kg(a);
  RetrievalConfig rc;
  rc.top_k = c.top_k;
  rc.max_facts = c.max_facts;
  rc.oracle = c.oracle;
  rc.generation.model = c.model;
  rc.generation.temperature = c.temperature;
  rc.generation.max_tokens = c.max_tokens;
  rc.jobs = c.jobs;
  std::unique_ptr<LlmClient> owned;
  if (!c.oracle && client == nullptr) {
    owned = make_remote(c);
    client = owned.get();
  }
  for (const auto& [questions_path, out] :
       {std::pair{a.train, a.retrieval_train}, std::pair{a.test, a.retrieval_test}}) {
    const auto questions = load_split(questions_path, store);
    const auto subgraphs = retrieve_all(store, questions, c.oracle ? nullptr : client, rc);
    std::size_t empty = 0, relation_fb = 0, time_fb = 0;
    for (const auto& g : subgraphs) {
      empty += g.empty || g.facts.empty() ? 1 : 0;
      relation_fb += g.relation_fallback ? 1 : 0;
      time_fb += g.time_fallback ? 1 : 0;
    }
    write_retrieval_dump(out, subgraphs, store);
    log << "[tkgqa] retrieved " << subgraphs.size() << " subgraphs into " << out.filename().string()
        << " (" << empty << " empty, " << relation_fb << " relation fallbacks, " << time_fb
        << " time fallbacks)\n";
  }
}

std::map<std::string, const Question*> by_uid(const std::vector<Question>& questions) {
  std::map<std::string, const Question*> out;
  for (const auto& q : questions) out.emplace(q.uid, &q);
  return out;
}

const Question& lookup(const std::map<std::string, const Question*>& index, const std::string& uid,
                       const std::filesystem::path& source) {
  auto it = index.find(uid);
  if (it == index.end()) {
    throw ValidationError(source.string() + " refers to unknown question '" + uid + "'");
  }
  return *it->second;
}

void build_prompts_stage(const RunConfig& c, const Artifacts& a, std::ostream& log) {
  const TkgStore store = load_kg(a);
  for (const auto& [questions_path, retrieval, out, training] :
       {std::tuple{a.train, a.retrieval_train, a.prompts_train, true},
        std::tuple{a.test, a.retrieval_test, a.prompts_test, false}}) {
    const auto questions = load_split(questions_path, store);
    require(retrieval, Stage::kRetrieve);
    const auto subgraphs = read_retrieval_dump(retrieval, store);
    const auto index = by_uid(questions);
    std::vector<PromptRecord> records;
    for (const auto& g : subgraphs) {
      const Question& q = lookup(index, g.question_uid, retrieval);
      std::optional<std::vector<std::string>> answer;
      if (training) answer = answer_labels(q, store);
      records.push_back({q.uid, render_instruction(q, g.facts, answer, store, c.max_facts)});
    }
    write_prompt_dump(out, records);
    log << "[tkgqa] wrote " << records.size() << " prompts to " << out.filename().string() << '\n';
  }
}

void build_indicators_stage(const RunConfig& c, const Artifacts& a, std::ostream& log) {
  const TkgStore store = load_kg(a);
  require(a.tgnn_embeddings, Stage::kPretrainTgnn);
  require(a.tgnn, Stage::kPretrainTgnn);
  const EmbeddingTable table = load_embeddings(a.tgnn_embeddings);
  table.check_compatible(store);
  const TgnnParams params = load_tgnn(a.tgnn);
  params.check_compatible(table);
  const PoolMode mode = pool_mode_from_string(c.pool);
  const EdgeTime edge_time = edge_time_from_string(c.edge_time);

  Projection proj = init_projection(table.dim, c.llm_dim, sub_seed(c.seed, 4));
  round_to_float(proj.weight);
  write_bundle({kProjectionMagic, static_cast<std::uint32_t>(table.dim), {proj.weight}, {}},
               a.projection);

  for (const auto& [retrieval, out] : {std::pair{a.retrieval_train, a.indicators_train},
                                       std::pair{a.retrieval_test, a.indicators_test}}) {
    require(retrieval, Stage::kRetrieve);
    const auto subgraphs = read_retrieval_dump(retrieval, store);
    std::vector<IndicatorRecord> records(subgraphs.size());
    parallel_for(subgraphs.size(), c.jobs, [&](std::size_t i) {
      records[i].subgraph = subgraphs[i];
      IndicatorSet& set = records[i].indicators;
      if (subgraphs[i].facts.empty()) {
        // Nothing retrieved: the indicators carry no graph signal.
        const auto zero = Vector::Zero(static_cast<Eigen::Index>(table.dim));
        set.h_sub = set.h_rel = set.h_obj = zero;
        project_indicators(set, proj);
        set.t_min = set.t_max = make_id<TimeId>(0);
      } else {
        set = build_indicators(subgraphs[i], table, params, proj, mode, edge_time);
      }
    });
    write_indicator_dump(out, records, store);
    log << "[tkgqa] wrote " << records.size() << " indicator records to "
        << out.filename().string() << '\n';
  }
}

Projection load_projection(const std::filesystem::path& path) {
  require(path, Stage::kBuildIndicators);
  MatrixBundle b = read_bundle(path, kProjectionMagic);
  if (b.matrices.size() != 1) throw ParseError(path.string() + ": expected one matrix");
  return {std::move(b.matrices[0])};
}

// Joins prompt and indicator dumps by uid, in prompt order.
std::vector<std::pair<AssembledInput, const Question*>> assemble_split(
    const std::filesystem::path& prompts_path, const std::filesystem::path& indicators_path,
    const std::map<std::string, const Question*>& index, const TkgStore& store,
    const Projection* reproject) {
  require(prompts_path, Stage::kBuildPrompts);
  require(indicators_path, Stage::kBuildIndicators);
  const auto prompts = read_prompt_dump(prompts_path);
  auto indicators = read_indicator_dump(indicators_path, store);
  std::map<std::string, IndicatorSet*> ind_by_uid;
  for (auto& r : indicators) ind_by_uid.emplace(r.subgraph.question_uid, &r.indicators);
  std::vector<std::pair<AssembledInput, const Question*>> out;
  for (const auto& p : prompts) {
    const Question& q = lookup(index, p.uid, prompts_path);
    auto it = ind_by_uid.find(p.uid);
    if (it == ind_by_uid.end()) {
      throw ValidationError(indicators_path.string() + " has no record for question '" + p.uid +
                            "'");
    }
    if (reproject != nullptr) project_indicators(*it->second, *reproject);
    out.emplace_back(assemble(*it->second, p.bundle, q), &q);
  }
  return out;
}

void train_head_stage(const RunConfig& c, const Artifacts& a, std::ostream& log) {
  const TkgStore store = load_kg(a);
  const auto questions = load_split(a.train, store);
  const auto index = by_uid(questions);
  Projection proj = load_projection(a.projection);
  const AnswerSpace answers(store);
  auto inputs = assemble_split(a.prompts_train, a.indicators_train, index, store, nullptr);

  std::vector<std::string> texts;
  std::vector<HeadExample> examples;
  for (auto& [input, q] : inputs) {
    texts.push_back(q->text);
    examples.push_back({std::move(input), answers.gold(*q), q->uid});
  }
  if (examples.empty()) throw ValidationError("no training examples for the answer head");
  HeadParams params = init_head(texts, proj.out_dim(), answers.size(), sub_seed(c.seed, 5));
  HeadTrainConfig hc;
  hc.learning_rate = c.lr;
  hc.epochs = c.epochs;
  hc.batch_size = c.batch;
  hc.weight_decay = c.weight_decay;
  hc.seed = sub_seed(c.seed, 6);
  hc.train_projection = c.train_projection;
  TrainStats stats;
  HeadModel model = train_head(std::move(examples), std::move(params), std::move(proj), hc, &stats);
  save_head(model, a.head);
  log << "[tkgqa] answer head: " << stats.steps << " steps";
  if (!stats.epoch_loss.empty()) log << ", last epoch loss " << stats.epoch_loss.back();
  log << '\n';
}

void predict_stage(const RunConfig& c, const Artifacts& a, std::ostream& log) {
  const TkgStore store = load_kg(a);
  const auto questions = load_split(a.test, store);
  const auto index = by_uid(questions);
  require(a.head, Stage::kTrainHead);
  const HeadModel model = load_head(a.head);
  const AnswerSpace answers(store);
  const auto inputs =
      assemble_split(a.prompts_test, a.indicators_test, index, store, &model.projection);
  std::vector<PredictionRecord> records(inputs.size());
  parallel_for(inputs.size(), c.jobs, [&](std::size_t i) {
    records[i] = {inputs[i].second->uid,
                  predict_topk(inputs[i].first, model.params, answers, c.top_answers)};
  });
  write_prediction_dump(a.predictions, records);
  log << "[tkgqa] wrote " << records.size() << " predictions\n";
}

EvalReport evaluate_stage(const Artifacts& a, std::ostream& log) {
  const TkgStore store = load_kg(a);
  const auto questions = load_split(a.test, store);
  require(a.predictions, Stage::kPredict);
  const auto predictions = read_prediction_dump(a.predictions);
  std::map<std::string, const std::vector<std::string>*> pred_by_uid;
  for (const auto& p : predictions) pred_by_uid.emplace(p.uid, &p.predictions);
  std::vector<std::vector<std::string>> lists;
  for (const auto& q : questions) {
    auto it = pred_by_uid.find(q.uid);
    // A question without a prediction simply misses.
    lists.push_back(it == pred_by_uid.end() ? std::vector<std::string>{} : *it->second);
  }
  EvalReport report = make_report(rank_predictions(questions, lists, store));
  write_report(report, a.report, a.records);
  log << format_report(report);
  return report;
}

}  // namespace

void RunConfig::validate() const {
  std::vector<std::string> bad;
  auto check = [&](bool ok, const char* field, const std::string& why) {
    if (!ok) bad.push_back(std::string(field) + " " + why);
  };
  check(!dump_dir.empty(), "dump_dir", "must be set");
  check(jobs >= 1, "jobs", "must be >= 1");
  check(dim >= 1, "dim", "must be >= 1");
  check(layers >= 1, "layers", "must be >= 1");
  check(base_lr > 0.0, "base_lr", "must be > 0");
  check(base_epochs >= 1, "base_epochs", "must be >= 1");
  check(tgnn_lr > 0.0, "tgnn_lr", "must be > 0");
  check(tgnn_epochs >= 1, "tgnn_epochs", "must be >= 1");
  check(graph_batch >= 1, "graph_batch", "must be >= 1");
  check(max_edges >= 1, "max_edges", "must be >= 1");
  check(edge_time == "start" || edge_time == "end" || edge_time == "mean", "edge_time",
        "must be start, end or mean");
  check(top_k >= 1, "top_k", "must be >= 1");
  check(max_facts >= 1, "max_facts", "must be >= 1");
  check(oracle || !endpoint.empty(), "endpoint", "must be set unless oracle mode is on");
  check(!model.empty(), "model", "must be set");
  check(temperature >= 0.0, "temperature", "must be >= 0");
  check(max_tokens >= 1, "max_tokens", "must be >= 1");
  check(max_attempts >= 1, "max_attempts", "must be >= 1");
  check(timeout_ms >= 1, "timeout_ms", "must be >= 1");
  check(max_in_flight >= 1, "max_in_flight", "must be >= 1");
  check(pool == "mean" || pool == "max", "pool", "must be mean or max");
  check(llm_dim >= 1, "llm_dim", "must be >= 1");
  check(lr > 0.0, "lr", "must be > 0");
  check(epochs >= 1, "epochs", "must be >= 1");
  check(batch >= 1, "batch", "must be >= 1");
  check(weight_decay >= 0.0, "weight_decay", "must be >= 0");
  check(top_answers >= 1, "top_answers", "must be >= 1");
  if (!bad.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& b : bad) msg += "\n  " + b;
    throw ValidationError(msg);
  }
}

std::string RunConfig::describe() const {
  std::ostringstream o;
  auto b = [](bool v) { return v ? "true" : "false"; };
  // Shortest text that reads back to the same double.
  auto num = [](double v) {
    char buf[32];
    return std::string(buf, std::to_chars(buf, buf + sizeof buf, v).ptr);
  };
  o << "tkg = " << tkg.string() << '\n'
    << "train_questions = " << train_questions.string() << '\n'
    << "test_questions = " << test_questions.string() << '\n'
    << "dump_dir = " << dump_dir.string() << '\n'
    << "seed = " << seed << '\n'
    << "jobs = " << jobs << '\n'
    << "dim = " << dim << '\n'
    << "layers = " << layers << '\n'
    << "base_lr = " << num(base_lr) << '\n'
    << "base_epochs = " << base_epochs << '\n'
    << "base_max_steps = " << base_max_steps << '\n'
    << "tgnn_lr = " << num(tgnn_lr) << '\n'
    << "tgnn_epochs = " << tgnn_epochs << '\n'
    << "tgnn_max_steps = " << tgnn_max_steps << '\n'
    << "graph_batch = " << graph_batch << '\n'
    << "max_edges = " << max_edges << '\n'
    << "edge_time = " << edge_time << '\n'
    << "freeze_embeddings = " << b(freeze_embeddings) << '\n'
    << "top_k = " << top_k << '\n'
    << "max_facts = " << max_facts << '\n'
    << "oracle = " << b(oracle) << '\n'
    << "endpoint = " << endpoint << '\n'
    << "model = " << model << '\n'
    << "temperature = " << num(temperature) << '\n'
    << "max_tokens = " << max_tokens << '\n'
    << "max_attempts = " << max_attempts << '\n'
    << "timeout_ms = " << timeout_ms << '\n'
    << "max_in_flight = " << max_in_flight << '\n'
    << "pool = " << pool << '\n'
    << "llm_dim = " << llm_dim << '\n'
    << "lr = " << num(lr) << '\n'
    << "epochs = " << epochs << '\n'
    << "batch = " << batch << '\n'
    << "weight_decay = " << num(weight_decay) << '\n'
    << "train_projection = " << b(train_projection) << '\n'
    << "top_answers = " << top_answers << '\n';
  return o.str();
}

std::string_view to_string(Stage stage) {
  for (const auto& [s, name] : kStageNames) {
    if (s == stage) return name;
  }
  return "unknown";
}

Stage stage_from_string(std::string_view name) {
  for (const auto& [s, n] : kStageNames) {
    if (n == name) return s;
  }
  throw ValidationError("unknown stage '" + std::string(name) + "'");
}

Artifacts::Artifacts(const std::filesystem::path& d)
    : kg(d / "kg.txt"),
      train(d / "train.jsonl"),
      test(d / "test.jsonl"),
      base_embeddings(d / "base.tkge"),
      tgnn_embeddings(d / "tgnn_embeddings.tkge"),
      tgnn(d / "tgnn.bin"),
      retrieval_train(d / "retrieval_train.jsonl"),
      retrieval_test(d / "retrieval_test.jsonl"),
      prompts_train(d / "prompts_train.jsonl"),
      prompts_test(d / "prompts_test.jsonl"),
      projection(d / "projection.bin"),
      indicators_train(d / "indicators_train.jsonl"),
      indicators_test(d / "indicators_test.jsonl"),
      head(d / "head.bin"),
      predictions(d / "predictions.jsonl"),
      report(d / "report.txt"),
      records(d / "records.jsonl") {}

std::optional<EvalReport> run_stage(Stage stage, const RunConfig& config, std::ostream& log,
                                    LlmClient* client) {
  config.validate();
  const Artifacts a(config.dump_dir);
  if (stage == Stage::kEndToEnd) {
    std::optional<EvalReport> report;
    for (const auto& [s, name] : kStageNames) {
      if (s != Stage::kEndToEnd) report = run_stage(s, config, log, client);
    }
    return report;
  }
  StageTimer timer(stage, log);
  switch (stage) {
    case Stage::kBuildKg:
      build_kg(config, a, log);
      break;
    case Stage::kPretrainBase:
      pretrain_base_stage(config, a, log);
      break;
    case Stage::kPretrainTgnn:
      pretrain_tgnn_stage(config, a, log);
      break;
    case Stage::kRetrieve:
      retrieve_stage(config, a, log, client);
      break;
    case Stage::kBuildPrompts:
      build_prompts_stage(config, a, log);
      break;
    case Stage::kBuildIndicators:
      build_indicators_stage(config, a, log);
      break;
    case Stage::kTrainHead:
      train_head_stage(config, a, log);
      break;
    case Stage::kPredict:
      predict_stage(config, a, log);
      break;
    case Stage::kEvaluate:
      return evaluate_stage(a, log);
    case Stage::kEndToEnd:
      break;
  }
  return std::nullopt;
}

}  // namespace tkgqa
