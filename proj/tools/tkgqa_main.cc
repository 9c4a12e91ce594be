// tkgqa: runs the question-answering pipeline one stage at a time or end to
// end. Options may come from a TOML/INI file given with --config; command
// line values win.
#include <iostream>

#include <CLI11.hpp>

#include "tkgqa/error.h"
#include "tkgqa/pipeline.h"

namespace {

void add_options(CLI::App& app, tkgqa::RunConfig& c) {
  app.add_option("--tkg", c.tkg, "Fact file (subject|relation|object|start|end)");
  app.add_option("--train-questions,--train_questions", c.train_questions,
                 "Training questions (JSON lines)");
  app.add_option("--test-questions,--test_questions", c.test_questions,
                 "Test questions (JSON lines)");
  app.add_option("--dump-dir,--dump_dir", c.dump_dir, "Directory for dumps and checkpoints");
  app.add_option("--seed", c.seed, "Master seed");
  app.add_option("--jobs", c.jobs, "Worker threads");

  app.add_option("--dim", c.dim, "Graph embedding size d");
  app.add_option("--layers", c.layers, "T-GNN layers l");
  app.add_option("--base-lr,--base_lr", c.base_lr);
  app.add_option("--base-epochs,--base_epochs", c.base_epochs);
  app.add_option("--base-max-steps,--base_max_steps", c.base_max_steps);
  app.add_option("--tgnn-lr,--tgnn_lr", c.tgnn_lr);
  app.add_option("--tgnn-epochs,--tgnn_epochs", c.tgnn_epochs);
  app.add_option("--tgnn-max-steps,--tgnn_max_steps", c.tgnn_max_steps);
  app.add_option("--graph-batch,--graph_batch", c.graph_batch);
  app.add_option("--max-edges,--max_edges", c.max_edges, "Facts per pretraining subgraph");
  app.add_option("--edge-time,--edge_time", c.edge_time, "start, end or mean");
  app.add_flag("--freeze-embeddings,--freeze_embeddings", c.freeze_embeddings);

  app.add_option("--top-k,--top_k", c.top_k, "Relations kept by ranking (k)");
  app.add_option("--max-facts,--max_facts", c.max_facts, "Facts kept per subgraph (n)");
  app.add_flag("--oracle", c.oracle, "Lexical ranking and rule-based time mining; no network");
  app.add_option("--endpoint", c.endpoint, "Chat-completion URL");
  app.add_option("--model", c.model);
  app.add_option("--temperature", c.temperature);
  app.add_option("--max-tokens,--max_tokens", c.max_tokens);
  app.add_option("--max-attempts,--max_attempts", c.max_attempts);
  app.add_option("--timeout-ms,--timeout_ms", c.timeout_ms);
  app.add_option("--max-in-flight,--max_in_flight", c.max_in_flight);

  app.add_option("--pool", c.pool, "mean or max");
  app.add_option("--llm-dim,--llm_dim", c.llm_dim, "Projected indicator size d_llm");
  app.add_option("--lr", c.lr);
  app.add_option("--epochs", c.epochs);
  app.add_option("--batch", c.batch);
  app.add_option("--weight-decay,--weight_decay", c.weight_decay);
  app.add_option("--train-projection,--train_projection", c.train_projection);
  app.add_option("--top-answers,--top_answers", c.top_answers, "Predictions kept per question");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal KG question answering pipeline"};
  app.set_config("--config", "", "TOML or INI configuration file");
  app.fallthrough();
  app.require_subcommand(1);
  tkgqa::RunConfig config;
  add_options(app, config);

  const char* stages[] = {"build-kg", "pretrain-base", "pretrain-tgnn", "retrieve",
                          "build-prompts", "build-indicators", "train-head", "predict",
                          "evaluate", "e2e"};
  for (const char* s : stages) app.add_subcommand(s);

  CLI11_PARSE(app, argc, argv);

  try {
    const auto stage = tkgqa::stage_from_string(app.get_subcommands().front()->get_name());
    config.validate();
    std::cerr << "[tkgqa] resolved configuration\n" << config.describe();
    tkgqa::run_stage(stage, config, std::cerr);
  } catch (const tkgqa::ValidationError& e) {
    std::cerr << "tkgqa: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "tkgqa: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
