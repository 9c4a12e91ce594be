// Writes the patterned synthetic store and its question splits.
#include <iostream>

#include <CLI11.hpp>

#include "tkgqa/subgraph_retrieval.h"
#include "tkgqa/synthetic.h"
#include "tkgqa/tkg_store.h"

int main(int argc, char** argv) {
  CLI::App app{"Generate the synthetic patterned fixture"};
  std::filesystem::path out = "fixture";
  double test_fraction = 0.2;
  std::uint64_t seed = 17;
  app.add_option("--out", out, "Output directory");
  app.add_option("--test-fraction", test_fraction)->check(CLI::Range(0.0, 1.0));
  app.add_option("--seed", seed);
  CLI11_PARSE(app, argc, argv);

  try {
    const tkgqa::TkgStore store = tkgqa::patterned_tkg();
    tkgqa::RetrievalConfig rc;
    rc.oracle = true;
    auto [train, test] =
        tkgqa::split_questions(tkgqa::patterned_questions(store, rc), test_fraction, seed);
    std::filesystem::create_directories(out);
    tkgqa::save_tkg(store, out / "tkg.txt");
    tkgqa::save_questions(train, store, out / "train.jsonl");
    tkgqa::save_questions(test, store, out / "test.jsonl");
    std::cerr << store.size() << " facts, " << train.size() << " train and " << test.size()
              << " test questions written to " << out.string() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "tkgqa_make_fixture: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
