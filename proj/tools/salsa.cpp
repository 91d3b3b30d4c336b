// Copyright 2026 The salsa Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end: salsa <command> --config run.cfg [options]

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "salsa/harness.hpp"

namespace {

struct Options {
  std::string config;
  std::string checkpoint;
  std::size_t seeds = 0;  // 0: keep the config's run.seeds
  std::string out;
};

salsa::RunConfig effective_config(const Options& o) {
  salsa::RunConfig c = salsa::load_run_config(o.config);
  if (o.seeds > 0) c.seeds = o.seeds;
  if (!o.out.empty()) c.out_dir = o.out;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Single-pass LLM classification: fine-tune, evaluate and inspect runs"};
  app.require_subcommand(1);
  Options o;
  auto add = [&](const std::string& name, const std::string& help, bool takes_checkpoint) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", o.config, "run configuration file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output directory (overrides output.dir)");
    if (takes_checkpoint) sub->add_option("--checkpoint", o.checkpoint, "adapter checkpoint prefix");
    return sub;
  };
  CLI::App* train = add("train", "fine-tune adapters over one or more seeds", false);
  train->add_option("--seeds", o.seeds, "number of seeds (overrides run.seeds)")->check(CLI::PositiveNumber);
  add("eval", "metrics and predictions on the eval split", true);
  add("predict", "per-sample predictions as JSON lines", true);
  CLI::App* ablate = add("ablate", "zero-shot and fine-tuned accuracy for every mapping strategy", false);
  ablate->add_option("--seeds", o.seeds, "seeds per strategy")->check(CLI::PositiveNumber);
  add("sweep", "precision and recall across decision thresholds", true);
  CLI::App* compare = add("compare", "single-pass classification against a linear-head baseline", false);
  compare->add_option("--seeds", o.seeds, "number of seeds")->check(CLI::PositiveNumber);
  add("oracle", "agreement with constrained greedy generation", true);
  add("pretrain", "build and cache the base model", false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const salsa::RunConfig config = effective_config(o);
    const std::string command = app.get_subcommands().front()->get_name();
    if (command == "pretrain") {
      salsa::cmd_pretrain(config, std::cout);
      return 0;
    }
    const salsa::Workspace ws = salsa::open_workspace(config, &std::cout);
    std::cout << "config_hash " << ws.hash << "\n";
    if (command == "train") salsa::cmd_train(ws, std::cout);
    else if (command == "eval") salsa::cmd_eval(ws, o.checkpoint, std::cout);
    else if (command == "predict") salsa::cmd_predict(ws, o.checkpoint, std::cout);
    else if (command == "ablate") salsa::cmd_ablate(ws, std::cout);
    else if (command == "sweep") salsa::cmd_sweep(ws, o.checkpoint, std::cout);
    else if (command == "compare") salsa::cmd_compare(ws, std::cout);
    else if (command == "oracle") salsa::cmd_oracle(ws, o.checkpoint, std::cout);
    return 0;
  } catch (const salsa::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return salsa::exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
