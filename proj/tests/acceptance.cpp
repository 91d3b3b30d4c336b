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

// Acceptance run: one PASS/FAIL line per criterion, exit status 0 only when
// every criterion passes. The pretrained base is cached in the working
// directory (first run pretrains it, roughly half a minute).
//
//   acceptance [work_dir]

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "salsa/gradcheck.hpp"
#include "salsa/harness.hpp"

using namespace salsa;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

fs::path g_work;

// Desk-scale settings shared by the learning criteria: the default model on
// a cached keyword-pretrained base, LoRA r8/alpha16 on wq/wv.
std::string base_config() {
  return "base.pretrain = true\n"
         "pretrain.cache = " + (g_work / "base").string() + "\n"
         "pretrain.samples = 6000\n"
         "task.n_train = 400\n"
         "train.epochs = 1000\n"
         "train.peak_lr = 1e-3\n"
         "train.grad_accum_steps = 1\n"
         "train.warmup_steps = 50\n"
         "train.max_steps = 500\n"
         "train.eval_every = 100\n";
}

// `overrides` lines replace the shared settings above.
Workspace workspace(const std::string& overrides, const std::string& out) {
  RunConfig c = parse_run_config(base_config() + "output.dir = " + (g_work / out).string() + "\n");
  std::istringstream lines(overrides);
  for (std::string line; std::getline(lines, line);) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    set_config_value(c, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  std::ostringstream quiet;
  return open_workspace(c, &quiet);
}

ModelConfig tiny_model(std::uint64_t seed) {
  ModelConfig c;
  c.d_model = 16;
  c.n_layers = 2;
  c.n_heads = 2;
  c.d_ff = 32;
  c.max_seq_len = 256;
  c.seed = seed;
  return c;
}

void randomize_b(AdapterSet& adapters, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  for (auto& a : adapters.adapters())
    for (double& v : a.b.mutable_values()) v = n(rng);
}

// A random prompt from a random task kind, strategy and text length.
struct RandomPrompt {
  PromptSpec spec;
  CompiledPrompt compiled;
};

RandomPrompt random_prompt(std::mt19937_64& rng, const Vocabulary& vocab, std::size_t max_len) {
  const TaskKind kinds[] = {TaskKind::kKeyword, TaskKind::kNoisyChannel, TaskKind::kTopic,
                            TaskKind::kEntailment, TaskKind::kSimilarity};
  for (;;) {
    SyntheticTaskSpec s;
    s.kind = kinds[rng() % 5];
    s.keyword = static_cast<char>('a' + rng() % 26);
    s.length = 3 + rng() % 14;
    s.seed = rng();
    s.n_train = 4;
    s.n_val = 2;
    s.n_test = 2;
    const MappingStrategy st = kAllStrategies[rng() % 6];
    const bool multi = s.kind == TaskKind::kTopic && rng() % 2 == 0;
    try {
      RandomPrompt out;
      out.spec = default_prompt(s, vocab, s.kind == TaskKind::kSimilarity ? MappingStrategy::kNumerical : st, multi);
      const SplitDataset d = generate(s);
      out.compiled = compile(out.spec, vocab, d.train[rng() % d.train.size()].fields, max_len);
      return out;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kMapping) throw;  // strategy does not fit this class set
    }
  }
}

// 1. Full-pipeline adapter gradients against central differences.
Outcome gradient_correctness() {
  const auto t0 = Clock::now();
  const Vocabulary vocab = Vocabulary::standard();
  double worst = 0.0;
  std::size_t scalars = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    ModelConfig c;
    c.d_model = 8;
    c.n_layers = 1;
    c.n_heads = 2;
    c.d_ff = 16;
    c.max_seq_len = 256;
    c.seed = seed;
    TransformerWeights w = init_weights(c);
    LoraConfig lc;
    lc.rank = 2;
    lc.dropout_p = 0.0;
    AdapterSet adapters = attach(w, lc, seed);
    randomize_b(adapters, seed, 0.3);
    SyntheticTaskSpec s;
    s.seed = seed;
    s.n_train = 1;
    s.n_val = 1;
    s.n_test = 1;
    s.keyword = static_cast<char>('a' + seed);
    const PromptSpec spec = default_prompt(s, vocab, MappingStrategy::kNumerical);
    const auto ex = make_examples(spec, vocab, generate(s).train, c.max_seq_len);
    const GradCheckReport r = check_gradients(
        [&] {
          Tensor probs = salsa_probabilities(w, &adapters, ex[0], {});
          return cross_entropy(probs, Tensor({1, 2}, ex[0].target));
        },
        adapters.parameters(), 1e-5);
    worst = std::max(worst, r.max_relative_error);
    scalars += r.scalars_checked;
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 60.0,
          "max relative error " + fmt(worst) + " over " + std::to_string(scalars) +
              " scalars, 10 seeds, " + fmt(secs, 3) + " s"};
}

// 3. Filtered argmax against constrained greedy decoding.
Outcome oracle_equivalence() {
  const Vocabulary vocab = Vocabulary::standard();
  std::mt19937_64 rng(2024);
  std::size_t decisions = 0, agree = 0;
  ForwardCounter classify_counter;
  for (std::size_t i = 0; i < 200; ++i) {
    TransformerWeights w = init_weights(tiny_model(i % 4));
    AdapterSet adapters = attach(w, LoraConfig{}, i);
    randomize_b(adapters, i, 0.5);
    const RandomPrompt p = random_prompt(rng, vocab, w.config.max_seq_len);
    std::vector<ClassMapping> mappings;
    for (const auto& t : p.spec.tasks) mappings.push_back(t.mapping);
    const auto dists = mappings.size() == 1
                           ? std::vector<ClassDistribution>{classify(w, &adapters, p.compiled, mappings[0], &classify_counter)}
                           : classify_multitask(w, &adapters, p.compiled, mappings, &classify_counter);
    const GenerationResult g = constrained_generate(w, &adapters, p.compiled);
    for (std::size_t k = 0; k < dists.size(); ++k) {
      ++decisions;
      agree += predict_index(dists[k]) == g.class_index[k];
    }
  }
  const double agreement = static_cast<double>(agree) / decisions;
  return {agreement == 1.0 && classify_counter.passes == 200,
          "agreement " + fmt(agreement, 17) + " on " + std::to_string(decisions) +
              " decisions from 200 prompts, " + std::to_string(classify_counter.passes) +
              " classify passes"};
}

// 4. Fresh adapters change nothing; merged weights match the adapter path.
Outcome zero_init() {
  const Vocabulary vocab = Vocabulary::standard();
  std::mt19937_64 rng(77);
  std::size_t identical = 0, total = 0;
  double merged_diff = 0.0;
  for (std::size_t i = 0; i < 50; ++i) {
    TransformerWeights w = init_weights(tiny_model(100 + i));
    const RandomPrompt p = random_prompt(rng, vocab, w.config.max_seq_len);
    if (p.spec.tasks.size() != 1) {
      --i;
      continue;
    }
    const ClassMapping& m = p.spec.tasks[0].mapping;
    const ClassDistribution plain = classify(w, nullptr, p.compiled, m);
    AdapterSet adapters = attach(w, LoraConfig{}, i);
    const ClassDistribution fresh = classify(w, &adapters, p.compiled, m);
    ++total;
    identical += plain.probabilities == fresh.probabilities && plain.raw_logits == fresh.raw_logits &&
                 predict_index(plain) == predict_index(fresh);
    randomize_b(adapters, i, 0.5);
    NoGradGuard no_grad;
    const Tensor a = forward(w, &adapters, p.compiled.token_ids);
    const Tensor b = forward(merge(w, adapters), nullptr, p.compiled.token_ids);
    for (std::size_t j = 0; j < a.size(); ++j)
      merged_diff = std::max(merged_diff, std::abs(a.values()[j] - b.values()[j]));
  }
  return {identical == total && merged_diff <= 1e-9,
          std::to_string(identical) + "/" + std::to_string(total) +
              " decisions bit-identical with B=0; merged vs adapter max logit diff " + fmt(merged_diff)};
}

// 5. Noisy channel, Bayes accuracy 0.9.
Outcome learning() {
  const Workspace ws = workspace(
      "task.kind = noisy_channel\ntask.keyword = z\ntask.noise = 0.1\ntask.seed = 5\n"
      "task.n_test = 500\nprompt.strategy = numerical\nrun.seeds = 5\n",
      "noisy");
  const auto t0 = Clock::now();
  std::ostringstream quiet;
  const TrainSummary s = cmd_train(ws, quiet);
  const double secs = seconds_since(t0);
  std::string per_seed;
  for (const auto& r : s.sweep.runs) per_seed += (per_seed.empty() ? "" : " ") + fmt(*r.test, 3);
  return {s.sweep.test_mean >= 0.85 && secs < 300.0,
          "5-seed mean test accuracy " + fmt(s.sweep.test_mean) + " [" + per_seed + "], " +
              fmt(secs, 3) + " s"};
}

// 6. SALSA against the linear-head baseline at step 0 and the first eval.
Outcome convergence() {
  const Workspace ws = workspace(
      "task.kind = keyword\ntask.keyword = z\ntask.seed = 9\nprompt.strategy = semantic\n"
      "run.seeds = 5\ntrain.max_steps = 100\ntrain.warmup_steps = 10\n",
      "compare");
  std::ostringstream quiet;
  const CompareReport r = cmd_compare(ws, quiet);
  bool ok = r.points.size() >= 2;
  std::string detail;
  for (std::size_t k = 0; k < std::min<std::size_t>(2, r.points.size()); ++k) {
    const double a = mean_of(r.points[k].salsa_val), b = mean_of(r.points[k].baseline_val);
    ok = ok && a >= b;
    detail += (detail.empty() ? "" : "; ") + std::string("step ") + std::to_string(r.points[k].step) +
              " salsa " + fmt(a) + " vs baseline " + fmt(b);
  }
  return {ok, detail + " (5-seed mean val accuracy)"};
}

// 7. Target encoding round trip and Pearson on perfect predictions.
Outcome regression_round_trip() {
  const Vocabulary vocab = Vocabulary::standard();
  static const std::string labels = "0123456789abcdefghijklmnopqrstuvwxyz";
  std::vector<double> states;
  std::vector<std::pair<std::string, std::string>> pairs;
  for (std::size_t i = 0; i <= 25; ++i) {
    states.push_back(static_cast<double>(i) * 0.2);
    pairs.emplace_back("s" + std::to_string(i), std::string(1, labels[i]));
  }
  const ClassMapping mapping = make_mapping(vocab, pairs);
  const DiscreteGrid grid(states, mapping);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  double worst = 0.0;
  std::vector<double> truth, predicted;
  for (int i = 0; i < 1000; ++i) {
    const double y = u(rng);
    const double back = expected_value(grid.states(), encode_target(grid, y));
    worst = std::max(worst, std::abs(back - y));
    truth.push_back(y);
    predicted.push_back(back);
  }
  const double r = pearson(predicted, truth);
  return {worst <= 1e-12 && std::abs(r - 1.0) <= 1e-12,
          "max round-trip error " + fmt(worst) + " over 1000 targets; Pearson " + fmt(r, 17)};
}

// 8. Predicted-positive sets shrink as tau rises. A 40-step checkpoint sits
// mid-way between the prior and the learned rule, so P(yes) spreads over the
// middle of the range.
Outcome threshold_monotonicity() {
  const Workspace ws = workspace(
      "task.kind = keyword\ntask.keyword = z\ntask.seed = 31\ntask.n_test = 500\n"
      "prompt.strategy = numerical\ntrain.max_steps = 40\ntrain.warmup_steps = 2\n"
      "train.eval_every = 40\n",
      "threshold");
  const TrainResult trained =
      run_training(ws.base, ws.prompt, ws.vocab, ws.data.train, ws.data.val, ws.config.train);
  std::vector<ClassDistribution> dists;
  std::vector<std::string> truth;
  for (const auto& sample : ws.data.test) {
    dists.push_back(classify(ws.base, &trained.final_adapters,
                             compile(ws.prompt, ws.vocab, sample.fields, ws.base.config.max_seq_len),
                             ws.task().mapping));
    truth.push_back(sample.label);
  }
  std::vector<double> taus;
  for (int t = 1; t <= 9; ++t) taus.push_back(t / 10.0);
  const auto rows = threshold_table(dists, truth, "yes", taus);
  bool chain = true;
  std::string sizes;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    sizes += (sizes.empty() ? "" : ",") + std::to_string(rows[k].predicted_positive);
    if (k == 0) continue;
    const std::set<std::size_t> prev(rows[k - 1].positive_ids.begin(), rows[k - 1].positive_ids.end());
    for (std::size_t id : rows[k].positive_ids) chain = chain && prev.count(id) == 1;
  }
  return {chain && dists.size() == 500,
          "positive set sizes for tau 0.1..0.9: " + sizes + " on 500 samples"};
}

// 9. Mapping ablation over all six strategies.
Outcome ablation() {
  const Workspace ws = workspace(
      "task.kind = keyword\ntask.keyword = z\ntask.seed = 7\nrun.seeds = 2\n", "ablate");
  const auto t0 = Clock::now();
  std::ostringstream quiet;
  const AblationReport r = cmd_ablate(ws, quiet);
  const double secs = seconds_since(t0);
  std::string zs, ft;
  for (const auto& row : r.rows) {
    zs += (zs.empty() ? "" : " ") + fmt(row.zero_shot, 3);
    ft += (ft.empty() ? "" : " ") + fmt(row.finetuned_mean, 3);
  }
  return {r.rows.size() == 6 && r.finetuned_std < r.zero_shot_std && secs < 1800.0,
          "std across strategies: fine-tuned " + fmt(r.finetuned_std) + " < zero-shot " +
              fmt(r.zero_shot_std) + "; zero-shot [" + zs + "], fine-tuned [" + ft + "], " +
              fmt(secs, 3) + " s"};
}

// 10. Cross-entropy hand values.
Outcome cross_entropy_values() {
  const double single = cross_entropy(Tensor({1, 2}, {0.5, 0.5}), Tensor({1, 2}, {1.0, 0.0})).item();
  const double pair =
      cross_entropy(Tensor({2, 2}, {0.5, 0.5, 0.25, 0.75}), Tensor({2, 2}, {1.0, 0.0, 0.0, 1.0})).item();
  const double e1 = std::abs(single - std::log(2.0));
  const double e2 = std::abs(pair - (std::log(2.0) + std::log(4.0 / 3.0)) / 2.0);
  return {e1 <= 1e-12 && e2 <= 1e-12,
          "ln 2 case error " + fmt(e1) + ", two-sample case error " + fmt(e2)};
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// 11. Identical configs give identical logs and checkpoints.
Outcome determinism() {
  const std::string cfg =
      "task.kind = keyword\ntask.keyword = z\ntask.seed = 13\nprompt.strategy = numerical\n"
      "train.max_steps = 100\ntrain.warmup_steps = 10\ntrain.eval_every = 50\n";
  std::ostringstream quiet;
  const Workspace a = workspace(cfg, "determinism_a");
  const Workspace b = workspace(cfg, "determinism_b");
  const TrainSummary ra = cmd_train(a, quiet);
  const TrainSummary rb = cmd_train(b, quiet);
  const bool logs = ra.sweep.runs[0].result.log == rb.sweep.runs[0].result.log;
  std::size_t files = 0, same = 0;
  for (const auto& entry : fs::directory_iterator(g_work / "determinism_a")) {
    const std::string name = entry.path().filename().string();
    if (name == "config.txt") continue;  // records the output directory
    ++files;
    same += read_bytes(entry.path()) == read_bytes(g_work / "determinism_b" / name);
  }
  return {logs && files > 0 && same == files,
          std::string("train logs ") + (logs ? "identical" : "differ") + "; " + std::to_string(same) +
              "/" + std::to_string(files) + " output files byte-identical (dropout on)"};
}

// 2. Every classify call made one forward pass. Checked last, over the
// whole run, plus one explicit multi-task call.
Outcome single_pass() {
  const Vocabulary vocab = Vocabulary::standard();
  TransformerWeights w = init_weights(tiny_model(5));
  SyntheticTaskSpec s;
  s.kind = TaskKind::kTopic;
  const PromptSpec spec = default_prompt(s, vocab, MappingStrategy::kNumerical, true);
  const CompiledPrompt p = compile(spec, vocab, generate(s).test[0].fields, w.config.max_seq_len);
  ForwardCounter counter;
  classify_multitask(w, nullptr, p, {spec.tasks[0].mapping, spec.tasks[1].mapping}, &counter);
  const ClassifyAudit audit = classify_audit();
  return {counter.passes == 1 && audit.calls > 0 && audit.calls == audit.passes,
          std::to_string(audit.calls) + " classify calls, " + std::to_string(audit.passes) +
              " forward passes; multi-task call used " + std::to_string(counter.passes)};
}

}  // namespace

int main(int argc, char** argv) {
  g_work = fs::absolute(argc > 1 ? argv[1] : "acceptance_work");
  fs::create_directories(g_work);

  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> order = {
      {1, "gradient correctness", gradient_correctness},
      {3, "oracle equivalence", oracle_equivalence},
      {4, "zero-init, no cold start", zero_init},
      {7, "regression round trip", regression_round_trip},
      {8, "threshold monotonicity", threshold_monotonicity},
      {10, "cross-entropy hand values", cross_entropy_values},
      {5, "learning on the noisy channel", learning},
      {6, "convergence against the baseline", convergence},
      {9, "mapping ablation", ablation},
      {11, "determinism", determinism},
      {2, "single-pass guarantee", single_pass},
  };
  std::map<int, std::string> lines;
  bool all = true;
  for (const auto& c : order) {
    Outcome o;
    const auto t0 = Clock::now();
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    all = all && o.pass;
    std::ostringstream line;
    line << (o.pass ? "PASS" : "FAIL") << "  " << c.id << ". " << c.name << ": " << o.detail;
    lines[c.id] = line.str();
    std::cout << "[" << fmt(seconds_since(t0), 3) << " s] " << line.str() << std::endl;
  }
  std::cout << "\nsummary\n";
  for (const auto& [id, line] : lines) std::cout << line << "\n";
  std::cout << (all ? "all criteria pass" : "some criteria FAIL") << std::endl;
  return all ? 0 : 1;
}
