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

// Experiment harness: run configs, base-model resolution and the commands
// behind the `salsa` CLI. Every command writes plot-ready CSV whose first
// line is "# config_hash=<hex>" followed by a header row.

#ifndef SALSA_HARNESS_HPP_
#define SALSA_HARNESS_HPP_

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "salsa/data.hpp"
#include "salsa/inference.hpp"
#include "salsa/lora.hpp"
#include "salsa/model.hpp"
#include "salsa/prompt.hpp"
#include "salsa/regression.hpp"
#include "salsa/tokenizer.hpp"
#include "salsa/training.hpp"

namespace salsa {

// ---------------------------------------------------------------------------
// Run configuration: "key = value" lines, '#' comments, unknown keys rejected.

struct RunConfig {
  ModelConfig model;
  SyntheticTaskSpec task;
  std::string train_path, val_path, test_path;  // TSV files replace the generator
  std::string prompt_path;
  MappingStrategy strategy = MappingStrategy::kNumerical;
  bool source_task = false;
  std::size_t few_shot = 0;
  std::uint64_t few_shot_seed = 0;
  std::string base_checkpoint;  // pretrained base weights
  bool pretrain = false;        // build (and cache) a base when none is given
  std::string pretrain_cache;   // default: <out_dir>/base
  PretrainConfig pretrain_config;
  TrainConfig train;
  std::size_t seeds = 1;
  std::string eval_split = "test";
  std::vector<double> taus;  // empty: 0, 0.1, ..., 1
  std::string positive_class;
  std::size_t oracle_samples = 200;
  std::string out_dir = "salsa_out";
};

namespace detail {

struct ConfigField {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
  bool path = false;    // resolved against the config file's directory
  bool hashed = true;   // part of the provenance hash
};

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  unsigned long long out = 0;
  try {
    if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
    out = std::stoull(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) {
    raise(ErrorKind::kConfiguration, "key '", key, "' needs a non-negative integer, got '", v, "'");
  }
  return out;
}

inline double parse_real(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) {
    raise(ErrorKind::kConfiguration, "key '", key, "' needs a number, got '", v, "'");
  }
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  raise(ErrorKind::kConfiguration, "key '", key, "' needs true or false, got '", v, "'");
}

inline std::vector<std::string> split_commas(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream in(v);
  std::string item;
  while (std::getline(in, item, ',')) {
    const std::string t = trim(item);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

inline std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ",") + s;
  return out;
}

inline std::string num(double v) { return format_number(v); }

#define SALSA_UINT_FIELD(KEY, MEMBER)                                                       \
  ConfigField {                                                                             \
    KEY, [](RunConfig& c, const std::string& v) { c.MEMBER = parse_uint(KEY, v); },        \
        [](const RunConfig& c) { return std::to_string(c.MEMBER); }                         \
  }
#define SALSA_REAL_FIELD(KEY, MEMBER)                                                       \
  ConfigField {                                                                             \
    KEY, [](RunConfig& c, const std::string& v) { c.MEMBER = parse_real(KEY, v); },        \
        [](const RunConfig& c) { return num(c.MEMBER); }                                    \
  }
#define SALSA_BOOL_FIELD(KEY, MEMBER)                                                       \
  ConfigField {                                                                             \
    KEY, [](RunConfig& c, const std::string& v) { c.MEMBER = parse_bool(KEY, v); },        \
        [](const RunConfig& c) { return std::string(c.MEMBER ? "true" : "false"); }        \
  }
#define SALSA_STRING_FIELD(KEY, MEMBER, PATH)                                               \
  ConfigField {                                                                             \
    KEY, [](RunConfig& c, const std::string& v) { c.MEMBER = v; },                          \
        [](const RunConfig& c) { return c.MEMBER; }, PATH                                   \
  }

inline const std::vector<ConfigField>& config_fields() {
  static const std::vector<ConfigField> fields = {
      SALSA_UINT_FIELD("model.d_model", model.d_model),
      SALSA_UINT_FIELD("model.n_layers", model.n_layers),
      SALSA_UINT_FIELD("model.n_heads", model.n_heads),
      SALSA_UINT_FIELD("model.d_ff", model.d_ff),
      SALSA_UINT_FIELD("model.max_seq_len", model.max_seq_len),
      SALSA_UINT_FIELD("model.seed", model.seed),
      {"task.kind", [](RunConfig& c, const std::string& v) { c.task.kind = parse_task_kind(v); },
       [](const RunConfig& c) { return std::string(to_string(c.task.kind)); }},
      SALSA_STRING_FIELD("task.alphabet", task.alphabet, false),
      {"task.keyword",
       [](RunConfig& c, const std::string& v) {
         if (v.size() != 1) raise(ErrorKind::kConfiguration, "task.keyword must be one character");
         c.task.keyword = v[0];
       },
       [](const RunConfig& c) { return std::string(1, c.task.keyword); }},
      SALSA_REAL_FIELD("task.noise", task.noise),
      SALSA_UINT_FIELD("task.length", task.length),
      SALSA_UINT_FIELD("task.seed", task.seed),
      SALSA_UINT_FIELD("task.n_train", task.n_train),
      SALSA_UINT_FIELD("task.n_val", task.n_val),
      SALSA_UINT_FIELD("task.n_test", task.n_test),
      SALSA_STRING_FIELD("data.train", train_path, true),
      SALSA_STRING_FIELD("data.val", val_path, true),
      SALSA_STRING_FIELD("data.test", test_path, true),
      SALSA_STRING_FIELD("prompt.file", prompt_path, true),
      {"prompt.strategy",
       [](RunConfig& c, const std::string& v) { c.strategy = parse_strategy(v); },
       [](const RunConfig& c) { return std::string(to_string(c.strategy)); }},
      SALSA_BOOL_FIELD("prompt.source_task", source_task),
      SALSA_UINT_FIELD("prompt.few_shot", few_shot),
      SALSA_UINT_FIELD("prompt.few_shot_seed", few_shot_seed),
      SALSA_STRING_FIELD("base.checkpoint", base_checkpoint, true),
      SALSA_BOOL_FIELD("base.pretrain", pretrain),
      SALSA_STRING_FIELD("pretrain.cache", pretrain_cache, true),
      SALSA_UINT_FIELD("pretrain.samples", pretrain_config.samples),
      SALSA_UINT_FIELD("pretrain.grad_accum_steps", pretrain_config.grad_accum_steps),
      SALSA_REAL_FIELD("pretrain.peak_lr", pretrain_config.peak_lr),
      SALSA_UINT_FIELD("pretrain.warmup_steps", pretrain_config.warmup_steps),
      SALSA_UINT_FIELD("pretrain.seed", pretrain_config.seed),
      SALSA_STRING_FIELD("pretrain.keywords", pretrain_config.keywords, false),
      {"pretrain.kinds",
       [](RunConfig& c, const std::string& v) {
         c.pretrain_config.kinds.clear();
         for (const auto& k : split_commas(v)) c.pretrain_config.kinds.push_back(parse_task_kind(k));
       },
       [](const RunConfig& c) {
         std::vector<std::string> names;
         for (TaskKind k : c.pretrain_config.kinds) names.push_back(to_string(k));
         return join(names);
       }},
      {"pretrain.strategies",
       [](RunConfig& c, const std::string& v) {
         c.pretrain_config.strategies.clear();
         for (const auto& s : split_commas(v)) c.pretrain_config.strategies.push_back(parse_strategy(s));
       },
       [](const RunConfig& c) {
         std::vector<std::string> names;
         for (MappingStrategy s : c.pretrain_config.strategies) names.push_back(to_string(s));
         return join(names);
       }},
      SALSA_UINT_FIELD("train.epochs", train.epochs),
      SALSA_UINT_FIELD("train.grad_accum_steps", train.grad_accum_steps),
      SALSA_UINT_FIELD("train.micro_batch", train.micro_batch),
      SALSA_REAL_FIELD("train.peak_lr", train.peak_lr),
      SALSA_UINT_FIELD("train.warmup_steps", train.warmup_steps),
      SALSA_REAL_FIELD("train.adam_beta1", train.adam_beta1),
      SALSA_REAL_FIELD("train.adam_beta2", train.adam_beta2),
      SALSA_REAL_FIELD("train.adam_eps", train.adam_eps),
      SALSA_UINT_FIELD("train.seed", train.seed),
      SALSA_UINT_FIELD("train.shuffle_seed", train.shuffle_seed),
      SALSA_UINT_FIELD("train.eval_every", train.eval_every),
      SALSA_UINT_FIELD("train.max_steps", train.max_steps),
      SALSA_BOOL_FIELD("train.eval_train", train.eval_train),
      SALSA_UINT_FIELD("lora.rank", train.lora.rank),
      SALSA_REAL_FIELD("lora.alpha", train.lora.alpha),
      SALSA_REAL_FIELD("lora.dropout", train.lora.dropout_p),
      {"lora.targets",
       [](RunConfig& c, const std::string& v) { c.train.lora.targets = split_commas(v); },
       [](const RunConfig& c) { return join(c.train.lora.targets); }},
      SALSA_UINT_FIELD("run.seeds", seeds),
      {"eval.split",
       [](RunConfig& c, const std::string& v) {
         if (v != "train" && v != "val" && v != "test") {
           raise(ErrorKind::kConfiguration, "eval.split must be train, val or test, got '", v, "'");
         }
         c.eval_split = v;
       },
       [](const RunConfig& c) { return c.eval_split; }},
      {"sweep.taus",
       [](RunConfig& c, const std::string& v) {
         c.taus.clear();
         for (const auto& t : split_commas(v)) c.taus.push_back(parse_real("sweep.taus", t));
       },
       [](const RunConfig& c) {
         std::vector<std::string> items;
         for (double t : c.taus) items.push_back(num(t));
         return join(items);
       }},
      SALSA_STRING_FIELD("sweep.positive_class", positive_class, false),
      SALSA_UINT_FIELD("oracle.samples", oracle_samples),
      {"output.dir", [](RunConfig& c, const std::string& v) { c.out_dir = v; },
       [](const RunConfig& c) { return c.out_dir; }, true, false},
  };
  return fields;
}

#undef SALSA_UINT_FIELD
#undef SALSA_REAL_FIELD
#undef SALSA_BOOL_FIELD
#undef SALSA_STRING_FIELD

inline const ConfigField* find_field(const std::string& key) {
  for (const auto& f : config_fields())
    if (f.key == key) return &f;
  return nullptr;
}

}  // namespace detail

/// Applies one setting; unknown keys are configuration errors naming the key.
inline void set_config_value(RunConfig& config, const std::string& key, const std::string& value) {
  const detail::ConfigField* field = detail::find_field(key);
  if (!field) raise(ErrorKind::kConfiguration, "unknown config key '", key, "'");
  field->set(config, value);
}

/// Parses "key = value" text. Relative paths resolve against `base_dir`.
inline RunConfig parse_run_config(std::string_view text, const std::string& origin = "<config>",
                                  const std::filesystem::path& base_dir = {}) {
  RunConfig config;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  std::map<std::string, std::size_t> seen;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string stripped = detail::trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      raise(ErrorKind::kConfiguration, origin, ":", line_no, ": expected 'key = value'");
    }
    const std::string key = detail::trim(stripped.substr(0, eq));
    std::string value = detail::trim(stripped.substr(eq + 1));
    if (auto [it, fresh] = seen.emplace(key, line_no); !fresh) {
      raise(ErrorKind::kConfiguration, origin, ":", line_no, ": key '", key,
            "' already set on line ", it->second);
    }
    const detail::ConfigField* field = detail::find_field(key);
    if (!field) raise(ErrorKind::kConfiguration, origin, ":", line_no, ": unknown config key '", key, "'");
    if (field->path && !value.empty() && !base_dir.empty() &&
        std::filesystem::path(value).is_relative()) {
      value = (base_dir / value).lexically_normal().string();
    }
    try {
      field->set(config, value);
    } catch (const Error& e) {
      raise(ErrorKind::kConfiguration, origin, ":", line_no, ": ", e.what());
    }
  }
  return config;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::kConfiguration, "cannot read config file ", path);
  std::stringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str(), path, std::filesystem::path(path).parent_path());
}

/// Every effective setting, one "key = value" line each, in a fixed order.
inline std::string format_run_config(const RunConfig& config, bool hashed_only = false) {
  std::ostringstream out;
  for (const auto& f : detail::config_fields()) {
    if (hashed_only && !f.hashed) continue;
    out << f.key << " = " << f.get(config) << "\n";
  }
  return out.str();
}

/// FNV-1a over the canonical settings (output location excluded).
inline std::string config_hash(const RunConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : format_run_config(config, true)) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

// ---------------------------------------------------------------------------
// Resolving data, prompt and base weights.

struct Workspace {
  RunConfig config;
  Vocabulary vocab;
  SplitDataset data;
  PromptSpec prompt;
  TransformerWeights base;
  std::string hash;

  const Dataset& split(const std::string& name) const {
    if (name == "train") return data.train;
    if (name == "val") return data.val;
    return data.test;
  }
  const TaskBlock& task() const { return prompt.tasks.front(); }
  bool regression() const { return !task().grid.empty(); }
  std::string metric() const { return regression() ? "pearson" : "accuracy"; }
};

namespace detail {

inline void require_file(const std::string& path, const std::string& what) {
  if (!std::filesystem::exists(path)) {
    raise(ErrorKind::kConfiguration, what, " '", path, "' does not exist");
  }
}

inline bool checkpoint_exists(const std::string& prefix) {
  return std::filesystem::exists(prefix + ".manifest");
}

inline void require_same_model(const ModelConfig& expected, const ModelConfig& found,
                               const std::string& what) {
  const auto mismatched = config_mismatches(expected, found);
  if (mismatched.empty()) return;
  std::string joined;
  for (const auto& m : mismatched) joined += (joined.empty() ? "" : ", ") + m;
  raise(ErrorKind::kCompatibility, what, " does not match the model config: ", joined);
}

inline SplitDataset load_data(const RunConfig& c, const PromptSpec& prompt) {
  const bool any_file = !c.train_path.empty() || !c.val_path.empty() || !c.test_path.empty();
  if (!any_file) return generate(c.task);
  TsvSchema schema = tsv_schema(c.task);
  const TaskBlock& task = prompt.tasks.front();
  schema.regression = !task.grid.empty();
  schema.classes = schema.regression ? std::vector<std::string>{} : task.mapping.class_names();
  if (prompt.tasks.size() > 1) {
    schema.label2_column = prompt.tasks[1].name;
    schema.classes2 = prompt.tasks[1].mapping.class_names();
  } else {
    schema.label2_column.clear();
  }
  SplitDataset d;
  for (auto [path, split, name] : {std::tuple{&c.train_path, &d.train, "data.train"},
                                   std::tuple{&c.val_path, &d.val, "data.val"},
                                   std::tuple{&c.test_path, &d.test, "data.test"}}) {
    if (path->empty()) raise(ErrorKind::kConfiguration, name, " is required when any data file is given");
    require_file(*path, name);
    *split = load_tsv(*path, schema);
    if (split->empty()) raise(ErrorKind::kConfiguration, name, " '", *path, "' has no samples");
  }
  return d;
}

}  // namespace detail

/// Loads or builds the base weights the config asks for.
inline TransformerWeights resolve_base(const RunConfig& c, const Vocabulary& vocab,
                                       std::ostream* log = nullptr) {
  ModelConfig expected = c.model;
  expected.vocab_size = vocab.size();
  if (!c.base_checkpoint.empty()) {
    if (!detail::checkpoint_exists(c.base_checkpoint)) {
      raise(ErrorKind::kConfiguration, "base.checkpoint '", c.base_checkpoint,
            "' does not exist (expected ", c.base_checkpoint, ".manifest)");
    }
    TransformerWeights w = load_model(c.base_checkpoint);
    detail::require_same_model(expected, w.config, "base checkpoint");
    return w;
  }
  if (!c.pretrain) return init_weights(expected);
  const std::string cache =
      c.pretrain_cache.empty() ? (std::filesystem::path(c.out_dir) / "base").string() : c.pretrain_cache;
  // The cache is only reused when it was built with the same settings.
  std::ostringstream settings;
  const PretrainConfig& pc = c.pretrain_config;
  settings << format_number(pc.peak_lr) << "/" << pc.samples << "/" << pc.grad_accum_steps << "/"
           << pc.warmup_steps << "/" << pc.seed << "/" << pc.keywords << "/"
           << detail::find_field("pretrain.kinds")->get(c) << "/"
           << detail::find_field("pretrain.strategies")->get(c);
  if (detail::checkpoint_exists(cache)) {
    const Checkpoint ck = load_checkpoint(cache);
    const std::string* tag = ck.find_meta("pretrain");
    if (tag && *tag == settings.str()) {
      TransformerWeights w = load_model(cache);
      if (config_mismatches(expected, w.config).empty() && w.config.seed == expected.seed) {
        if (log) *log << "using cached base " << cache << "\n";
        return w;
      }
    }
  }
  if (log) *log << "pretraining base model (" << pc.samples << " samples)\n";
  TransformerWeights w = pretrain_base(expected, vocab, pc);
  Checkpoint ck = model_checkpoint(w);
  ck.meta.emplace_back("pretrain", settings.str());
  std::filesystem::path dir = std::filesystem::path(cache).parent_path();
  if (!dir.empty()) std::filesystem::create_directories(dir);
  save_checkpoint(ck, cache);
  return w;
}

inline PromptSpec resolve_prompt(const RunConfig& c, const Vocabulary& vocab) {
  if (!c.prompt_path.empty()) {
    detail::require_file(c.prompt_path, "prompt.file");
    return load_prompt_spec(c.prompt_path, vocab);
  }
  return default_prompt(c.task, vocab, c.strategy, c.source_task);
}

inline Workspace open_workspace(const RunConfig& c, std::ostream* log = nullptr) {
  Workspace ws;
  ws.config = c;
  ws.vocab = Vocabulary::standard();
  ws.hash = config_hash(c);
  ws.prompt = resolve_prompt(c, ws.vocab);
  ws.data = detail::load_data(c, ws.prompt);
  if (c.few_shot > 0) {
    ws.prompt.few_shot = to_few_shot(sample_few_shot(
        ws.data.train, ws.task().mapping.class_names(), c.few_shot, c.few_shot_seed));
  }
  ws.base = resolve_base(c, ws.vocab, log);
  return ws;
}

// ---------------------------------------------------------------------------
// Output helpers.

inline std::filesystem::path output_path(const Workspace& ws, const std::string& name) {
  std::filesystem::create_directories(ws.config.out_dir);
  return std::filesystem::path(ws.config.out_dir) / name;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) raise(ErrorKind::kIo, "cannot write ", path.string());
  out << text;
}

/// CSV with the provenance line and a header row.
inline void write_csv(const std::filesystem::path& path, const std::string& hash,
                      const std::string& header, const std::vector<std::string>& rows) {
  std::ostringstream out;
  out << "# config_hash=" << hash << "\n" << header << "\n";
  for (const auto& r : rows) out << r << "\n";
  write_text(path, out.str());
}

inline std::vector<Example> examples_of(const Workspace& ws, const std::string& split) {
  return make_examples(ws.prompt, ws.vocab, ws.split(split), ws.base.config.max_seq_len);
}

inline AdapterSet load_checkpoint_adapters(const Workspace& ws, const std::string& checkpoint) {
  if (!detail::checkpoint_exists(checkpoint)) {
    raise(ErrorKind::kConfiguration, "checkpoint '", checkpoint, "' does not exist");
  }
  return load_adapters(checkpoint, ws.base.config);
}

// ---------------------------------------------------------------------------
// train

struct TrainSummary {
  SweepResult sweep;
  std::string metric;
};

inline TrainSummary cmd_train(const Workspace& ws, std::ostream& log) {
  const RunConfig& c = ws.config;
  TrainSummary summary;
  summary.metric = ws.metric();
  summary.sweep = run_seed_sweep(ws.base, ws.prompt, ws.vocab, ws.data.train, ws.data.val,
                                 &ws.data.test, c.train, c.seeds);
  std::vector<std::string> rows;
  for (const SweepRun& run : summary.sweep.runs) {
    const std::string tag = "seed" + std::to_string(run.seed);
    write_text(output_path(ws, "train_steps_" + tag + ".csv"),
               step_csv(run.result.log, "config_hash=" + ws.hash));
    write_text(output_path(ws, "train_evals_" + tag + ".csv"),
               eval_csv(run.result.log, "config_hash=" + ws.hash));
    save_adapters(run.result.best_adapters, ws.base.config,
                  output_path(ws, "adapters_" + tag).string(),
                  {{"best_step", std::to_string(run.result.best_step)},
                   {"best_val", format_number(run.best_val)},
                   {"config_hash", ws.hash}});
    const double final_val =
        run.result.log.eval_value(run.result.log.eval_steps().back(), "val", summary.metric)
            .value_or(0.0);
    rows.push_back(std::to_string(run.seed) + "," + std::to_string(run.result.best_step) + "," +
                   format_number(run.best_val) + "," + format_number(final_val) + "," +
                   format_number(run.test.value_or(0.0)));
    log << "seed " << run.seed << ": best val " << summary.metric << " " << run.best_val
        << " at step " << run.result.best_step << ", test " << run.test.value_or(0.0) << "\n";
  }
  const SweepResult& s = summary.sweep;
  rows.push_back("mean,," + format_number(s.val_mean) + ",," + format_number(s.test_mean));
  rows.push_back("std,," + format_number(s.val_std) + ",," + format_number(s.test_std));
  write_csv(output_path(ws, "train_summary.csv"), ws.hash,
            "seed,best_step,best_val,final_val,test", rows);
  write_text(output_path(ws, "config.txt"), format_run_config(c));
  log << "val " << summary.metric << " " << s.val_mean << " +- " << s.val_std << ", test "
      << s.test_mean << " +- " << s.test_std << " over " << s.runs.size() << " seed(s)\n";
  return summary;
}

// ---------------------------------------------------------------------------
// eval / predict

inline nlohmann::json prediction_json(const Workspace& ws, const Example& e,
                                      const ClassDistribution& dist) {
  nlohmann::json j = prediction_record(e.id, dist);
  if (ws.regression()) j["expected_value"] = expected_value(ws.task().grid, dist.probabilities);
  return j;
}

inline std::vector<nlohmann::json> predictions(const Workspace& ws, const AdapterSet* adapters,
                                               const std::vector<Example>& examples) {
  std::vector<nlohmann::json> records;
  for (const Example& e : examples) {
    records.push_back(prediction_json(ws, e, classify(ws.base, adapters, e.prompt, ws.task().mapping)));
  }
  return records;
}

inline EvalResult cmd_eval(const Workspace& ws, const std::string& checkpoint, std::ostream& log) {
  AdapterSet adapters;
  const AdapterSet* active = nullptr;
  if (!checkpoint.empty()) {
    adapters = load_checkpoint_adapters(ws, checkpoint);
    active = &adapters;
  }
  const auto examples = examples_of(ws, ws.config.eval_split);
  const EvalResult r = evaluate_salsa(ws.base, active, ws.prompt, examples);
  std::vector<std::string> rows{"split," + ws.config.eval_split,
                                "samples," + std::to_string(examples.size()),
                                "loss," + format_number(r.mean_loss)};
  if (r.regression) {
    rows.push_back("pearson," + format_number(r.pearson));
    rows.push_back("spearman," + format_number(r.spearman));
  } else {
    rows.push_back("accuracy," + format_number(r.accuracy));
  }
  write_csv(output_path(ws, "eval_metrics.csv"), ws.hash, "metric,value", rows);
  write_jsonl(output_path(ws, "predictions.jsonl").string(), predictions(ws, active, examples));
  log << (checkpoint.empty() ? "zero-shot " : "") << ws.config.eval_split << " "
      << (r.regression ? "pearson " + format_number(r.pearson) + " spearman " +
                             format_number(r.spearman)
                       : "accuracy " + format_number(r.accuracy))
      << " on " << examples.size() << " samples\n";
  return r;
}

inline std::size_t cmd_predict(const Workspace& ws, const std::string& checkpoint, std::ostream& log) {
  AdapterSet adapters;
  const AdapterSet* active = nullptr;
  if (!checkpoint.empty()) {
    adapters = load_checkpoint_adapters(ws, checkpoint);
    active = &adapters;
  }
  const auto examples = examples_of(ws, ws.config.eval_split);
  const auto path = output_path(ws, "predictions.jsonl");
  write_jsonl(path.string(), predictions(ws, active, examples));
  log << "wrote " << examples.size() << " predictions to " << path.string() << "\n";
  return examples.size();
}

// ---------------------------------------------------------------------------
// ablate: every mapping strategy, zero-shot and fine-tuned.

struct AblationRow {
  MappingStrategy strategy;
  double zero_shot = 0.0;
  std::vector<double> finetuned;  // one per seed
  double finetuned_mean = 0.0, finetuned_std = 0.0;
};

struct AblationReport {
  std::vector<AblationRow> rows;
  std::vector<std::string> skipped;
  double zero_shot_std = 0.0;  // across strategies
  double finetuned_std = 0.0;  // across strategies, of the per-strategy means
};

inline AblationReport cmd_ablate(const Workspace& ws, std::ostream& log) {
  if (ws.regression()) raise(ErrorKind::kConfiguration, "mapping ablation needs a classification task");
  if (ws.prompt.tasks.size() != 1) raise(ErrorKind::kArity, "mapping ablation needs a single-task prompt");
  AblationReport report;
  const auto names = ws.task().mapping.class_names();
  for (MappingStrategy st : kAllStrategies) {
    PromptSpec spec = ws.prompt;
    try {
      spec.tasks[0].mapping = build_mapping(ws.vocab, names, st);
    } catch (const Error& e) {
      log << "skipping " << to_string(st) << ": " << e.what() << "\n";
      report.skipped.push_back(to_string(st));
      continue;
    }
    const auto test = make_examples(spec, ws.vocab, ws.split(ws.config.eval_split),
                                    ws.base.config.max_seq_len);
    AblationRow row;
    row.strategy = st;
    row.zero_shot = evaluate_salsa(ws.base, nullptr, spec, test).accuracy;
    const SweepResult sweep = run_seed_sweep(ws.base, spec, ws.vocab, ws.data.train, ws.data.val,
                                             &ws.split(ws.config.eval_split), ws.config.train,
                                             ws.config.seeds);
    for (const auto& run : sweep.runs) row.finetuned.push_back(*run.test);
    row.finetuned_mean = sweep.test_mean;
    row.finetuned_std = sweep.test_std;
    log << to_string(st) << ": zero-shot " << row.zero_shot << ", fine-tuned "
        << row.finetuned_mean << " +- " << row.finetuned_std << "\n";
    report.rows.push_back(std::move(row));
  }
  std::vector<double> zs, ft, ft_std;
  std::vector<std::string> rows;
  for (const auto& r : report.rows) {
    zs.push_back(r.zero_shot);
    ft.push_back(r.finetuned_mean);
    ft_std.push_back(r.finetuned_std);
    rows.push_back(std::string(to_string(r.strategy)) + "," + format_number(r.zero_shot) + "," +
                   format_number(r.finetuned_mean) + "," + format_number(r.finetuned_std));
  }
  rows.push_back("mean," + format_number(mean_of(zs)) + "," + format_number(mean_of(ft)) + "," +
                 format_number(mean_of(ft_std)));
  report.zero_shot_std = stddev_of(zs);
  report.finetuned_std = stddev_of(ft);
  write_csv(output_path(ws, "ablation.csv"), ws.hash,
            "strategy,zero_shot,finetuned_mean,finetuned_std", rows);
  log << "std across strategies: zero-shot " << report.zero_shot_std << ", fine-tuned "
      << report.finetuned_std << "\n";
  return report;
}

// ---------------------------------------------------------------------------
// sweep: precision and recall of the positive class as tau moves.

struct ThresholdRow {
  double tau = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  std::size_t predicted_positive = 0;
  std::vector<std::size_t> positive_ids;  // indices of predicted positives
};

/// Precision is reported as 1 when nothing is predicted positive.
inline std::vector<ThresholdRow> threshold_table(const std::vector<ClassDistribution>& dists,
                                                 const std::vector<std::string>& truth,
                                                 const std::string& positive,
                                                 const std::vector<double>& taus) {
  std::size_t actual = 0;
  for (const auto& t : truth) actual += t == positive;
  std::vector<ThresholdRow> rows;
  for (double tau : taus) {
    ThresholdRow row;
    row.tau = tau;
    std::size_t tp = 0;
    for (std::size_t i = 0; i < dists.size(); ++i) {
      if (predict_with_threshold(dists[i], positive, tau) == positive) {
        row.positive_ids.push_back(i);
        tp += truth[i] == positive;
      }
    }
    row.predicted_positive = row.positive_ids.size();
    row.precision = row.predicted_positive ? static_cast<double>(tp) / row.predicted_positive : 1.0;
    row.recall = actual ? static_cast<double>(tp) / actual : 0.0;
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::vector<ThresholdRow> cmd_sweep(const Workspace& ws, const std::string& checkpoint,
                                           std::ostream& log) {
  if (ws.task().mapping.size() != 2 || ws.prompt.tasks.size() != 1) {
    raise(ErrorKind::kArity, "threshold sweeps need a single binary task, got ",
          ws.task().mapping.size(), " classes");
  }
  AdapterSet adapters;
  const AdapterSet* active = nullptr;
  if (!checkpoint.empty()) {
    adapters = load_checkpoint_adapters(ws, checkpoint);
    active = &adapters;
  }
  const std::string positive =
      ws.config.positive_class.empty() ? ws.task().mapping.class_names()[0] : ws.config.positive_class;
  ws.task().mapping.index_of(positive);  // label error for unknown classes
  std::vector<double> taus = ws.config.taus;
  if (taus.empty())
    for (int t = 0; t <= 10; ++t) taus.push_back(t / 10.0);
  std::vector<ClassDistribution> dists;
  std::vector<std::string> truth;
  for (const LabeledSample& s : ws.split(ws.config.eval_split)) {
    const CompiledPrompt p = compile(ws.prompt, ws.vocab, s.fields, ws.base.config.max_seq_len);
    dists.push_back(classify(ws.base, active, p, ws.task().mapping));
    truth.push_back(s.label);
  }
  auto table = threshold_table(dists, truth, positive, taus);
  std::vector<std::string> rows;
  for (const auto& r : table) {
    rows.push_back(format_number(r.tau) + "," + format_number(r.precision) + "," +
                   format_number(r.recall) + "," + std::to_string(r.predicted_positive));
  }
  write_csv(output_path(ws, "threshold_sweep.csv"), ws.hash,
            "tau,precision,recall,predicted_positive", rows);
  log << "swept " << taus.size() << " thresholds for positive class '" << positive << "' on "
      << dists.size() << " samples\n";
  return table;
}

// ---------------------------------------------------------------------------
// compare: SALSA against the linear-head baseline, aligned by step.

struct ComparePoint {
  std::size_t step = 0;
  std::vector<double> salsa_val, baseline_val;      // one per seed
  std::vector<double> salsa_train, baseline_train;  // when train evals are on
};

struct CompareReport {
  std::string metric;
  std::vector<ComparePoint> points;
};

inline CompareReport cmd_compare(const Workspace& ws, std::ostream& log) {
  CompareReport report;
  report.metric = ws.metric();
  std::vector<std::string> long_rows;
  for (std::size_t i = 0; i < ws.config.seeds; ++i) {
    TrainConfig c = ws.config.train;
    c.seed += i;
    c.shuffle_seed += i;
    const TrainResult salsa = run_training(ws.base, ws.prompt, ws.vocab, ws.data.train, ws.data.val, c);
    const TrainResult base = run_baseline(ws.base, ws.prompt, ws.vocab, ws.data.train, ws.data.val, c);
    const auto steps = salsa.log.eval_steps();
    if (steps != base.log.eval_steps()) raise(ErrorKind::kStructural, "eval steps differ between methods");
    if (report.points.empty())
      for (std::size_t s : steps) {
        report.points.emplace_back();
        report.points.back().step = s;
      }
    for (std::size_t k = 0; k < steps.size(); ++k) {
      ComparePoint& p = report.points[k];
      auto value = [&](const TrainResult& r, const char* split) {
        return r.log.eval_value(steps[k], split, report.metric).value_or(0.0);
      };
      p.salsa_val.push_back(value(salsa, "val"));
      p.baseline_val.push_back(value(base, "val"));
      if (c.eval_train) {
        p.salsa_train.push_back(value(salsa, "train"));
        p.baseline_train.push_back(value(base, "train"));
      }
      long_rows.push_back(std::to_string(c.seed) + "," + std::to_string(steps[k]) + "," +
                          format_number(p.salsa_val.back()) + "," +
                          format_number(p.baseline_val.back()));
    }
  }
  const bool train = ws.config.train.eval_train;
  std::vector<std::string> rows;
  for (const auto& p : report.points) {
    std::string row = std::to_string(p.step) + "," + format_number(mean_of(p.salsa_val)) + "," +
                      format_number(mean_of(p.baseline_val));
    if (train) row += "," + format_number(mean_of(p.salsa_train)) + "," + format_number(mean_of(p.baseline_train));
    rows.push_back(row);
  }
  const std::string m = report.metric;
  write_csv(output_path(ws, "compare.csv"), ws.hash,
            "step,salsa_val_" + m + ",baseline_val_" + m +
                (train ? ",salsa_train_" + m + ",baseline_train_" + m : ""),
            rows);
  write_csv(output_path(ws, "compare_seeds.csv"), ws.hash,
            "seed,step,salsa_val_" + m + ",baseline_val_" + m, long_rows);
  for (const auto& p : report.points) {
    log << "step " << p.step << ": salsa " << mean_of(p.salsa_val) << ", baseline "
        << mean_of(p.baseline_val) << "\n";
  }
  return report;
}

// ---------------------------------------------------------------------------
// oracle: classify against constrained greedy generation.

struct OracleReport {
  std::size_t samples = 0;
  std::size_t decisions = 0;  // one per task per sample
  std::size_t agreements = 0;
  std::size_t classify_passes = 0;
  std::size_t oracle_passes = 0;
  std::vector<std::size_t> histogram = std::vector<std::size_t>(10, 0);  // max probability
  double agreement() const { return decisions ? static_cast<double>(agreements) / decisions : 1.0; }
};

inline OracleReport oracle_check(const TransformerWeights& weights, const AdapterSet* adapters,
                                 const PromptSpec& spec, const Vocabulary& vocab,
                                 const Dataset& pool, std::size_t n) {
  if (n == 0) raise(ErrorKind::kConfiguration, "oracle needs at least one sample");
  if (pool.empty()) raise(ErrorKind::kConfiguration, "oracle needs a non-empty split");
  OracleReport report;
  std::vector<ClassMapping> mappings;
  for (const auto& t : spec.tasks) mappings.push_back(t.mapping);
  ForwardCounter classify_counter, oracle_counter;
  for (std::size_t i = 0; i < n; ++i) {
    const CompiledPrompt p = compile(spec, vocab, pool[i % pool.size()].fields, weights.config.max_seq_len);
    const auto dists = mappings.size() == 1
                           ? std::vector<ClassDistribution>{classify(weights, adapters, p, mappings[0], &classify_counter)}
                           : classify_multitask(weights, adapters, p, mappings, &classify_counter);
    const GenerationResult g = constrained_generate(weights, adapters, p, &oracle_counter);
    for (std::size_t k = 0; k < dists.size(); ++k) {
      ++report.decisions;
      report.agreements += predict_index(dists[k]) == g.class_index[k];
      const double top = *std::max_element(dists[k].probabilities.begin(), dists[k].probabilities.end());
      report.histogram[std::min<std::size_t>(9, static_cast<std::size_t>(top * 10.0))] += 1;
    }
    ++report.samples;
  }
  report.classify_passes = classify_counter.passes;
  report.oracle_passes = oracle_counter.passes;
  return report;
}

inline OracleReport cmd_oracle(const Workspace& ws, const std::string& checkpoint, std::ostream& log) {
  AdapterSet adapters;
  const AdapterSet* active = nullptr;
  if (!checkpoint.empty()) {
    adapters = load_checkpoint_adapters(ws, checkpoint);
    active = &adapters;
  }
  const OracleReport r = oracle_check(ws.base, active, ws.prompt, ws.vocab,
                                      ws.split(ws.config.eval_split), ws.config.oracle_samples);
  write_csv(output_path(ws, "oracle_report.csv"), ws.hash, "metric,value",
            {"samples," + std::to_string(r.samples), "decisions," + std::to_string(r.decisions),
             "agreement," + format_number(r.agreement()),
             "classify_passes," + std::to_string(r.classify_passes),
             "oracle_passes," + std::to_string(r.oracle_passes)});
  std::vector<std::string> rows;
  for (std::size_t b = 0; b < r.histogram.size(); ++b) {
    rows.push_back(format_number(b / 10.0) + "," + format_number((b + 1) / 10.0) + "," +
                   std::to_string(r.histogram[b]));
  }
  write_csv(output_path(ws, "oracle_histogram.csv"), ws.hash, "bin_low,bin_high,count", rows);
  log << "agreement " << r.agreement() << " on " << r.decisions << " decisions; classify used "
      << r.classify_passes << " forward passes, generation " << r.oracle_passes << "\n";
  return r;
}

// ---------------------------------------------------------------------------
// pretrain: build the base and store it at the cache location.

inline std::string cmd_pretrain(const RunConfig& config, std::ostream& log) {
  RunConfig c = config;
  c.pretrain = true;
  c.base_checkpoint.clear();
  const Vocabulary vocab = Vocabulary::standard();
  resolve_base(c, vocab, &log);
  const std::string cache =
      c.pretrain_cache.empty() ? (std::filesystem::path(c.out_dir) / "base").string() : c.pretrain_cache;
  log << "base model at " << cache << "\n";
  return cache;
}

/// Exit status for a library error: 2 for anything the user fixes in the
/// config or its inputs, 1 for runtime failures.
inline int exit_code(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::kConfiguration:
    case ErrorKind::kFormat:
    case ErrorKind::kCompatibility:
    case ErrorKind::kTemplate:
    case ErrorKind::kMapping:
    case ErrorKind::kLabel:
      return 2;
    default:
      return 1;
  }
}

}  // namespace salsa

#endif  // SALSA_HARNESS_HPP_
