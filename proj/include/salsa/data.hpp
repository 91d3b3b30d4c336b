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

// Synthetic tasks with known decision rules, TSV loading and few-shot
// sampling.
//
//   keyword        text contains the keyword letter -> yes / no
//   noisy_channel  keyword task whose observed labels are flipped for
//                  exactly round(noise * n_c) samples of every class c, so
//                  the clean rule scores 1 - noise (the Bayes rate)
//   topic          4 topics own disjoint letter groups; the topic owning a
//                  strict majority of the letters wins. Second label:
//                  source "ai" (upper case text) or "human" (lower case)
//   entailment     hypothesis (3 letters) is a substring of the premise
//   similarity     y = 5 * (matching positions) / length of two texts

#ifndef SALSA_DATA_HPP_
#define SALSA_DATA_HPP_

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "salsa/error.hpp"
#include "salsa/prompt.hpp"

namespace salsa {

struct LabeledSample {
  std::string id;
  Fields fields;
  std::string label;                  // class name; empty for regression
  std::optional<double> target;       // regression value
  std::optional<std::string> label2;  // second task (multi-task)

  /// Class names per task, in task order.
  std::vector<std::string> labels() const {
    std::vector<std::string> out{label};
    if (label2) out.push_back(*label2);
    return out;
  }

  friend bool operator==(const LabeledSample&, const LabeledSample&) = default;
};

using Dataset = std::vector<LabeledSample>;

enum class TaskKind { kKeyword, kNoisyChannel, kTopic, kEntailment, kSimilarity };

inline const char* to_string(TaskKind k) {
  switch (k) {
    case TaskKind::kKeyword: return "keyword";
    case TaskKind::kNoisyChannel: return "noisy_channel";
    case TaskKind::kTopic: return "topic";
    case TaskKind::kEntailment: return "entailment";
    case TaskKind::kSimilarity: return "similarity";
  }
  return "?";
}

inline TaskKind parse_task_kind(std::string_view name) {
  for (TaskKind k : {TaskKind::kKeyword, TaskKind::kNoisyChannel, TaskKind::kTopic,
                     TaskKind::kEntailment, TaskKind::kSimilarity}) {
    if (name == to_string(k)) return k;
  }
  raise(ErrorKind::kConfiguration, "unknown task kind '", name, "'");
}

struct SyntheticTaskSpec {
  TaskKind kind = TaskKind::kKeyword;
  std::string alphabet = "abcdefghijklmnopqrstuvwxyz";
  char keyword = 'z';
  double noise = 0.0;
  std::size_t length = 8;  // characters per text field
  std::uint64_t seed = 0;
  std::size_t n_train = 200;
  std::size_t n_val = 100;
  std::size_t n_test = 100;
};

struct SplitDataset {
  Dataset train, val, test;
};

inline std::vector<std::string> task_classes(TaskKind kind) {
  switch (kind) {
    case TaskKind::kKeyword:
    case TaskKind::kNoisyChannel: return {"yes", "no"};
    case TaskKind::kTopic: return {"world", "sports", "business", "science"};
    case TaskKind::kEntailment: return {"entailment", "not entailment"};
    case TaskKind::kSimilarity: return {};
  }
  return {};
}

inline const std::vector<std::string>& source_classes() {
  static const std::vector<std::string> classes = {"ai", "human"};
  return classes;
}

namespace detail {

inline void validate_task(const SyntheticTaskSpec& spec) {
  std::set<char> letters(spec.alphabet.begin(), spec.alphabet.end());
  if (letters.size() != spec.alphabet.size()) {
    raise(ErrorKind::kConfiguration, "alphabet '", spec.alphabet, "' repeats a character");
  }
  for (char c : spec.alphabet) {
    if (!std::islower(static_cast<unsigned char>(c)) && !std::isdigit(static_cast<unsigned char>(c))) {
      raise(ErrorKind::kConfiguration, "alphabet character '", c,
            "' is not a lower-case letter or digit");
    }
  }
  if (spec.length == 0) raise(ErrorKind::kConfiguration, "text length must be positive");
  if (spec.n_train == 0 || spec.n_val == 0 || spec.n_test == 0) {
    raise(ErrorKind::kConfiguration, "split sizes must be at least 1");
  }
  switch (spec.kind) {
    case TaskKind::kKeyword:
    case TaskKind::kNoisyChannel:
      if (!letters.count(spec.keyword) || letters.size() < 2) {
        raise(ErrorKind::kConfiguration, "keyword task needs the keyword '", spec.keyword,
              "' and at least one other symbol in the alphabet");
      }
      if (!(spec.noise >= 0.0 && spec.noise < 0.5)) {
        raise(ErrorKind::kConfiguration, "noise ", spec.noise, " not in [0, 0.5)");
      }
      break;
    case TaskKind::kTopic:
      if (letters.size() < 4) {
        raise(ErrorKind::kConfiguration, "topic task needs at least 4 alphabet symbols");
      }
      if (spec.length < 3) raise(ErrorKind::kConfiguration, "topic texts need length >= 3");
      break;
    case TaskKind::kEntailment:
      if (letters.size() < 2 || spec.length < 3) {
        raise(ErrorKind::kConfiguration,
              "entailment task needs 2 alphabet symbols and premise length >= 3");
      }
      break;
    case TaskKind::kSimilarity:
      if (letters.size() < 2) raise(ErrorKind::kConfiguration, "similarity needs 2 symbols");
      break;
  }
}

inline std::string random_text(std::string_view alphabet, std::size_t n, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::string s(n, ' ');
  for (char& c : s) c = alphabet[pick(rng)];
  return s;
}

/// Topic t owns letters alphabet[i] with i % 4 == t.
inline std::string topic_letters(std::string_view alphabet, std::size_t t) {
  std::string out;
  for (std::size_t i = t; i < alphabet.size(); i += 4) out.push_back(alphabet[i]);
  return out;
}

inline LabeledSample make_sample(const SyntheticTaskSpec& spec, std::size_t cls,
                                 std::mt19937_64& rng) {
  LabeledSample s;
  const auto classes = task_classes(spec.kind);
  switch (spec.kind) {
    case TaskKind::kKeyword:
    case TaskKind::kNoisyChannel: {
      std::string others;
      for (char c : spec.alphabet)
        if (c != spec.keyword) others.push_back(c);
      std::string text = random_text(others, spec.length, rng);
      if (cls == 0) {
        text[std::uniform_int_distribution<std::size_t>(0, spec.length - 1)(rng)] = spec.keyword;
      }
      s.fields["text"] = text;
      s.label = classes[cls];
      break;
    }
    case TaskKind::kTopic: {
      const std::size_t majority = spec.length / 2 + 1;
      std::string text = random_text(topic_letters(spec.alphabet, cls), majority, rng);
      std::uniform_int_distribution<std::size_t> other_topic(1, 3);
      while (text.size() < spec.length) {
        const std::size_t t = (cls + other_topic(rng)) % 4;
        text += random_text(topic_letters(spec.alphabet, t), 1, rng);
      }
      std::shuffle(text.begin(), text.end(), rng);
      const bool ai = std::bernoulli_distribution(0.5)(rng);
      if (ai) {
        for (char& c : text) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      }
      s.fields["text"] = text;
      s.label = classes[cls];
      s.label2 = source_classes()[ai ? 0 : 1];
      break;
    }
    case TaskKind::kEntailment: {
      const std::string premise = random_text(spec.alphabet, spec.length, rng);
      std::string hypothesis;
      if (cls == 0) {
        const auto at = std::uniform_int_distribution<std::size_t>(0, spec.length - 3)(rng);
        hypothesis = premise.substr(at, 3);
      } else {
        do {
          hypothesis = random_text(spec.alphabet, 3, rng);
        } while (premise.find(hypothesis) != std::string::npos);
      }
      s.fields["premise"] = premise;
      s.fields["hypothesis"] = hypothesis;
      s.label = classes[cls];
      break;
    }
    case TaskKind::kSimilarity: {
      const std::string a = random_text(spec.alphabet, spec.length, rng);
      const std::size_t matches = cls;
      std::string b = a;
      std::vector<std::size_t> positions(spec.length);
      for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i;
      std::shuffle(positions.begin(), positions.end(), rng);
      for (std::size_t i = matches; i < spec.length; ++i) {
        const std::size_t p = positions[i];
        do {
          b[p] = random_text(spec.alphabet, 1, rng)[0];
        } while (b[p] == a[p]);
      }
      s.fields["text1"] = a;
      s.fields["text2"] = b;
      s.target = 5.0 * static_cast<double>(matches) / static_cast<double>(spec.length);
      break;
    }
  }
  return s;
}

inline Dataset make_split(const SyntheticTaskSpec& spec, const std::string& name, std::size_t n,
                          std::mt19937_64& rng) {
  const std::size_t n_classes =
      spec.kind == TaskKind::kSimilarity ? spec.length + 1 : task_classes(spec.kind).size();
  // Round-robin class assignment keeps classes balanced within one sample.
  std::vector<std::size_t> cls(n);
  for (std::size_t i = 0; i < n; ++i) cls[i] = i % n_classes;
  std::shuffle(cls.begin(), cls.end(), rng);
  Dataset out;
  for (std::size_t i = 0; i < n; ++i) {
    LabeledSample s = make_sample(spec, cls[i], rng);
    s.id = name + "-" + std::to_string(i);
    out.push_back(std::move(s));
  }
  if (spec.kind == TaskKind::kNoisyChannel && spec.noise > 0.0) {
    // Members are collected before any flip so each class loses exactly
    // round(noise * n_c) labels.
    const auto classes = task_classes(spec.kind);
    std::vector<std::vector<std::size_t>> members(classes.size());
    for (std::size_t i = 0; i < n; ++i) members[out[i].label == classes[0] ? 0 : 1].push_back(i);
    for (std::size_t c = 0; c < classes.size(); ++c) {
      std::shuffle(members[c].begin(), members[c].end(), rng);
      const auto flips = static_cast<std::size_t>(
          std::llround(spec.noise * static_cast<double>(members[c].size())));
      for (std::size_t f = 0; f < flips; ++f) out[members[c][f]].label = classes[1 - c];
    }
  }
  return out;
}

}  // namespace detail

/// Pure function of `spec`.
inline SplitDataset generate(const SyntheticTaskSpec& spec) {
  detail::validate_task(spec);
  std::mt19937_64 rng(spec.seed);
  SplitDataset d;
  d.train = detail::make_split(spec, "train", spec.n_train, rng);
  d.val = detail::make_split(spec, "val", spec.n_val, rng);
  d.test = detail::make_split(spec, "test", spec.n_test, rng);
  return d;
}

/// The known-optimal rule for a classification kind (noise ignored).
inline std::string rule_label(const SyntheticTaskSpec& spec, const LabeledSample& s) {
  const auto classes = task_classes(spec.kind);
  switch (spec.kind) {
    case TaskKind::kKeyword:
    case TaskKind::kNoisyChannel:
      return classes[s.fields.at("text").find(spec.keyword) != std::string::npos ? 0 : 1];
    case TaskKind::kTopic: {
      std::size_t counts[4] = {0, 0, 0, 0};
      for (char c : s.fields.at("text")) {
        const auto pos =
            spec.alphabet.find(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        ++counts[pos % 4];
      }
      return classes[std::max_element(counts, counts + 4) - counts];
    }
    case TaskKind::kEntailment:
      return classes[s.fields.at("premise").find(s.fields.at("hypothesis")) != std::string::npos
                         ? 0
                         : 1];
    case TaskKind::kSimilarity:
      raise(ErrorKind::kConfiguration, "similarity has no class rule");
  }
  return {};
}

/// Bayes-optimal accuracy of the kind's generating process.
inline double bayes_accuracy(const SyntheticTaskSpec& spec) {
  return spec.kind == TaskKind::kNoisyChannel ? 1.0 - spec.noise : 1.0;
}

/// `k` demonstrations, k / n_classes from each class, drawn without
/// replacement in a seeded order.
inline std::vector<LabeledSample> sample_few_shot(const Dataset& pool,
                                                  const std::vector<std::string>& classes,
                                                  std::size_t k, std::uint64_t seed) {
  if (classes.empty() || k % classes.size() != 0) {
    raise(ErrorKind::kConfiguration, "few-shot count ", k, " is not a multiple of ",
          classes.size(), " classes");
  }
  std::mt19937_64 rng(seed);
  std::vector<LabeledSample> out;
  const std::size_t per_class = k / classes.size();
  for (const std::string& c : classes) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < pool.size(); ++i)
      if (pool[i].label == c) members.push_back(i);
    if (members.size() < per_class) {
      raise(ErrorKind::kConfiguration, "class '", c, "' has ", members.size(),
            " samples, need ", per_class);
    }
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t j = 0; j < per_class; ++j) out.push_back(pool[members[j]]);
  }
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

inline std::vector<FewShotExample> to_few_shot(const std::vector<LabeledSample>& samples) {
  std::vector<FewShotExample> out;
  for (const auto& s : samples) out.push_back({s.fields, s.labels()});
  return out;
}

// ---------------------------------------------------------------------------
// Default prompts for the synthetic kinds.

inline PromptSpec default_prompt(const SyntheticTaskSpec& spec, const Vocabulary& vocab,
                                 MappingStrategy strategy = MappingStrategy::kNumerical,
                                 bool with_source_task = false) {
  PromptSpec p;
  TaskBlock task;
  task.name = to_string(spec.kind);
  switch (spec.kind) {
    case TaskKind::kKeyword:
    case TaskKind::kNoisyChannel:
      p.instruction = "Given the text:\n<TEXT> {text} </TEXT>";
      task.question = std::string("Does the text contain the letter ") + spec.keyword + "?";
      task.mapping = build_mapping(vocab, task_classes(spec.kind), strategy);
      break;
    case TaskKind::kTopic:
      p.instruction = "Given the text:\n<TEXT> {text} </TEXT>";
      task.question = "Which topic does the text belong to?";
      task.mapping = build_mapping(vocab, task_classes(spec.kind), strategy);
      break;
    case TaskKind::kEntailment:
      p.instruction =
          "Given the premise:\n<PREMISE> {premise} </PREMISE>\n"
          "and hypothesis:\n<HYPOTHESIS> {hypothesis} </HYPOTHESIS>";
      task.question = "Is the hypothesis entailed by the premise?";
      task.mapping = build_mapping(vocab, task_classes(spec.kind), strategy);
      break;
    case TaskKind::kSimilarity: {
      p.instruction =
          "Given the first text:\n<TEXT> {text1} </TEXT>\n"
          "and the second text:\n<TEXT> {text2} </TEXT>";
      task.question = "How similar are the two texts?";
      task.format_line = "Provide answer in format: <ANSWER>#Score</ANSWER>";
      std::vector<std::pair<std::string, std::string>> pairs;
      for (int i = 0; i <= 5; ++i) {
        task.grid.push_back(i);
        pairs.emplace_back(std::to_string(i) + ".0", std::to_string(i));
      }
      task.mapping = make_mapping(vocab, pairs);
      break;
    }
  }
  p.tasks.push_back(std::move(task));
  if (with_source_task) {
    if (spec.kind != TaskKind::kTopic) {
      raise(ErrorKind::kConfiguration, "only the topic task carries a source label");
    }
    TaskBlock source;
    source.name = "source";
    source.question = "Was the text written by a human or an ai?";
    source.format_line = "Provide answer in format: <SOURCE>#Number</SOURCE>";
    source.answer_prefix = "<SOURCE> ";
    source.answer_suffix = " </SOURCE>";
    source.mapping = make_mapping(vocab, {{"ai", "1"}, {"human", "2"}});
    p.tasks.push_back(std::move(source));
  }
  return p;
}

// ---------------------------------------------------------------------------
// TSV files. Header row names the columns; an optional "id" column supplies
// sample ids (line-based ids otherwise). Tabs, newlines and backslashes in
// values are written as \t, \n and \\.

struct TsvSchema {
  std::vector<std::string> fields;
  std::string label_column = "label";
  std::string label2_column;         // empty: single-task data
  std::vector<std::string> classes2;
  std::vector<std::string> classes;  // empty: accept any label
  bool regression = false;           // label column holds a number
};

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (c == '\t') {
      out.push_back(std::move(cell));
      cell.clear();
    } else if (c == '\\' && i + 1 < line.size()) {
      const char e = line[++i];
      cell.push_back(e == 't' ? '\t' : e == 'n' ? '\n' : e);
    } else {
      cell.push_back(c);
    }
  }
  out.push_back(std::move(cell));
  return out;
}

inline std::string escape_cell(const std::string& v) {
  std::string out;
  for (char c : v) {
    if (c == '\t') out += "\\t";
    else if (c == '\n') out += "\\n";
    else if (c == '\\') out += "\\\\";
    else out.push_back(c);
  }
  return out;
}

inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace detail

inline Dataset load_tsv(const std::string& path, const TsvSchema& schema) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::kIo, "cannot read ", path);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) {
      header = detail::split_tabs(line);
      break;
    }
  }
  if (header.empty()) raise(ErrorKind::kFormat, path, ": missing header row");
  auto column = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    return std::nullopt;
  };
  std::vector<std::size_t> field_cols;
  for (const std::string& f : schema.fields) {
    const auto c = column(f);
    if (!c) raise(ErrorKind::kFormat, path, ":", line_no, ": missing column '", f, "'");
    field_cols.push_back(*c);
  }
  const auto label_col = column(schema.label_column);
  if (!label_col) {
    raise(ErrorKind::kFormat, path, ":", line_no, ": missing column '", schema.label_column, "'");
  }
  std::optional<std::size_t> label2_col;
  if (!schema.label2_column.empty()) {
    label2_col = column(schema.label2_column);
    if (!label2_col) {
      raise(ErrorKind::kFormat, path, ":", line_no, ": missing column '", schema.label2_column,
            "'");
    }
  }
  const auto id_col = column("id");
  auto check_label = [&](const std::string& label, const std::vector<std::string>& classes) {
    if (classes.empty() || std::find(classes.begin(), classes.end(), label) != classes.end()) {
      return;
    }
    std::string valid;
    for (const auto& c : classes) valid += (valid.empty() ? "" : ", ") + c;
    raise(ErrorKind::kLabel, path, ":", line_no, ": unknown label '", label,
          "'; valid classes: ", valid);
  };

  Dataset out;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = detail::split_tabs(line);
    if (cells.size() != header.size()) {
      raise(ErrorKind::kFormat, path, ":", line_no, ": expected ", header.size(),
            " columns, found ", cells.size());
    }
    LabeledSample s;
    s.id = id_col ? cells[*id_col] : "line-" + std::to_string(line_no);
    for (std::size_t i = 0; i < schema.fields.size(); ++i)
      s.fields[schema.fields[i]] = cells[field_cols[i]];
    const std::string& label = cells[*label_col];
    if (schema.regression) {
      try {
        std::size_t used = 0;
        s.target = std::stod(label, &used);
        if (used != label.size()) throw std::invalid_argument(label);
      } catch (const std::exception&) {
        raise(ErrorKind::kFormat, path, ":", line_no, ": '", label, "' is not a number");
      }
    } else {
      check_label(label, schema.classes);
      s.label = label;
    }
    if (label2_col) {
      check_label(cells[*label2_col], schema.classes2);
      s.label2 = cells[*label2_col];
    }
    out.push_back(std::move(s));
  }
  return out;
}

inline void write_tsv(const std::string& path, const Dataset& data, const TsvSchema& schema) {
  std::ofstream out(path);
  if (!out) raise(ErrorKind::kIo, "cannot write ", path);
  out << "id";
  for (const auto& f : schema.fields) out << "\t" << f;
  out << "\t" << schema.label_column;
  if (!schema.label2_column.empty()) out << "\t" << schema.label2_column;
  out << "\n";
  for (const LabeledSample& s : data) {
    out << detail::escape_cell(s.id);
    for (const auto& f : schema.fields) out << "\t" << detail::escape_cell(s.fields.at(f));
    out << "\t"
        << (schema.regression ? detail::format_double(s.target.value_or(0.0))
                              : detail::escape_cell(s.label));
    if (!schema.label2_column.empty()) out << "\t" << detail::escape_cell(s.label2.value_or(""));
    out << "\n";
  }
}

inline TsvSchema tsv_schema(const SyntheticTaskSpec& spec) {
  TsvSchema schema;
  switch (spec.kind) {
    case TaskKind::kEntailment: schema.fields = {"premise", "hypothesis"}; break;
    case TaskKind::kSimilarity: schema.fields = {"text1", "text2"}; break;
    default: schema.fields = {"text"}; break;
  }
  schema.classes = task_classes(spec.kind);
  schema.regression = spec.kind == TaskKind::kSimilarity;
  if (spec.kind == TaskKind::kTopic) {
    schema.label2_column = "source";
    schema.classes2 = source_classes();
  }
  return schema;
}

/// Provenance record for a generated dataset.
inline void write_dataset_manifest(const std::string& path, const SyntheticTaskSpec& spec) {
  std::ofstream out(path);
  if (!out) raise(ErrorKind::kIo, "cannot write ", path);
  out << "kind=" << to_string(spec.kind) << "\nalphabet=" << spec.alphabet
      << "\nkeyword=" << spec.keyword << "\nnoise=" << detail::format_double(spec.noise)
      << "\nlength=" << spec.length << "\nseed=" << spec.seed << "\nn_train=" << spec.n_train
      << "\nn_val=" << spec.n_val << "\nn_test=" << spec.n_test << "\n";
}

}  // namespace salsa

#endif  // SALSA_DATA_HPP_
