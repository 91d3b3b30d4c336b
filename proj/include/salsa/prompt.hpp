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

// Prompt compilation.
//
// A compiled prompt is a chat-style token sequence:
//
//   <|begin_of_text|><|start_header_id|>system<|end_header_id|>\n
//   {system}<|eot_id|>\n
//   <|start_header_id|>user<|end_header_id|>\n
//   [Example:\n{instruction(example)}\n{answers with true labels}\n]...
//   {instruction(sample)}\n
//   per task: {question}\n{format}\n{header}\n{token - class\n}...
//   <|eot_id|>\n
//   <|start_header_id|>assistant<|end_header_id|>\n
//   per task: {answer_prefix}<|X|>{answer_suffix}
//   <|eot_id|>
//
// The reserved placeholder token <|X|> occurs exactly once per task.

#ifndef SALSA_PROMPT_HPP_
#define SALSA_PROMPT_HPP_

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "salsa/error.hpp"
#include "salsa/tokenizer.hpp"

namespace salsa {

/// Named input fields of one sample, e.g. {"premise": ..., "hypothesis": ...}.
using Fields = std::map<std::string, std::string>;

enum class MappingStrategy {
  kNumerical,
  kReverseNumerical,
  kAlphabetical,
  kReverseAlphabetical,
  kSemantic,
  kReverseSemantic,
  kCustom,
};

inline constexpr MappingStrategy kAllStrategies[] = {
    MappingStrategy::kNumerical,    MappingStrategy::kReverseNumerical,
    MappingStrategy::kAlphabetical, MappingStrategy::kReverseAlphabetical,
    MappingStrategy::kSemantic,     MappingStrategy::kReverseSemantic,
};

inline const char* to_string(MappingStrategy s) {
  switch (s) {
    case MappingStrategy::kNumerical: return "numerical";
    case MappingStrategy::kReverseNumerical: return "reverse_numerical";
    case MappingStrategy::kAlphabetical: return "alphabetical";
    case MappingStrategy::kReverseAlphabetical: return "reverse_alphabetical";
    case MappingStrategy::kSemantic: return "semantic";
    case MappingStrategy::kReverseSemantic: return "reverse_semantic";
    case MappingStrategy::kCustom: return "custom";
  }
  return "?";
}

inline MappingStrategy parse_strategy(std::string_view name) {
  for (MappingStrategy s : kAllStrategies)
    if (name == to_string(s)) return s;
  if (name == "custom") return MappingStrategy::kCustom;
  raise(ErrorKind::kConfiguration, "unknown mapping strategy '", name, "'");
}

struct ClassEntry {
  std::string class_name;
  std::string label_token;
  TokenId token_id = 0;
};

/// Ordered class-to-token mapping. Entry order is the class index order used
/// by every distribution downstream.
struct ClassMapping {
  std::vector<ClassEntry> entries;
  MappingStrategy strategy = MappingStrategy::kCustom;

  std::size_t size() const { return entries.size(); }

  std::vector<std::string> class_names() const {
    std::vector<std::string> out;
    for (const auto& e : entries) out.push_back(e.class_name);
    return out;
  }

  std::vector<TokenId> token_ids() const {
    std::vector<TokenId> out;
    for (const auto& e : entries) out.push_back(e.token_id);
    return out;
  }

  std::size_t index_of(std::string_view class_name) const {
    for (std::size_t i = 0; i < entries.size(); ++i)
      if (entries[i].class_name == class_name) return i;
    std::string valid;
    for (const auto& e : entries) valid += (valid.empty() ? "" : ", ") + e.class_name;
    raise(ErrorKind::kLabel, "unknown class '", class_name, "'; valid classes: ", valid);
  }

  const std::string& label_of(std::string_view class_name) const {
    return entries[index_of(class_name)].label_token;
  }
};

/// Mapping from explicit (class, label token) pairs. Every label must be a
/// single token and labels must be pairwise distinct.
inline ClassMapping make_mapping(const Vocabulary& vocab,
                                 const std::vector<std::pair<std::string, std::string>>& pairs,
                                 MappingStrategy strategy = MappingStrategy::kCustom) {
  if (pairs.empty()) raise(ErrorKind::kMapping, "a mapping needs at least one class");
  ClassMapping mapping;
  mapping.strategy = strategy;
  for (const auto& [name, label] : pairs) {
    for (const auto& e : mapping.entries) {
      if (e.label_token == label) {
        raise(ErrorKind::kMapping, "label token '", label, "' used for both '", e.class_name,
              "' and '", name, "'");
      }
      if (e.class_name == name) raise(ErrorKind::kMapping, "duplicate class '", name, "'");
    }
    if (vocab.is_special(vocab.assert_single_token(label))) {
      raise(ErrorKind::kMapping, "label token '", label, "' is a structural marker");
    }
    mapping.entries.push_back({name, label, vocab.id(label)});
  }
  return mapping;
}

inline ClassMapping build_mapping(const Vocabulary& vocab,
                                  const std::vector<std::string>& class_names,
                                  MappingStrategy strategy) {
  const std::size_t n = class_names.size();
  auto too_many = [&](std::size_t limit) {
    if (n > limit) {
      raise(ErrorKind::kMapping, to_string(strategy), " mapping supports at most ", limit,
            " classes, got ", n);
    }
  };
  std::vector<std::string> labels;
  switch (strategy) {
    case MappingStrategy::kNumerical:
    case MappingStrategy::kReverseNumerical:
      too_many(10);
      for (std::size_t i = 0; i < n; ++i) labels.push_back(std::string(1, char('0' + i)));
      break;
    case MappingStrategy::kAlphabetical:
    case MappingStrategy::kReverseAlphabetical:
      too_many(26);
      for (std::size_t i = 0; i < n; ++i) labels.push_back(std::string(1, char('A' + i)));
      break;
    case MappingStrategy::kSemantic:
    case MappingStrategy::kReverseSemantic:
      if (n != 2) {
        raise(ErrorKind::kMapping, to_string(strategy), " mapping needs exactly 2 classes, got ",
              n);
      }
      labels = {"Y", "N"};
      break;
    case MappingStrategy::kCustom:
      raise(ErrorKind::kMapping, "custom mappings need explicit label tokens");
  }
  if (strategy == MappingStrategy::kReverseNumerical ||
      strategy == MappingStrategy::kReverseAlphabetical ||
      strategy == MappingStrategy::kReverseSemantic) {
    std::reverse(labels.begin(), labels.end());
  }
  std::vector<std::pair<std::string, std::string>> pairs;
  for (std::size_t i = 0; i < n; ++i) pairs.emplace_back(class_names[i], labels[i]);
  return make_mapping(vocab, pairs, strategy);
}

inline constexpr std::string_view kDefaultFormatLine =
    "Provide answer in format: <ANSWER>#Number</ANSWER>";
inline constexpr std::string_view kDefaultMappingHeader =
    "where the number is one of the following:";

struct TaskBlock {
  std::string name;
  std::string question;
  std::string format_line{kDefaultFormatLine};
  std::string mapping_header{kDefaultMappingHeader};
  ClassMapping mapping;
  std::string answer_prefix = "<ANSWER> ";
  std::string answer_suffix = " </ANSWER>";
  // Scalar value of each class, in mapping order, for regression tasks.
  std::vector<double> grid;
};

/// A demonstration: inputs plus one class name per task.
struct FewShotExample {
  Fields inputs;
  std::vector<std::string> labels;
};

struct PromptSpec {
  std::string system_text = "You are a precise text classifier.";
  std::string instruction;  // "{field}" marks a slot
  std::vector<TaskBlock> tasks;
  std::vector<FewShotExample> few_shot;
};

struct CompiledPrompt {
  std::string text;
  std::vector<TokenId> token_ids;
  std::vector<std::size_t> placeholder_positions;
  std::vector<std::vector<TokenId>> class_token_ids;

  std::size_t task_count() const { return placeholder_positions.size(); }
};

/// Slot names in template order, duplicates kept.
inline std::vector<std::string> template_slots(std::string_view tmpl) {
  std::vector<std::string> slots;
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    if (tmpl[i] != '{') continue;
    const auto close = tmpl.find('}', i);
    if (close == std::string_view::npos) {
      raise(ErrorKind::kTemplate, "unterminated slot at offset ", i);
    }
    std::string name(tmpl.substr(i + 1, close - i - 1));
    if (name.empty()) raise(ErrorKind::kTemplate, "empty slot at offset ", i);
    for (char c : name) {
      if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) {
        raise(ErrorKind::kTemplate, "bad slot name '", name, "'");
      }
    }
    slots.push_back(std::move(name));
    i = close;
  }
  return slots;
}

inline std::string fill_template(std::string_view tmpl, const Fields& fields) {
  std::string out;
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    if (tmpl[i] != '{') {
      out.push_back(tmpl[i]);
      continue;
    }
    const auto close = tmpl.find('}', i);
    if (close == std::string_view::npos) {
      raise(ErrorKind::kTemplate, "unterminated slot at offset ", i);
    }
    const std::string name(tmpl.substr(i + 1, close - i - 1));
    const auto it = fields.find(name);
    if (it == fields.end()) raise(ErrorKind::kTemplate, "sample has no field '", name, "'");
    // Inputs must not smuggle in structural markers.
    if (it->second.find("<|") != std::string::npos) {
      raise(ErrorKind::kTemplate, "field '", name, "' contains a reserved marker");
    }
    out += it->second;
    i = close;
  }
  return out;
}

namespace detail {

inline std::string answers_text(const PromptSpec& spec, const std::vector<std::string>* labels) {
  std::string out;
  for (std::size_t t = 0; t < spec.tasks.size(); ++t) {
    const TaskBlock& task = spec.tasks[t];
    out += task.answer_prefix;
    out += labels ? task.mapping.label_of((*labels)[t]) : std::string(tokens::kPlaceholder);
    out += task.answer_suffix;
  }
  return out;
}

}  // namespace detail

/// Prompt text for `sample`; pure function of its arguments.
inline std::string render(const PromptSpec& spec, const Fields& sample) {
  if (spec.tasks.empty()) raise(ErrorKind::kTemplate, "prompt spec has no task");
  std::string s;
  s += tokens::kBeginOfText;
  s += tokens::kStartHeader;
  s += "system";
  s += tokens::kEndHeader;
  s += "\n" + spec.system_text;
  s += tokens::kEndOfTurn;
  s += "\n";
  s += tokens::kStartHeader;
  s += "user";
  s += tokens::kEndHeader;
  s += "\n";
  for (const FewShotExample& ex : spec.few_shot) {
    if (ex.labels.size() != spec.tasks.size()) {
      raise(ErrorKind::kTemplate, "few-shot example has ", ex.labels.size(), " labels for ",
            spec.tasks.size(), " tasks");
    }
    s += "Example:\n" + fill_template(spec.instruction, ex.inputs) + "\n";
    s += detail::answers_text(spec, &ex.labels) + "\n";
  }
  s += fill_template(spec.instruction, sample) + "\n";
  for (const TaskBlock& task : spec.tasks) {
    s += task.question + "\n" + task.format_line + "\n" + task.mapping_header + "\n";
    for (const ClassEntry& e : task.mapping.entries) {
      s += e.label_token + " - " + e.class_name + "\n";
    }
  }
  s += tokens::kEndOfTurn;
  s += "\n";
  s += tokens::kStartHeader;
  s += "assistant";
  s += tokens::kEndHeader;
  s += "\n";
  s += detail::answers_text(spec, nullptr);
  s += tokens::kEndOfTurn;
  return s;
}

inline CompiledPrompt compile(const PromptSpec& spec, const Vocabulary& vocab,
                              const Fields& sample, std::size_t max_seq_len) {
  CompiledPrompt out;
  out.text = render(spec, sample);
  out.token_ids = vocab.encode(out.text);
  if (out.token_ids.size() > max_seq_len) {
    raise(ErrorKind::kLength, "compiled prompt has ", out.token_ids.size(),
          " tokens, max_seq_len is ", max_seq_len);
  }
  const TokenId placeholder = vocab.placeholder_id();
  for (std::size_t i = 0; i < out.token_ids.size(); ++i)
    if (out.token_ids[i] == placeholder) out.placeholder_positions.push_back(i);
  if (out.placeholder_positions.size() != spec.tasks.size()) {
    raise(ErrorKind::kTemplate, "compiled prompt has ", out.placeholder_positions.size(),
          " placeholders for ", spec.tasks.size(), " tasks");
  }
  for (const TaskBlock& task : spec.tasks) out.class_token_ids.push_back(task.mapping.token_ids());
  return out;
}

// ---------------------------------------------------------------------------
// Prompt spec files.
//
//   # comment
//   system = You are a precise text classifier.
//   instruction <<END
//   Given the text:
//   <TEXT> {text} </TEXT>
//   END
//   task = keyword                  (starts a task block)
//   question = Does the text contain the letter z?
//   classes = yes,no
//   strategy = numerical            (or custom with labels = ...)
//   labels = 1,2
//   format = Provide answer in format: <ANSWER>#Number</ANSWER>
//   header = where the number is one of the following:
//   answer_prefix = "<ANSWER> "
//   answer_suffix = " </ANSWER>"
//   grid <<END                      (regression: state=label_token lines)
//   0.0=0
//   END
//
// Values are trimmed; wrap a value in double quotes to keep surrounding
// spaces (\n, \t, \" and \\ escapes apply inside quotes). A block runs
// from "key <<TAG" to a line equal to TAG.

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::string unquote(const std::string& v) {
  if (v.size() < 2 || v.front() != '"' || v.back() != '"') return v;
  std::string out;
  for (std::size_t i = 1; i + 1 < v.size(); ++i) {
    if (v[i] == '\\' && i + 2 < v.size()) {
      const char c = v[++i];
      out.push_back(c == 'n' ? '\n' : c == 't' ? '\t' : c);
    } else {
      out.push_back(v[i]);
    }
  }
  return out;
}

inline std::string quote(const std::string& v) {
  const bool plain = !v.empty() && v.find('\n') == std::string::npos &&
                     v.find('"') == std::string::npos && v == trim(v);
  if (plain) return v;
  std::string out = "\"";
  for (char c : v) {
    if (c == '\n') out += "\\n";
    else if (c == '\t') out += "\\t";
    else if (c == '"' || c == '\\') (out += '\\') += c;
    else out += c;
  }
  return out + "\"";
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream in(v);
  std::string part;
  while (std::getline(in, part, ',')) out.push_back(trim(part));
  return out;
}

struct PendingTask {
  TaskBlock block;
  std::vector<std::string> classes;
  std::vector<std::string> labels;
  std::string strategy = "numerical";
  std::vector<std::pair<std::string, std::string>> grid_lines;
  std::size_t line = 0;
};

}  // namespace detail

inline PromptSpec parse_prompt_spec(std::string_view text, const Vocabulary& vocab,
                                    const std::string& origin = "<prompt>") {
  PromptSpec spec;
  std::vector<detail::PendingTask> pending;
  std::vector<std::string> lines;
  {
    std::string line;
    std::stringstream in{std::string(text)};
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      lines.push_back(line);
    }
  }
  auto fail = [&](std::size_t line_no, auto&&... parts) {
    raise(ErrorKind::kFormat, origin, ":", line_no, ": ", parts...);
  };

  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    const std::string stripped = detail::trim(lines[i]);
    if (stripped.empty() || stripped[0] == '#') continue;

    std::string key, value;
    if (const auto block = stripped.find("<<"); block != std::string::npos &&
                                                stripped.find('=') == std::string::npos) {
      key = detail::trim(stripped.substr(0, block));
      const std::string tag = detail::trim(stripped.substr(block + 2));
      if (tag.empty()) fail(line_no, "block needs a terminator tag");
      std::string body;
      bool closed = false, first = true;
      for (++i; i < lines.size(); ++i) {
        if (lines[i] == tag) {
          closed = true;
          break;
        }
        if (!first) body += "\n";
        body += lines[i];
        first = false;
      }
      if (!closed) fail(line_no, "block '", key, "' is never closed by '", tag, "'");
      value = body;
    } else {
      const auto eq = stripped.find('=');
      if (eq == std::string::npos) fail(line_no, "expected key = value");
      key = detail::trim(stripped.substr(0, eq));
      value = detail::unquote(detail::trim(stripped.substr(eq + 1)));
    }

    if (key == "system") {
      spec.system_text = value;
    } else if (key == "instruction") {
      spec.instruction = value;
    } else if (key == "task") {
      pending.emplace_back();
      pending.back().block.name = value;
      pending.back().line = line_no;
    } else {
      if (pending.empty()) fail(line_no, "key '", key, "' outside a task block");
      detail::PendingTask& task = pending.back();
      if (key == "question") task.block.question = value;
      else if (key == "format") task.block.format_line = value;
      else if (key == "header") task.block.mapping_header = value;
      else if (key == "answer_prefix") task.block.answer_prefix = value;
      else if (key == "answer_suffix") task.block.answer_suffix = value;
      else if (key == "classes") task.classes = detail::split_list(value);
      else if (key == "labels") task.labels = detail::split_list(value);
      else if (key == "strategy") task.strategy = value;
      else if (key == "grid") {
        std::stringstream in(value);
        std::string g;
        while (std::getline(in, g)) {
          g = detail::trim(g);
          if (g.empty()) continue;
          const auto eq = g.find('=');
          if (eq == std::string::npos) fail(line_no, "grid line '", g, "' is not state=label");
          task.grid_lines.emplace_back(detail::trim(g.substr(0, eq)),
                                       detail::trim(g.substr(eq + 1)));
        }
      } else {
        fail(line_no, "unknown key '", key, "'");
      }
    }
  }

  for (detail::PendingTask& task : pending) {
    TaskBlock& block = task.block;
    if (!task.grid_lines.empty()) {
      std::vector<std::pair<std::string, std::string>> pairs;
      for (const auto& [state, label] : task.grid_lines) {
        try {
          std::size_t used = 0;
          block.grid.push_back(std::stod(state, &used));
          if (used != state.size()) throw std::invalid_argument(state);
        } catch (const std::exception&) {
          fail(task.line, "grid state '", state, "' is not a number");
        }
        pairs.emplace_back(state, label);
      }
      block.mapping = make_mapping(vocab, pairs);
    } else if (task.strategy == "custom" || !task.labels.empty()) {
      if (task.labels.size() != task.classes.size()) {
        fail(task.line, "task '", block.name, "' has ", task.classes.size(), " classes but ",
             task.labels.size(), " labels");
      }
      std::vector<std::pair<std::string, std::string>> pairs;
      for (std::size_t c = 0; c < task.classes.size(); ++c)
        pairs.emplace_back(task.classes[c], task.labels[c]);
      block.mapping = make_mapping(vocab, pairs);
    } else {
      if (task.classes.empty()) fail(task.line, "task '", block.name, "' lists no classes");
      block.mapping = build_mapping(vocab, task.classes, parse_strategy(task.strategy));
    }
    spec.tasks.push_back(std::move(block));
  }
  if (spec.tasks.empty()) raise(ErrorKind::kFormat, origin, ": no task block");
  if (spec.instruction.empty()) raise(ErrorKind::kFormat, origin, ": no instruction");
  template_slots(spec.instruction);  // validates slot syntax
  return spec;
}

inline PromptSpec load_prompt_spec(const std::string& path, const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::kIo, "cannot read prompt spec ", path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_prompt_spec(buffer.str(), vocab, path);
}

/// Inverse of parse_prompt_spec (few-shot examples are not part of the file).
inline std::string format_prompt_spec(const PromptSpec& spec) {
  std::ostringstream out;
  out << "system = " << detail::quote(spec.system_text) << "\n";
  out << "instruction <<END\n" << spec.instruction << "\nEND\n";
  for (const TaskBlock& task : spec.tasks) {
    out << "\ntask = " << detail::quote(task.name) << "\n";
    out << "question = " << detail::quote(task.question) << "\n";
    out << "format = " << detail::quote(task.format_line) << "\n";
    out << "header = " << detail::quote(task.mapping_header) << "\n";
    out << "answer_prefix = " << detail::quote(task.answer_prefix) << "\n";
    out << "answer_suffix = " << detail::quote(task.answer_suffix) << "\n";
    if (!task.grid.empty()) {
      out << "grid <<END\n";
      for (const ClassEntry& e : task.mapping.entries)
        out << e.class_name << "=" << e.label_token << "\n";
      out << "END\n";
      continue;
    }
    std::string classes, labels;
    for (const ClassEntry& e : task.mapping.entries) {
      classes += (classes.empty() ? "" : ",") + e.class_name;
      labels += (labels.empty() ? "" : ",") + e.label_token;
    }
    out << "classes = " << classes << "\n";
    if (task.mapping.strategy == MappingStrategy::kCustom) {
      out << "strategy = custom\nlabels = " << labels << "\n";
    } else {
      out << "strategy = " << to_string(task.mapping.strategy) << "\n";
    }
  }
  return out.str();
}

}  // namespace salsa

#endif  // SALSA_PROMPT_HPP_
