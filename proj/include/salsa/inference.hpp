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

// Single-pass classification.
//
// The logits that predict the token at position p live in row p - 1, so the
// class distribution for a placeholder at p is read from row p - 1, filtered
// to the task's class-token ids (mapping order) and softmaxed. Everything
// else in the vocabulary is ignored.

#ifndef SALSA_INFERENCE_HPP_
#define SALSA_INFERENCE_HPP_

#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "json.hpp"
#include "salsa/error.hpp"
#include "salsa/model.hpp"
#include "salsa/prompt.hpp"

namespace salsa {

struct ClassDistribution {
  std::vector<std::string> class_names;
  std::vector<double> probabilities;
  std::vector<double> raw_logits;

  std::size_t size() const { return probabilities.size(); }
};

struct MultiLabelDistribution {
  std::vector<std::string> class_names;
  std::vector<double> probabilities;  // independent logistic values
  std::vector<double> raw_logits;
  double threshold = 0.5;
  std::vector<std::size_t> selected;  // ascending class indices
};

inline ClassDistribution distribution_from_logits(std::vector<std::string> class_names,
                                                  std::vector<double> raw_logits) {
  if (class_names.size() != raw_logits.size() || raw_logits.empty()) {
    raise(ErrorKind::kStructural, raw_logits.size(), " filtered logits for ",
          class_names.size(), " classes");
  }
  NoGradGuard no_grad;
  Tensor probs = softmax(Tensor({1, raw_logits.size()}, raw_logits), 1);
  const auto v = probs.values();
  return {std::move(class_names), {v.begin(), v.end()}, std::move(raw_logits)};
}

/// Row p - 1 of the logits for each placeholder p, restricted to that task's
/// class tokens: one [1, n_classes] tensor per task, all from one forward
/// pass. Differentiable; the training loss is built on this.
inline std::vector<Tensor> placeholder_logits(const TransformerWeights& weights,
                                              const AdapterSet* adapters,
                                              const CompiledPrompt& prompt,
                                              const ForwardOptions& options = {}) {
  if (prompt.placeholder_positions.size() != prompt.class_token_ids.size()) {
    raise(ErrorKind::kStructural, prompt.placeholder_positions.size(), " placeholders but ",
          prompt.class_token_ids.size(), " class-token lists");
  }
  std::vector<std::size_t> rows;
  for (std::size_t p : prompt.placeholder_positions) {
    if (p == 0) raise(ErrorKind::kStructural, "placeholder at position 0 has no context");
    rows.push_back(p - 1);
  }
  // Only the needed rows go through the output projection.
  Tensor hidden = hidden_states(weights, adapters, prompt.token_ids, options);
  Tensor logits = project_logits(weights, gather_rows(hidden, rows));
  std::vector<Tensor> out;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    std::vector<std::size_t> cols(prompt.class_token_ids[k].begin(),
                                  prompt.class_token_ids[k].end());
    out.push_back(take(logits, k, cols));
  }
  return out;
}

/// Process-wide tally of classification calls and the forward passes they
/// made. Tests compare the two at exit.
struct ClassifyAudit {
  std::size_t calls = 0;
  std::size_t passes = 0;
};

inline ClassifyAudit& classify_audit() {
  static ClassifyAudit audit;
  return audit;
}

namespace detail {

inline std::vector<ClassDistribution> classify_all(const TransformerWeights& weights,
                                                   const AdapterSet* adapters,
                                                   const CompiledPrompt& prompt,
                                                   const std::vector<ClassMapping>& mappings,
                                                   ForwardCounter* counter) {
  if (mappings.size() != prompt.task_count()) {
    raise(ErrorKind::kStructural, prompt.task_count(), " placeholders but ", mappings.size(),
          " mappings");
  }
  NoGradGuard no_grad;
  ForwardCounter local;
  const auto filtered = placeholder_logits(weights, adapters, prompt, {false, nullptr, &local});
  if (local.passes != 1) {
    raise(ErrorKind::kStructural, "classification used ", local.passes, " forward passes");
  }
  if (counter) counter->passes += local.passes;
  classify_audit().calls += 1;
  classify_audit().passes += local.passes;
  std::vector<ClassDistribution> out;
  for (std::size_t k = 0; k < filtered.size(); ++k) {
    if (mappings[k].token_ids() != prompt.class_token_ids[k]) {
      raise(ErrorKind::kStructural, "task ", k, " mapping does not match the compiled prompt");
    }
    const auto raw = filtered[k].values();
    out.push_back(distribution_from_logits(mappings[k].class_names(), {raw.begin(), raw.end()}));
  }
  return out;
}

}  // namespace detail

/// One forward pass, one distribution. `counter`, when given, is incremented
/// by the passes this call made (always exactly 1).
inline ClassDistribution classify(const TransformerWeights& weights, const AdapterSet* adapters,
                                  const CompiledPrompt& prompt, const ClassMapping& mapping,
                                  ForwardCounter* counter = nullptr) {
  if (prompt.task_count() != 1) {
    raise(ErrorKind::kArity, "classify needs a single-task prompt, got ", prompt.task_count(),
          " placeholders");
  }
  return detail::classify_all(weights, adapters, prompt, {mapping}, counter).front();
}

inline std::vector<ClassDistribution> classify_multitask(const TransformerWeights& weights,
                                                         const AdapterSet* adapters,
                                                         const CompiledPrompt& prompt,
                                                         const std::vector<ClassMapping>& mappings,
                                                         ForwardCounter* counter = nullptr) {
  if (mappings.size() < 2 || prompt.task_count() != mappings.size()) {
    raise(ErrorKind::kStructural, "multi-task prompt has ", prompt.task_count(),
          " placeholders for ", mappings.size(), " tasks (need at least 2, equal counts)");
  }
  return detail::classify_all(weights, adapters, prompt, mappings, counter);
}

/// Index of the most probable class; ties go to the lowest mapping index.
inline std::size_t predict_index(const ClassDistribution& dist) {
  if (dist.probabilities.empty()) raise(ErrorKind::kStructural, "empty distribution");
  std::size_t best = 0;
  for (std::size_t i = 1; i < dist.probabilities.size(); ++i)
    if (dist.probabilities[i] > dist.probabilities[best]) best = i;
  return best;
}

inline const std::string& predict(const ClassDistribution& dist) {
  return dist.class_names[predict_index(dist)];
}

/// positive_class iff P(positive_class) >= tau, otherwise the other class.
inline const std::string& predict_with_threshold(const ClassDistribution& dist,
                                                 const std::string& positive_class, double tau) {
  if (dist.size() != 2) {
    raise(ErrorKind::kArity, "threshold decisions need a binary task, got ", dist.size(),
          " classes");
  }
  if (!(tau >= 0.0 && tau <= 1.0)) raise(ErrorKind::kRange, "threshold ", tau, " not in [0,1]");
  std::size_t pos = 2;
  for (std::size_t i = 0; i < 2; ++i)
    if (dist.class_names[i] == positive_class) pos = i;
  if (pos == 2) raise(ErrorKind::kLabel, "unknown positive class '", positive_class, "'");
  return dist.probabilities[pos] >= tau ? dist.class_names[pos] : dist.class_names[1 - pos];
}

/// Independent logistic per class; selected = {i : logistic(raw_i) >= threshold}.
inline MultiLabelDistribution multilabel_from_logits(std::vector<std::string> class_names,
                                                     std::vector<double> raw_logits,
                                                     double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    raise(ErrorKind::kRange, "threshold ", threshold, " not in [0,1]");
  }
  if (class_names.size() != raw_logits.size()) {
    raise(ErrorKind::kStructural, raw_logits.size(), " logits for ", class_names.size(),
          " classes");
  }
  MultiLabelDistribution out;
  out.threshold = threshold;
  for (std::size_t i = 0; i < raw_logits.size(); ++i) {
    const double p = logistic(raw_logits[i]);
    out.probabilities.push_back(p);
    if (p >= threshold) out.selected.push_back(i);
  }
  out.class_names = std::move(class_names);
  out.raw_logits = std::move(raw_logits);
  return out;
}

inline MultiLabelDistribution classify_multilabel(const TransformerWeights& weights,
                                                  const AdapterSet* adapters,
                                                  const CompiledPrompt& prompt,
                                                  const ClassMapping& mapping, double threshold,
                                                  ForwardCounter* counter = nullptr) {
  ClassDistribution dist = classify(weights, adapters, prompt, mapping, counter);
  return multilabel_from_logits(std::move(dist.class_names), std::move(dist.raw_logits),
                                threshold);
}

// ---------------------------------------------------------------------------
// Reference oracle: greedy decoding with every non-class token masked out.
// It re-runs the model on the prefix before each placeholder, exactly as an
// autoregressive decoder would, and only exists to cross-check classify.

struct GenerationResult {
  std::vector<TokenId> generated;        // one token per placeholder
  std::vector<std::size_t> class_index;  // index of that token in the mapping
};

inline GenerationResult constrained_generate(const TransformerWeights& weights,
                                             const AdapterSet* adapters,
                                             const CompiledPrompt& prompt,
                                             ForwardCounter* counter = nullptr) {
  NoGradGuard no_grad;
  GenerationResult result;
  std::vector<TokenId> context;
  std::size_t cursor = 0;
  for (std::size_t k = 0; k < prompt.task_count(); ++k) {
    const std::size_t p = prompt.placeholder_positions[k];
    context.insert(context.end(), prompt.token_ids.begin() + cursor, prompt.token_ids.begin() + p);
    Tensor logits = forward(weights, adapters, context, {false, nullptr, counter});
    const std::size_t last = context.size() - 1;
    const std::vector<TokenId>& allowed = prompt.class_token_ids[k];
    // Full-vocabulary greedy step under a -inf mask.
    TokenId best = 0;
    double best_value = -std::numeric_limits<double>::infinity();
    for (TokenId v = 0; v < logits.cols(); ++v) {
      bool ok = false;
      for (TokenId a : allowed) ok = ok || a == v;
      const double value = ok ? logits.at(last, v) : -std::numeric_limits<double>::infinity();
      if (value > best_value) {
        best_value = value;
        best = v;
      }
    }
    std::size_t index = 0;
    while (allowed[index] != best) ++index;
    result.generated.push_back(best);
    result.class_index.push_back(index);
    // Later placeholders see the prompt as written, so feed the placeholder
    // token itself rather than the generated one.
    context.push_back(prompt.token_ids[p]);
    cursor = p + 1;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Batch prediction records, one JSON object per line.

inline nlohmann::json prediction_record(const std::string& id, const ClassDistribution& dist) {
  nlohmann::json probs = nlohmann::json::object(), logits = nlohmann::json::object();
  for (std::size_t i = 0; i < dist.size(); ++i) {
    probs[dist.class_names[i]] = dist.probabilities[i];
    logits[dist.class_names[i]] = dist.raw_logits[i];
  }
  return {{"id", id}, {"predicted", predict(dist)}, {"probabilities", probs},
          {"raw_logits", logits}};
}

inline void write_jsonl(const std::string& path, const std::vector<nlohmann::json>& records) {
  std::ofstream out(path);
  if (!out) raise(ErrorKind::kIo, "cannot write ", path);
  for (const auto& r : records) out << r.dump() << "\n";
}

}  // namespace salsa

#endif  // SALSA_INFERENCE_HPP_
