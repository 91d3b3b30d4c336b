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

// Fine-tuning.
//
// The loop is shared by three objectives:
//   SALSA     cross-entropy of softmax(filtered placeholder logits), LoRA only
//   baseline  cross-entropy of a linear head on the final position's hidden
//             state, head + the same LoRA adapters
//   pretrain  full-vocabulary cross-entropy of the answer token, every base
//             weight (builds the prompt-conditioned prior the others start from)
//
// Samples stream in a seeded per-epoch shuffle. An optimizer step consumes
// micro_batch * grad_accum_steps samples; every micro-loss is divided by the
// window size so the update is that of the window's mean loss.

#ifndef SALSA_TRAINING_HPP_
#define SALSA_TRAINING_HPP_

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "salsa/data.hpp"
#include "salsa/error.hpp"
#include "salsa/inference.hpp"
#include "salsa/lora.hpp"
#include "salsa/model.hpp"
#include "salsa/prompt.hpp"
#include "salsa/regression.hpp"

namespace salsa {

struct TrainConfig {
  std::size_t epochs = 6;
  std::size_t grad_accum_steps = 50;
  std::size_t micro_batch = 1;
  double peak_lr = 1e-4;
  std::size_t warmup_steps = 100;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;          // adapter / head init and dropout streams
  std::uint64_t shuffle_seed = 0;  // data order
  std::size_t eval_every = 0;      // optimizer steps; 0 = once per epoch
  std::size_t max_steps = 0;       // 0 = no cap
  bool eval_train = false;         // also evaluate on the training split
  LoraConfig lora;
};

/// Linear warmup 0 -> peak over warmup_steps, then linear decay to 0 at
/// total_steps. The update made at 0-based step k uses lr_at(k).
inline double lr_at(std::size_t step, const TrainConfig& config, std::size_t total_steps) {
  if (step > total_steps) raise(ErrorKind::kRange, "step ", step, " > total ", total_steps);
  const auto s = static_cast<double>(step);
  if (step < config.warmup_steps) {
    return config.peak_lr * s / static_cast<double>(config.warmup_steps);
  }
  if (total_steps <= config.warmup_steps) return config.peak_lr;
  return config.peak_lr * static_cast<double>(total_steps - step) /
         static_cast<double>(total_steps - config.warmup_steps);
}

// ---------------------------------------------------------------------------
// Adam with bias correction.

class Adam {
 public:
  Adam(std::vector<Tensor> params, double beta1, double beta2, double eps)
      : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const Tensor& p : params_) {
      m_.emplace_back(p.size(), 0.0);
      v_.emplace_back(p.size(), 0.0);
    }
  }

  static Adam from(std::vector<Tensor> params, const TrainConfig& c) {
    return Adam(std::move(params), c.adam_beta1, c.adam_beta2, c.adam_eps);
  }

  /// One update from the gradients currently held by the parameters
  /// (absent gradient = 0).
  void step(double lr) {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (const auto& g = params_[i].grad()) {
        for (double x : *g) {
          if (!std::isfinite(x)) {
            raise(ErrorKind::kNumeric, "non-finite gradient in parameter ", i);
          }
        }
      }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      const auto& g = params_[i].grad();
      auto values = params_[i].mutable_values();
      auto& m = m_[i];
      auto& v = v_[i];
      for (std::size_t j = 0; j < values.size(); ++j) {
        const double gj = g ? (*g)[j] : 0.0;
        m[j] = beta1_ * m[j] + (1.0 - beta1_) * gj;
        v[j] = beta2_ * v[j] + (1.0 - beta2_) * gj * gj;
        values[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps_);
      }
    }
  }

  void zero_grad() {
    for (Tensor& p : params_) p.zero_grad();
  }

  double grad_norm() const {
    double total = 0.0;
    for (const Tensor& p : params_)
      if (const auto& g = p.grad())
        for (double x : *g) total += x * x;
    return std::sqrt(total);
  }

  std::size_t steps_taken() const { return t_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  double beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

// ---------------------------------------------------------------------------
// Logs.

struct StepRecord {
  std::size_t step = 0;  // updates applied so far, including this one
  double lr = 0.0;
  double loss = 0.0;
  double grad_norm = 0.0;
  friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

struct EvalRecord {
  std::size_t step = 0;
  std::string split;
  std::string metric;
  double value = 0.0;
  friend bool operator==(const EvalRecord&, const EvalRecord&) = default;
};

struct TrainLog {
  std::vector<StepRecord> steps;
  std::vector<EvalRecord> evals;

  std::optional<double> eval_value(std::size_t step, const std::string& split,
                                   const std::string& metric) const {
    for (const auto& e : evals)
      if (e.step == step && e.split == split && e.metric == metric) return e.value;
    return std::nullopt;
  }

  std::vector<std::size_t> eval_steps() const {
    std::vector<std::size_t> out;
    for (const auto& e : evals)
      if (out.empty() || out.back() != e.step) out.push_back(e.step);
    return out;
  }

  friend bool operator==(const TrainLog&, const TrainLog&) = default;
};

inline std::string format_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

/// Step CSV ("step,lr,loss,grad_norm") after a "# <comment>" line.
inline std::string step_csv(const TrainLog& log, const std::string& comment) {
  std::ostringstream out;
  out << "# " << comment << "\nstep,lr,loss,grad_norm\n";
  for (const auto& s : log.steps) {
    out << s.step << "," << format_number(s.lr) << "," << format_number(s.loss) << ","
        << format_number(s.grad_norm) << "\n";
  }
  return out.str();
}

/// Eval CSV ("step,split,metric,value") after a "# <comment>" line.
inline std::string eval_csv(const TrainLog& log, const std::string& comment) {
  std::ostringstream out;
  out << "# " << comment << "\nstep,split,metric,value\n";
  for (const auto& e : log.evals)
    out << e.step << "," << e.split << "," << e.metric << "," << format_number(e.value) << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Examples: compiled prompts with their targets.

struct Example {
  std::string id;
  CompiledPrompt prompt;
  std::vector<double> target;  // distribution over the task's classes
  std::size_t label = 0;       // argmax of target
  std::optional<double> value;  // regression ground truth
};

/// Compiles `data` against the first task of `spec`.
inline std::vector<Example> make_examples(const PromptSpec& spec, const Vocabulary& vocab,
                                          const Dataset& data, std::size_t max_seq_len) {
  const TaskBlock& task = spec.tasks.front();
  std::vector<Example> out;
  out.reserve(data.size());
  for (const LabeledSample& s : data) {
    Example e;
    e.id = s.id;
    e.prompt = compile(spec, vocab, s.fields, max_seq_len);
    if (!task.grid.empty()) {
      if (!s.target) raise(ErrorKind::kLabel, "sample ", s.id, " has no regression target");
      e.value = s.target;
      e.target = encode_target(DiscreteGrid::from_task(task), *s.target);
      e.label = static_cast<std::size_t>(
          std::max_element(e.target.begin(), e.target.end()) - e.target.begin());
    } else {
      e.label = task.mapping.index_of(s.label);
      e.target.assign(task.mapping.size(), 0.0);
      e.target[e.label] = 1.0;
    }
    out.push_back(std::move(e));
  }
  return out;
}

struct EvalResult {
  bool regression = false;
  double accuracy = 0.0;
  double mean_loss = 0.0;
  double pearson = 0.0;  // regression only; 0 when undefined
  double spearman = 0.0;
  std::vector<std::vector<double>> probabilities;

  /// Model-selection metric: accuracy, or Pearson for regression.
  double selection_metric() const { return regression ? pearson : accuracy; }
};

using DistributionFn = std::function<std::vector<double>(const Example&)>;

inline EvalResult evaluate(const DistributionFn& dist, const std::vector<Example>& examples,
                           const std::vector<double>& grid = {}) {
  EvalResult r;
  r.regression = !grid.empty();
  std::vector<double> predicted, truth;
  std::size_t correct = 0;
  double loss = 0.0;
  for (const Example& e : examples) {
    std::vector<double> p = dist(e);
    std::size_t best = 0;
    for (std::size_t i = 1; i < p.size(); ++i)
      if (p[i] > p[best]) best = i;
    if (best == e.label) ++correct;
    for (std::size_t i = 0; i < p.size(); ++i)
      if (e.target[i] != 0.0) loss -= e.target[i] * std::log(std::max(p[i], kLogClamp));
    if (r.regression) {
      predicted.push_back(expected_value(grid, p));
      truth.push_back(*e.value);
    }
    r.probabilities.push_back(std::move(p));
  }
  const auto n = static_cast<double>(examples.size());
  r.accuracy = static_cast<double>(correct) / n;
  r.mean_loss = loss / n;
  if (r.regression) {
    try {
      r.pearson = pearson(predicted, truth);
      r.spearman = spearman(predicted, truth);
    } catch (const Error&) {
      r.pearson = r.spearman = 0.0;
    }
  }
  return r;
}

/// SALSA distributions via classify: one forward pass per example.
inline DistributionFn salsa_distribution(const TransformerWeights& weights,
                                         const AdapterSet* adapters, const TaskBlock& task,
                                         ForwardCounter* counter = nullptr) {
  return [&weights, adapters, &task, counter](const Example& e) {
    return classify(weights, adapters, e.prompt, task.mapping, counter).probabilities;
  };
}

inline EvalResult evaluate_salsa(const TransformerWeights& weights, const AdapterSet* adapters,
                                 const PromptSpec& spec, const std::vector<Example>& examples,
                                 ForwardCounter* counter = nullptr) {
  const TaskBlock& task = spec.tasks.front();
  return evaluate(salsa_distribution(weights, adapters, task, counter), examples, task.grid);
}

// ---------------------------------------------------------------------------
// The shared loop.

struct Objective {
  // [1, n] probabilities for one example, differentiable w.r.t. params.
  std::function<Tensor(const Example&, const ForwardOptions&)> probabilities;
  std::vector<Tensor> params;
  // Called with the number of updates applied so far: 0, every eval point,
  // and after the last step.
  std::function<void(std::size_t step)> on_eval;
  // Extra context for a non-finite loss report.
  std::function<std::string(const Example&)> describe;
};

inline std::size_t steps_per_epoch(std::size_t n, const TrainConfig& c) {
  const std::size_t window = c.micro_batch * c.grad_accum_steps;
  return (n + window - 1) / window;
}

inline std::size_t total_steps(std::size_t n, const TrainConfig& c) {
  const std::size_t all = c.epochs * steps_per_epoch(n, c);
  return c.max_steps ? std::min(all, c.max_steps) : all;
}

inline void validate(const TrainConfig& c, std::size_t n_train) {
  if (n_train == 0) raise(ErrorKind::kConfiguration, "training set is empty");
  if (c.epochs == 0 || c.grad_accum_steps == 0 || c.micro_batch == 0) {
    raise(ErrorKind::kConfiguration, "epochs, grad_accum_steps and micro_batch must be positive");
  }
  if (!(c.peak_lr >= 0.0) || !(c.adam_eps > 0.0) || !(c.adam_beta1 >= 0.0 && c.adam_beta1 < 1.0) ||
      !(c.adam_beta2 >= 0.0 && c.adam_beta2 < 1.0)) {
    raise(ErrorKind::kConfiguration, "invalid optimizer settings");
  }
  const std::size_t total = total_steps(n_train, c);
  if (c.warmup_steps >= total) {
    raise(ErrorKind::kConfiguration, "warmup_steps ", c.warmup_steps,
          " must be below the total optimizer steps ", total);
  }
}

/// Sample order for the whole run: one seeded shuffle per epoch.
inline std::vector<std::size_t> sample_stream(std::size_t n, const TrainConfig& c) {
  std::mt19937_64 rng(c.shuffle_seed);
  std::vector<std::size_t> stream;
  std::vector<std::size_t> order(n);
  for (std::size_t e = 0; e < c.epochs; ++e) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    stream.insert(stream.end(), order.begin(), order.end());
  }
  return stream;
}

/// Dropout stream of one optimizer step.
inline std::mt19937_64 dropout_stream(std::uint64_t seed, std::size_t step) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(step), 0x5a15au};
  return std::mt19937_64(seq);
}

inline TrainLog optimize(const Objective& objective, const std::vector<Example>& train,
                         const TrainConfig& config) {
  validate(config, train.size());
  const std::size_t total = total_steps(train.size(), config);
  const std::size_t per_epoch = steps_per_epoch(train.size(), config);
  const std::size_t eval_every = config.eval_every ? config.eval_every : per_epoch;
  const std::size_t window = config.micro_batch * config.grad_accum_steps;
  const std::vector<std::size_t> stream = sample_stream(train.size(), config);

  Adam adam = Adam::from(objective.params, config);
  TrainLog log;
  if (objective.on_eval) objective.on_eval(0);
  std::size_t cursor = 0;
  for (std::size_t step = 0; step < total; ++step) {
    const double lr = lr_at(step, config, total);
    const std::size_t count = std::min(window, stream.size() - cursor);
    std::mt19937_64 dropout_rng = dropout_stream(config.seed, step);
    const ForwardOptions options{true, &dropout_rng, nullptr};
    adam.zero_grad();
    double loss_sum = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      const Example& e = train[stream[cursor + i]];
      Tensor probs = objective.probabilities(e, options);
      Tensor loss = cross_entropy(probs, Tensor({1, e.target.size()}, e.target));
      if (!std::isfinite(loss.item())) {
        std::ostringstream dump;
        dump << "non-finite loss at step " << step << " on sample " << e.id;
        if (objective.describe) dump << ": " << objective.describe(e);
        raise(ErrorKind::kNumeric, dump.str());
      }
      loss_sum += loss.item();
      scale(loss, 1.0 / static_cast<double>(count)).backward();
    }
    cursor += count;
    const double norm = adam.grad_norm();
    adam.step(lr);
    log.steps.push_back({step + 1, lr, loss_sum / static_cast<double>(count), norm});
    if (objective.on_eval && ((step + 1) % eval_every == 0 || step + 1 == total)) {
      objective.on_eval(step + 1);
    }
  }
  adam.zero_grad();
  return log;
}

// ---------------------------------------------------------------------------
// SALSA.

/// softmax over the filtered placeholder logits of the first task.
inline Tensor salsa_probabilities(const TransformerWeights& weights, const AdapterSet* adapters,
                                  const Example& e, const ForwardOptions& options) {
  return softmax(placeholder_logits(weights, adapters, e.prompt, options).front(), 1);
}

/// Placeholder loss of one batch, backpropagated into the adapters with every
/// micro-loss divided by `divisor`. Returns the batch mean loss.
inline double train_step(const TransformerWeights& weights, const AdapterSet& adapters,
                         const std::vector<Example>& batch, double divisor = 1.0,
                         const ForwardOptions& options = {}) {
  double total = 0.0;
  for (const Example& e : batch) {
    if (e.prompt.task_count() != 1) {
      raise(ErrorKind::kArity, "train_step needs single-task prompts");
    }
    Tensor probs = salsa_probabilities(weights, &adapters, e, options);
    Tensor loss = cross_entropy(probs, Tensor({1, e.target.size()}, e.target));
    if (!std::isfinite(loss.item())) {
      NoGradGuard no_grad;
      const auto raw = placeholder_logits(weights, &adapters, e.prompt).front().values();
      std::ostringstream dump;
      dump << "non-finite loss on sample " << e.id << "; raw filtered logits:";
      for (double v : raw) dump << " " << v;
      raise(ErrorKind::kNumeric, dump.str());
    }
    total += loss.item();
    scale(loss, 1.0 / divisor).backward();
  }
  return total / static_cast<double>(batch.size());
}

struct TrainResult {
  TrainLog log;
  AdapterSet best_adapters;
  AdapterSet final_adapters;
  std::size_t best_step = 0;
  double best_metric = -std::numeric_limits<double>::infinity();
  ForwardCounter eval_passes;
  // Baseline only.
  Tensor head_weight;
  Tensor head_bias;
};

namespace detail {

inline void record_eval(TrainLog& log, std::size_t step, const std::string& split,
                        const EvalResult& r) {
  if (r.regression) {
    log.evals.push_back({step, split, "pearson", r.pearson});
    log.evals.push_back({step, split, "spearman", r.spearman});
  } else {
    log.evals.push_back({step, split, "accuracy", r.accuracy});
  }
  log.evals.push_back({step, split, "loss", r.mean_loss});
}

}  // namespace detail

inline TrainResult run_training(const TransformerWeights& base, const PromptSpec& spec,
                                const Vocabulary& vocab, const Dataset& train,
                                const Dataset& val, const TrainConfig& config) {
  if (train.empty() || val.empty()) {
    raise(ErrorKind::kConfiguration, "training and validation sets must be non-empty");
  }
  if (spec.tasks.size() != 1) raise(ErrorKind::kArity, "training needs a single-task prompt");
  validate(config, train.size());
  TransformerWeights weights = base.clone();
  AdapterSet adapters = attach(weights, config.lora, config.seed);
  const auto train_ex = make_examples(spec, vocab, train, weights.config.max_seq_len);
  const auto val_ex = make_examples(spec, vocab, val, weights.config.max_seq_len);

  TrainResult result;
  TrainLog eval_log;
  Objective objective;
  objective.params.clear();
  for (auto& [name, t] : adapters.parameters()) objective.params.push_back(t);
  objective.probabilities = [&](const Example& e, const ForwardOptions& o) {
    return salsa_probabilities(weights, &adapters, e, o);
  };
  objective.describe = [&](const Example& e) {
    NoGradGuard no_grad;
    std::ostringstream os;
    os << "raw filtered logits:";
    for (double v : placeholder_logits(weights, &adapters, e.prompt).front().values())
      os << " " << v;
    return os.str();
  };
  objective.on_eval = [&](std::size_t step) {
    const EvalResult v = evaluate_salsa(weights, &adapters, spec, val_ex, &result.eval_passes);
    detail::record_eval(eval_log, step, "val", v);
    if (config.eval_train) {
      detail::record_eval(eval_log, step, "train",
                          evaluate_salsa(weights, &adapters, spec, train_ex, &result.eval_passes));
    }
    if (v.selection_metric() > result.best_metric) {  // ties keep the earlier step
      result.best_metric = v.selection_metric();
      result.best_step = step;
      result.best_adapters = adapters.clone();
    }
  };
  result.log = optimize(objective, train_ex, config);
  result.log.evals = std::move(eval_log.evals);
  result.final_adapters = adapters.clone();
  return result;
}

// ---------------------------------------------------------------------------
// Linear-head baseline.

struct LinearHeadBaseline {
  Tensor weight;  // [num_classes, d_model]
  Tensor bias;    // [num_classes]

  static LinearHeadBaseline init(std::size_t num_classes, std::size_t d_model,
                                 std::uint64_t seed) {
    std::mt19937_64 rng(seed ^ 0x6865616475ull);
    LinearHeadBaseline head{detail::random_normal({num_classes, d_model}, 0.02, rng),
                            Tensor::zeros({num_classes}, true)};
    head.weight.set_requires_grad(true);
    return head;
  }

  /// [1, num_classes] probabilities from the last position's hidden state.
  Tensor probabilities(const TransformerWeights& weights, const AdapterSet* adapters,
                       const std::vector<TokenId>& ids, const ForwardOptions& options) const {
    Tensor hidden = hidden_states(weights, adapters, ids, options);
    const std::size_t last = hidden.rows() - 1;
    Tensor logits = add_rowwise(matmul_transposed(gather_rows(hidden, std::vector{last}), weight),
                                bias);
    return softmax(logits, 1);
  }
};

inline TrainResult run_baseline(const TransformerWeights& base, const PromptSpec& spec,
                                const Vocabulary& vocab, const Dataset& train,
                                const Dataset& val, const TrainConfig& config) {
  if (train.empty() || val.empty()) {
    raise(ErrorKind::kConfiguration, "training and validation sets must be non-empty");
  }
  if (spec.tasks.size() != 1) raise(ErrorKind::kArity, "training needs a single-task prompt");
  validate(config, train.size());
  TransformerWeights weights = base.clone();
  AdapterSet adapters = attach(weights, config.lora, config.seed);
  const TaskBlock& task = spec.tasks.front();
  LinearHeadBaseline head =
      LinearHeadBaseline::init(task.mapping.size(), weights.config.d_model, config.seed);
  const auto train_ex = make_examples(spec, vocab, train, weights.config.max_seq_len);
  const auto val_ex = make_examples(spec, vocab, val, weights.config.max_seq_len);

  TrainResult result;
  TrainLog eval_log;
  DistributionFn dist = [&](const Example& e) {
    NoGradGuard no_grad;
    const Tensor p = head.probabilities(weights, &adapters, e.prompt.token_ids,
                                        {false, nullptr, &result.eval_passes});
    return std::vector<double>(p.values().begin(), p.values().end());
  };
  Objective objective;
  for (auto& [name, t] : adapters.parameters()) objective.params.push_back(t);
  objective.params.push_back(head.weight);
  objective.params.push_back(head.bias);
  objective.probabilities = [&](const Example& e, const ForwardOptions& o) {
    return head.probabilities(weights, &adapters, e.prompt.token_ids, o);
  };
  objective.on_eval = [&](std::size_t step) {
    const EvalResult v = evaluate(dist, val_ex, task.grid);
    detail::record_eval(eval_log, step, "val", v);
    if (config.eval_train) detail::record_eval(eval_log, step, "train", evaluate(dist, train_ex, task.grid));
    if (v.selection_metric() > result.best_metric) {
      result.best_metric = v.selection_metric();
      result.best_step = step;
      result.best_adapters = adapters.clone();
    }
  };
  result.log = optimize(objective, train_ex, config);
  result.log.evals = std::move(eval_log.evals);
  result.final_adapters = adapters.clone();
  result.head_weight = head.weight.clone();
  result.head_bias = head.bias.clone();
  return result;
}

// ---------------------------------------------------------------------------
// Seed sweeps.

inline double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Sample standard deviation (n - 1); 0 for fewer than two values.
inline double stddev_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

struct SweepRun {
  std::uint64_t seed = 0;
  TrainResult result;
  double best_val = 0.0;
  std::optional<double> test;  // best checkpoint on the test split
};

struct SweepResult {
  std::vector<SweepRun> runs;
  double val_mean = 0.0, val_std = 0.0;
  double test_mean = 0.0, test_std = 0.0;
};

/// Run i uses seed + i and shuffle_seed + i.
inline SweepResult run_seed_sweep(const TransformerWeights& base, const PromptSpec& spec,
                                  const Vocabulary& vocab, const Dataset& train,
                                  const Dataset& val, const Dataset* test,
                                  const TrainConfig& config, std::size_t k) {
  if (k == 0) raise(ErrorKind::kConfiguration, "a sweep needs at least one seed");
  SweepResult sweep;
  std::vector<double> vals, tests;
  for (std::size_t i = 0; i < k; ++i) {
    TrainConfig c = config;
    c.seed = config.seed + i;
    c.shuffle_seed = config.shuffle_seed + i;
    SweepRun run;
    run.seed = c.seed;
    run.result = run_training(base, spec, vocab, train, val, c);
    run.best_val = run.result.best_metric;
    vals.push_back(run.best_val);
    if (test) {
      const auto test_ex = make_examples(spec, vocab, *test, base.config.max_seq_len);
      run.test = evaluate_salsa(base, &run.result.best_adapters, spec, test_ex).selection_metric();
      tests.push_back(*run.test);
    }
    sweep.runs.push_back(std::move(run));
  }
  sweep.val_mean = mean_of(vals);
  sweep.val_std = stddev_of(vals);
  sweep.test_mean = mean_of(tests);
  sweep.test_std = stddev_of(tests);
  return sweep;
}

// ---------------------------------------------------------------------------
// Base-model pretraining: instruction tuning of every weight with the
// ordinary next-token loss at the answer position, over synthetic prompts.
// The default teaches one skill under semantic labels in their natural
// orientation (Y for the affirmative class), which is the kind of token prior
// a pretrained model brings. Mixtures with varying mappings or keywords stay
// at chance at this model size within a few minutes of CPU time.

struct PretrainConfig {
  std::size_t samples = 6000;
  std::size_t grad_accum_steps = 4;
  double peak_lr = 1e-3;
  std::size_t warmup_steps = 100;
  std::uint64_t seed = 0;
  std::vector<TaskKind> kinds = {TaskKind::kKeyword};
  std::string keywords = "z";  // letters the keyword questions ask about
  std::vector<MappingStrategy> strategies = {MappingStrategy::kSemantic};
};

inline std::vector<Example> pretraining_corpus(const Vocabulary& vocab, const ModelConfig& model,
                                               const PretrainConfig& config) {
  if (config.kinds.empty() || config.keywords.empty()) {
    raise(ErrorKind::kConfiguration, "pretraining needs at least one task kind and keyword");
  }
  std::mt19937_64 rng(config.seed ^ 0x707265ull);
  if (config.strategies.empty()) raise(ErrorKind::kConfiguration, "pretraining needs a strategy");
  // Semantic labels only fit binary tasks; topic prompts fall back to the rest.
  std::vector<MappingStrategy> multi;
  for (auto st : config.strategies)
    if (st != MappingStrategy::kSemantic && st != MappingStrategy::kReverseSemantic)
      multi.push_back(st);
  if (multi.empty()) multi.push_back(MappingStrategy::kNumerical);
  auto pick = [&rng](const std::vector<MappingStrategy>& from) {
    return from[std::uniform_int_distribution<std::size_t>(0, from.size() - 1)(rng)];
  };
  std::vector<Example> out;
  out.reserve(config.samples);
  for (std::size_t i = 0; i < config.samples; ++i) {
    SyntheticTaskSpec spec;
    spec.kind = config.kinds[i % config.kinds.size()];
    if (spec.kind == TaskKind::kSimilarity || spec.kind == TaskKind::kNoisyChannel) {
      raise(ErrorKind::kConfiguration, "pretraining supports keyword, topic and entailment");
    }
    spec.keyword = config.keywords[std::uniform_int_distribution<std::size_t>(
        0, config.keywords.size() - 1)(rng)];
    detail::validate_task(spec);
    PromptSpec prompt;
    prompt = default_prompt(spec, vocab,
                            pick(spec.kind == TaskKind::kTopic ? multi : config.strategies));
    // Pick the class uniformly, then draw a sample of that class.
    const auto classes = task_classes(spec.kind);
    const std::size_t cls = std::uniform_int_distribution<std::size_t>(0, classes.size() - 1)(rng);
    LabeledSample s = detail::make_sample(spec, cls, rng);
    Example e;
    e.id = "pretrain-" + std::to_string(i);
    e.prompt = compile(prompt, vocab, s.fields, model.max_seq_len);
    e.label = vocab.id(prompt.tasks[0].mapping.label_of(s.label));
    e.target.assign(model.vocab_size, 0.0);
    e.target[e.label] = 1.0;
    out.push_back(std::move(e));
  }
  return out;
}

/// Full-vocabulary next-token probabilities at the first answer slot.
inline Tensor answer_token_probabilities(const TransformerWeights& weights, const Example& e,
                                         const ForwardOptions& options) {
  Tensor hidden = hidden_states(weights, nullptr, e.prompt.token_ids, options);
  std::vector<std::size_t> row{e.prompt.placeholder_positions.front() - 1};
  return softmax(project_logits(weights, gather_rows(hidden, row)), 1);
}

inline TransformerWeights pretrain_base(const ModelConfig& model, const Vocabulary& vocab,
                                        const PretrainConfig& config,
                                        TrainLog* log_out = nullptr) {
  if (vocab.size() != model.vocab_size) {
    raise(ErrorKind::kConfiguration, "vocabulary has ", vocab.size(), " tokens, model expects ",
          model.vocab_size);
  }
  TransformerWeights weights = init_weights(model);
  weights.set_trainable(true);
  const auto corpus = pretraining_corpus(vocab, model, config);
  TrainConfig tc;
  tc.epochs = 1;
  tc.grad_accum_steps = config.grad_accum_steps;
  tc.peak_lr = config.peak_lr;
  tc.warmup_steps = config.warmup_steps;
  tc.seed = config.seed;
  tc.shuffle_seed = config.seed;
  Objective objective;
  for (auto& [name, t] : weights.named()) objective.params.push_back(t);
  objective.probabilities = [&](const Example& e, const ForwardOptions& o) {
    return answer_token_probabilities(weights, e, o);
  };
  TrainLog log = optimize(objective, corpus, tc);
  weights.set_trainable(false);
  if (log_out) *log_out = std::move(log);
  return weights;
}

}  // namespace salsa

#endif  // SALSA_TRAINING_HPP_
