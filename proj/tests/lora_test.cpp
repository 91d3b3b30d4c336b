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

#include "salsa/lora.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

namespace salsa {
namespace {

void randomize(Tensor t, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, scale);
  for (double& v : t.mutable_values()) v = dist(rng);
}

std::vector<TokenId> some_ids(std::size_t n) {
  std::vector<TokenId> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = (i * 37 + 11) % 128;
  return ids;
}

TEST(LoraConfigTest, DefaultsMatchPublishedSettings) {
  LoraConfig c;
  EXPECT_EQ(c.rank, 8u);
  EXPECT_EQ(c.alpha, 16.0);
  EXPECT_EQ(c.dropout_p, 0.05);
}

TEST(AttachTest, TargetsWqWvWithZeroB) {
  auto w = init_weights(ModelConfig{});
  auto adapters = attach(w, LoraConfig{}, 1);
  ASSERT_EQ(adapters.adapters().size(), 4u);
  EXPECT_EQ(adapters.adapters()[0].target_name, "layers.0.attn.wq");
  EXPECT_EQ(adapters.adapters()[1].target_name, "layers.0.attn.wv");
  for (const auto& a : adapters.adapters()) {
    EXPECT_EQ(a.scaling(), 2.0);
    for (double v : a.b.values()) EXPECT_EQ(v, 0.0);
    EXPECT_TRUE(a.a.requires_grad());
    EXPECT_TRUE(a.b.requires_grad());
  }
  for (const auto& [name, t] : w.named()) EXPECT_FALSE(t.requires_grad()) << name;
}

TEST(AttachTest, TrainableCountIsRankTimesInPlusOut) {
  ModelConfig c;
  auto w = init_weights(c);
  LoraConfig lc;
  lc.targets = {"layers.0.attn.wq", "layers.1.mlp.w1", "layers.1.mlp.w2"};
  auto adapters = attach(w, lc, 2);
  const std::size_t expected = 8 * (64 + 64) + 8 * (64 + 256) + 8 * (256 + 64);
  EXPECT_EQ(adapters.parameter_count(), expected);
  EXPECT_EQ(attach(w, LoraConfig{}, 2).parameter_count(), 4u * 8 * (64 + 64));
}

TEST(AttachTest, UnknownTargetIsConfigurationError) {
  auto w = init_weights(ModelConfig{});
  LoraConfig lc;
  lc.targets = {"layers.9.attn.wq"};
  try {
    attach(w, lc, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfiguration);
    EXPECT_NE(std::string(e.what()).find("layers.9.attn.wq"), std::string::npos);
  }
}

TEST(AttachTest, RankLargerThanMatrixIsRejected) {
  auto w = init_weights(ModelConfig{});
  LoraConfig lc;
  lc.rank = 65;
  EXPECT_THROW(attach(w, lc, 1), Error);
}

TEST(ApplyTest, ZeroBEqualsBasePathExactly) {
  std::mt19937_64 rng(1);
  LoraAdapter adapter{"w", Tensor::zeros({2, 3}), Tensor::zeros({4, 2}), 2, 4.0, 0.0};
  randomize(adapter.a, 1, 1.0);
  Tensor base = Tensor::zeros({4, 3});
  randomize(base, 2, 1.0);
  Tensor x = Tensor::zeros({5, 3});
  randomize(x, 3, 1.0);
  Tensor with = lora_apply(adapter, base, x);
  Tensor without = matmul_transposed(x, base);
  for (std::size_t i = 0; i < with.size(); ++i) ASSERT_EQ(with[i], without[i]);
}

TEST(ApplyTest, HandComputedRankOneUpdate) {
  // A = [[1, 0]], B = [[2], [0]], alpha = 1, x = [1, 0]: adapter adds [2, 0].
  LoraAdapter adapter{"w", Tensor::matrix({{1, 0}}), Tensor::matrix({{2}, {0}}), 1, 1.0, 0.0};
  Tensor base = Tensor::zeros({2, 2});
  Tensor y = lora_apply(adapter, base, Tensor::matrix({{1, 0}}));
  EXPECT_EQ(y.at(0, 0), 2.0);
  EXPECT_EQ(y.at(0, 1), 0.0);
}

TEST(ApplyTest, ZeroDropoutTrainingEqualsInference) {
  LoraAdapter adapter{"w", Tensor::zeros({2, 3}), Tensor::zeros({3, 2}), 2, 2.0, 0.0};
  randomize(adapter.a, 4, 1.0);
  randomize(adapter.b, 5, 1.0);
  Tensor base = Tensor::zeros({3, 3});
  Tensor x = Tensor::zeros({4, 3});
  randomize(x, 6, 1.0);
  std::mt19937_64 rng(0);
  Tensor train = lora_apply(adapter, base, x, {true, &rng});
  Tensor infer = lora_apply(adapter, base, x);
  for (std::size_t i = 0; i < train.size(); ++i) ASSERT_EQ(train[i], infer[i]);
}

TEST(ApplyTest, DropoutOnlyTouchesAdapterPath) {
  LoraAdapter adapter{"w", Tensor::zeros({2, 3}), Tensor::zeros({3, 2}), 2, 2.0, 0.5};
  Tensor base = Tensor::zeros({3, 3});
  randomize(base, 7, 1.0);
  Tensor x = Tensor::zeros({4, 3});
  randomize(x, 8, 1.0);
  std::mt19937_64 rng(0);
  // B = 0, so whatever dropout does to the adapter input the output is the
  // untouched base path.
  Tensor train = lora_apply(adapter, base, x, {true, &rng});
  Tensor plain = matmul_transposed(x, base);
  for (std::size_t i = 0; i < train.size(); ++i) ASSERT_EQ(train[i], plain[i]);
}

TEST(ApplyTest, ShapeMismatchIsDimensionError) {
  LoraAdapter adapter{"w", Tensor::zeros({2, 3}), Tensor::zeros({3, 2}), 2, 2.0, 0.0};
  EXPECT_THROW(lora_apply(adapter, Tensor::zeros({3, 4}), Tensor::zeros({1, 4})), Error);
  EXPECT_THROW(lora_apply(adapter, Tensor::zeros({3, 3}), Tensor::zeros({1, 4})), Error);
}

TEST(MergeTest, ZeroBLeavesBaseUnchanged) {
  LoraAdapter adapter{"w", Tensor::zeros({2, 3}), Tensor::zeros({4, 2}), 2, 4.0, 0.0};
  randomize(adapter.a, 1, 1.0);
  Tensor base = Tensor::zeros({4, 3});
  randomize(base, 2, 1.0);
  Tensor merged = lora_merge(adapter, base);
  for (std::size_t i = 0; i < base.size(); ++i) ASSERT_EQ(merged[i], base[i]);
}

TEST(MergeTest, SubtractingTheUpdateRecoversBase) {
  LoraAdapter adapter{"w", Tensor::zeros({2, 3}), Tensor::zeros({4, 2}), 2, 4.0, 0.0};
  randomize(adapter.a, 1, 1.0);
  randomize(adapter.b, 3, 1.0);
  Tensor base = Tensor::zeros({4, 3});
  randomize(base, 2, 1.0);
  Tensor merged = lora_merge(adapter, base);
  Tensor delta = matmul(adapter.b, adapter.a);
  for (std::size_t i = 0; i < base.size(); ++i) {
    EXPECT_NEAR(merged[i] - adapter.scaling() * delta[i], base[i], 1e-12);
  }
}

TEST(MergeTest, ShapeMismatchIsDimensionError) {
  LoraAdapter adapter{"w", Tensor::zeros({2, 3}), Tensor::zeros({4, 2}), 2, 4.0, 0.0};
  EXPECT_THROW(lora_merge(adapter, Tensor::zeros({3, 4})), Error);
}

TEST(MergeTest, MergedForwardMatchesAdapterForward) {
  auto w = init_weights(ModelConfig{});
  auto adapters = attach(w, LoraConfig{}, 9);
  std::uint64_t seed = 10;
  for (auto& a : adapters.adapters()) randomize(a.b, seed++, 0.1);
  const auto ids = some_ids(40);
  Tensor adapted = forward(w, &adapters, ids);
  Tensor merged = forward(merge(w, adapters), nullptr, ids);
  double worst = 0.0;
  for (std::size_t i = 0; i < adapted.size(); ++i)
    worst = std::max(worst, std::abs(adapted[i] - merged[i]));
  EXPECT_LT(worst, 1e-9);
  EXPECT_GT(worst, 0.0);  // the two routes are genuinely different
}

TEST(GradientIsolationTest, OnlyAdaptersReceiveGradients) {
  auto w = init_weights(ModelConfig{});
  auto adapters = attach(w, LoraConfig{}, 3);
  for (auto& a : adapters.adapters()) randomize(a.b, 4, 0.1);
  Tensor logits = forward(w, &adapters, some_ids(12));
  std::vector<std::size_t> cls = {3, 4};
  std::vector<std::size_t> label = {1};
  cross_entropy(softmax(take(logits, 10, cls), 1), one_hot(label, 2)).backward();
  for (const auto& [name, t] : w.named()) EXPECT_FALSE(t.grad().has_value()) << name;
  for (const auto& [name, t] : adapters.parameters()) EXPECT_TRUE(t.grad().has_value()) << name;
}

TEST(AdapterCheckpointTest, RoundTripIsBitExact) {
  auto w = init_weights(ModelConfig{});
  auto adapters = attach(w, LoraConfig{}, 3);
  for (auto& a : adapters.adapters()) randomize(a.b, 4, 0.1);
  const auto dir = std::filesystem::temp_directory_path() / "salsa_adapter_ckpt";
  save_adapters(adapters, w.config, (dir / "best").string());
  auto loaded = load_adapters((dir / "best").string(), w.config);
  ASSERT_EQ(loaded.adapters().size(), adapters.adapters().size());
  for (std::size_t i = 0; i < loaded.adapters().size(); ++i) {
    const auto& x = adapters.adapters()[i];
    const auto& y = loaded.adapters()[i];
    EXPECT_EQ(x.target_name, y.target_name);
    EXPECT_EQ(x.rank, y.rank);
    EXPECT_EQ(x.alpha, y.alpha);
    EXPECT_EQ(x.dropout_p, y.dropout_p);
    for (std::size_t j = 0; j < x.a.size(); ++j) ASSERT_EQ(x.a[j], y.a[j]);
    for (std::size_t j = 0; j < x.b.size(); ++j) ASSERT_EQ(x.b[j], y.b[j]);
  }
  std::filesystem::remove_all(dir);
}

TEST(AdapterCheckpointTest, IncompatibleModelNamesMismatchedFields) {
  auto w = init_weights(ModelConfig{});
  auto adapters = attach(w, LoraConfig{}, 3);
  const auto dir = std::filesystem::temp_directory_path() / "salsa_adapter_mismatch";
  save_adapters(adapters, w.config, (dir / "a").string());
  ModelConfig other;
  other.d_ff = 128;
  try {
    load_adapters((dir / "a").string(), other);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kCompatibility);
    EXPECT_NE(std::string(e.what()).find("d_ff"), std::string::npos) << e.what();
  }
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace salsa
