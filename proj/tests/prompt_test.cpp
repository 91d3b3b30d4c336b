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

#include "salsa/prompt.hpp"

#include <gtest/gtest.h>

#include <algorithm>

#include "salsa/data.hpp"

namespace salsa {
namespace {

const Vocabulary& vocab() {
  static const Vocabulary v = Vocabulary::standard();
  return v;
}

std::vector<std::pair<std::string, std::string>> pairs_of(const ClassMapping& m) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : m.entries) out.emplace_back(e.class_name, e.label_token);
  return out;
}

const std::vector<std::string> kRte = {"entailment", "not entailment"};

PromptSpec rte_spec(MappingStrategy strategy = MappingStrategy::kNumerical) {
  SyntheticTaskSpec task;
  task.kind = TaskKind::kEntailment;
  return default_prompt(task, vocab(), strategy);
}

Fields rte_sample() {
  return {{"premise", "mangla was summoned"}, {"hypothesis", "mangla"}};
}

TEST(BuildMappingTest, NumericalAssignsDigitsInOrder) {
  const auto m = build_mapping(vocab(), kRte, MappingStrategy::kNumerical);
  using P = std::vector<std::pair<std::string, std::string>>;
  EXPECT_EQ(pairs_of(m), (P{{"entailment", "0"}, {"not entailment", "1"}}));
  EXPECT_EQ(m.token_ids(), (std::vector<TokenId>{vocab().id("0"), vocab().id("1")}));
}

TEST(BuildMappingTest, ReverseNumericalInvertsAssignment) {
  const auto m = build_mapping(vocab(), kRte, MappingStrategy::kReverseNumerical);
  using P = std::vector<std::pair<std::string, std::string>>;
  EXPECT_EQ(pairs_of(m), (P{{"entailment", "1"}, {"not entailment", "0"}}));
}

TEST(BuildMappingTest, AllSixBinaryStrategies) {
  const std::vector<std::pair<MappingStrategy, std::pair<std::string, std::string>>> expected = {
      {MappingStrategy::kNumerical, {"0", "1"}},
      {MappingStrategy::kReverseNumerical, {"1", "0"}},
      {MappingStrategy::kAlphabetical, {"A", "B"}},
      {MappingStrategy::kReverseAlphabetical, {"B", "A"}},
      {MappingStrategy::kSemantic, {"Y", "N"}},
      {MappingStrategy::kReverseSemantic, {"N", "Y"}},
  };
  for (const auto& [strategy, labels] : expected) {
    const auto m = build_mapping(vocab(), kRte, strategy);
    EXPECT_EQ(m.entries[0].label_token, labels.first) << to_string(strategy);
    EXPECT_EQ(m.entries[1].label_token, labels.second) << to_string(strategy);
    EXPECT_EQ(m.strategy, strategy);
  }
}

TEST(BuildMappingTest, SemanticRejectsFourClasses) {
  try {
    build_mapping(vocab(), {"a", "b", "c", "d"}, MappingStrategy::kSemantic);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kMapping);
  }
}

TEST(BuildMappingTest, CapacityLimits) {
  std::vector<std::string> eleven, twenty_seven;
  for (int i = 0; i < 11; ++i) eleven.push_back("c" + std::to_string(i));
  for (int i = 0; i < 27; ++i) twenty_seven.push_back("c" + std::to_string(i));
  EXPECT_THROW(build_mapping(vocab(), eleven, MappingStrategy::kNumerical), Error);
  EXPECT_NO_THROW(build_mapping(vocab(), eleven, MappingStrategy::kAlphabetical));
  EXPECT_THROW(build_mapping(vocab(), twenty_seven, MappingStrategy::kReverseAlphabetical), Error);
  eleven.pop_back();
  const auto ten = build_mapping(vocab(), eleven, MappingStrategy::kReverseNumerical);
  EXPECT_EQ(ten.entries.front().label_token, "9");
  EXPECT_EQ(ten.entries.back().label_token, "0");
}

TEST(MakeMappingTest, RejectsMultiTokenAndDuplicateLabels) {
  EXPECT_THROW(make_mapping(vocab(), {{"a", "yes"}, {"b", "no"}}), Error);
  EXPECT_THROW(make_mapping(vocab(), {{"a", "1"}, {"b", "1"}}), Error);
  EXPECT_THROW(make_mapping(vocab(), {{"a", std::string(tokens::kPlaceholder)}}), Error);
}

TEST(MappingTest, IndexOfUnknownClassListsValidClasses) {
  const auto m = build_mapping(vocab(), kRte, MappingStrategy::kNumerical);
  EXPECT_EQ(m.index_of("not entailment"), 1u);
  try {
    m.index_of("neutral");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kLabel);
    EXPECT_NE(std::string(e.what()).find("entailment, not entailment"), std::string::npos);
  }
}

TEST(CompileTest, RteMappingBlockMatchesReferenceLayout) {
  const CompiledPrompt p = compile(rte_spec(), vocab(), rte_sample(), 256);
  EXPECT_NE(p.text.find("Is the hypothesis entailed by the premise?\n"
                        "Provide answer in format: <ANSWER>#Number</ANSWER>\n"
                        "where the number is one of the following:\n"
                        "0 - entailment\n"
                        "1 - not entailment\n"),
            std::string::npos)
      << p.text;
  EXPECT_NE(p.text.find("<|start_header_id|>assistant<|end_header_id|>\n<ANSWER> <|X|> "
                        "</ANSWER><|eot_id|>"),
            std::string::npos);
  EXPECT_EQ(p.text.rfind("<|begin_of_text|><|start_header_id|>system<|end_header_id|>", 0), 0u);
}

TEST(CompileTest, PlaceholderPositionAndClassIds) {
  const CompiledPrompt p = compile(rte_spec(), vocab(), rte_sample(), 256);
  ASSERT_EQ(p.placeholder_positions.size(), 1u);
  EXPECT_EQ(p.token_ids[p.placeholder_positions[0]], vocab().placeholder_id());
  EXPECT_EQ(std::count(p.token_ids.begin(), p.token_ids.end(), vocab().placeholder_id()), 1);
  EXPECT_EQ(p.class_token_ids,
            (std::vector<std::vector<TokenId>>{{vocab().id("0"), vocab().id("1")}}));
}

TEST(CompileTest, TokenizerRoundTripReproducesText) {
  const CompiledPrompt p = compile(rte_spec(), vocab(), rte_sample(), 256);
  EXPECT_EQ(vocab().decode(p.token_ids), p.text);
}

TEST(CompileTest, IsPure) {
  const auto a = compile(rte_spec(), vocab(), rte_sample(), 256);
  const auto b = compile(rte_spec(), vocab(), rte_sample(), 256);
  EXPECT_EQ(a.token_ids, b.token_ids);
  EXPECT_EQ(a.placeholder_positions, b.placeholder_positions);
}

TEST(CompileTest, FewShotDiffersOnlyByInsertedBlock) {
  PromptSpec zero = rte_spec();
  PromptSpec few = zero;
  few.few_shot = {{{{"premise", "abcdef"}, {"hypothesis", "bcd"}}, {"entailment"}},
                  {{{"premise", "abcdef"}, {"hypothesis", "xyz"}}, {"not entailment"}}};
  const std::string z = render(zero, rte_sample());
  const std::string f = render(few, rte_sample());
  const std::string block =
      "Example:\nGiven the premise:\n<PREMISE> abcdef </PREMISE>\nand hypothesis:\n"
      "<HYPOTHESIS> bcd </HYPOTHESIS>\n<ANSWER> 0 </ANSWER>\n"
      "Example:\nGiven the premise:\n<PREMISE> abcdef </PREMISE>\nand hypothesis:\n"
      "<HYPOTHESIS> xyz </HYPOTHESIS>\n<ANSWER> 1 </ANSWER>\n";
  const std::string anchor = "<|start_header_id|>user<|end_header_id|>\n";
  const auto at = z.find(anchor) + anchor.size();
  std::string expected = z;
  expected.insert(at, block);
  EXPECT_EQ(f, expected);
  // Still one placeholder: demonstrations carry their true label tokens.
  const auto compiled = compile(few, vocab(), rte_sample(), 256);
  EXPECT_EQ(compiled.placeholder_positions.size(), 1u);
}

TEST(CompileTest, StrategiesChangeOnlyMappingLines) {
  const auto a = compile(rte_spec(MappingStrategy::kNumerical), vocab(), rte_sample(), 256);
  const auto b = compile(rte_spec(MappingStrategy::kReverseSemantic), vocab(), rte_sample(), 256);
  ASSERT_EQ(a.token_ids.size(), b.token_ids.size());
  EXPECT_EQ(a.placeholder_positions, b.placeholder_positions);
  std::size_t differing = 0;
  for (std::size_t i = 0; i < a.token_ids.size(); ++i) differing += a.token_ids[i] != b.token_ids[i];
  EXPECT_EQ(differing, 2u);  // the two label tokens of the enumeration
}

TEST(CompileTest, TwoTaskSpecHasTwoPlaceholders) {
  SyntheticTaskSpec topic;
  topic.kind = TaskKind::kTopic;
  const PromptSpec spec = default_prompt(topic, vocab(), MappingStrategy::kNumerical, true);
  const auto p = compile(spec, vocab(), {{"text", "abcdefgh"}}, 256);
  ASSERT_EQ(p.placeholder_positions.size(), 2u);
  EXPECT_LT(p.placeholder_positions[0], p.placeholder_positions[1]);
  ASSERT_EQ(p.class_token_ids.size(), 2u);
  EXPECT_EQ(p.class_token_ids[0].size(), 4u);
  EXPECT_EQ(p.class_token_ids[1], (std::vector<TokenId>{vocab().id("1"), vocab().id("2")}));
  EXPECT_NE(p.text.find("<ANSWER> <|X|> </ANSWER><SOURCE> <|X|> </SOURCE>"), std::string::npos);
}

TEST(CompileTest, MissingSlotIsTemplateError) {
  try {
    compile(rte_spec(), vocab(), {{"premise", "abc"}}, 256);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kTemplate);
    EXPECT_NE(std::string(e.what()).find("hypothesis"), std::string::npos);
  }
}

TEST(CompileTest, InjectedMarkerIsTemplateError) {
  EXPECT_THROW(compile(rte_spec(), vocab(), {{"premise", "a<|X|>"}, {"hypothesis", "a"}}, 256),
               Error);
}

TEST(CompileTest, OverlongPromptIsLengthError) {
  try {
    compile(rte_spec(), vocab(), rte_sample(), 40);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kLength);
  }
}

TEST(TemplateTest, SlotsAndFill) {
  EXPECT_EQ(template_slots("a {x} b {y_2} {x}"), (std::vector<std::string>{"x", "y_2", "x"}));
  EXPECT_EQ(fill_template("[{x}]", {{"x", "v"}}), "[v]");
  EXPECT_THROW(template_slots("{unclosed"), Error);
  EXPECT_THROW(template_slots("{bad name}"), Error);
}

TEST(PromptFileTest, ParseMatchesBuiltSpec) {
  const std::string text = R"(# RTE-style prompt
system = You are a precise text classifier.
instruction <<END
Given the premise:
<PREMISE> {premise} </PREMISE>
and hypothesis:
<HYPOTHESIS> {hypothesis} </HYPOTHESIS>
END

task = entailment
question = Is the hypothesis entailed by the premise?
classes = entailment, not entailment
strategy = numerical
)";
  const PromptSpec parsed = parse_prompt_spec(text, vocab());
  EXPECT_EQ(render(parsed, rte_sample()), render(rte_spec(), rte_sample()));
}

TEST(PromptFileTest, FormatThenParseRoundTrips) {
  SyntheticTaskSpec topic;
  topic.kind = TaskKind::kTopic;
  const PromptSpec two = default_prompt(topic, vocab(), MappingStrategy::kAlphabetical, true);
  const PromptSpec back = parse_prompt_spec(format_prompt_spec(two), vocab());
  EXPECT_EQ(render(back, {{"text", "abc"}}), render(two, {{"text", "abc"}}));
  EXPECT_EQ(back.tasks[1].mapping.strategy, MappingStrategy::kCustom);
  EXPECT_EQ(back.tasks[0].mapping.strategy, MappingStrategy::kAlphabetical);

  SyntheticTaskSpec sim;
  sim.kind = TaskKind::kSimilarity;
  const PromptSpec grid = default_prompt(sim, vocab());
  const PromptSpec grid_back = parse_prompt_spec(format_prompt_spec(grid), vocab());
  EXPECT_EQ(grid_back.tasks[0].grid, grid.tasks[0].grid);
  EXPECT_EQ(pairs_of(grid_back.tasks[0].mapping), pairs_of(grid.tasks[0].mapping));
}

TEST(PromptFileTest, ErrorsCarryLineNumbers) {
  try {
    parse_prompt_spec("instruction = {text}\ntask = t\nbogus = 1\n", vocab(), "p.prompt");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kFormat);
    EXPECT_NE(std::string(e.what()).find("p.prompt:3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_prompt_spec("instruction <<END\n{text}\n", vocab()), Error);
  EXPECT_THROW(parse_prompt_spec("instruction = {text}\n", vocab()), Error);
  EXPECT_THROW(parse_prompt_spec("instruction = {text}\ntask = t\nclasses = a,b\nstrategy = odd\n",
                                 vocab()),
               Error);
}

TEST(PromptFileTest, QuotedValuesKeepSpaces) {
  const PromptSpec p = parse_prompt_spec(
      "instruction = {text}\ntask = t\nclasses = a,b\nanswer_prefix = \"[ \"\n", vocab());
  EXPECT_EQ(p.tasks[0].answer_prefix, "[ ");
}

}  // namespace
}  // namespace salsa
