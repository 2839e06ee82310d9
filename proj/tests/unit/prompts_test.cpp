#include <gtest/gtest.h>

#include <fstream>
#include <nlohmann/json.hpp>
#include <set>

#include "rubricrl/errors.hpp"
#include "rubricrl/io.hpp"
#include "rubricrl/prompts.hpp"

namespace {

using namespace rubricrl;

const std::filesystem::path kFixtures = RUBRICRL_FIXTURE_DIR;

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::vector<nlohmann::json> out;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.push_back(nlohmann::json::parse(line));
  }
  return out;
}

Bindings fixture_bindings() {
  const auto json = nlohmann::json::parse(read_file(kFixtures / "rendered" / "bindings.json"));
  Bindings b;
  for (const auto& [k, v] : json.items()) b[k] = v.get<std::string>();
  return b;
}

TEST(Templates, SixTemplatesWithStableKeys) {
  std::set<std::string_view> keys;
  for (const auto& t : all_templates()) {
    keys.insert(t.key);
    EXPECT_EQ(template_from_key(t.key), t.name);
    EXPECT_EQ(&prompt_template(t.name), &t);
  }
  EXPECT_EQ(keys, (std::set<std::string_view>{"no_rubric_eval", "static_rubric_eval", "delta_rubric_eval", "planner",
                                              "no_rubric_probe", "checklist_probe"}));
  EXPECT_FALSE(template_from_key("judge").has_value());
}

TEST(Templates, BodiesMatchFixturesByteForByte) {
  for (const auto& t : all_templates()) {
    EXPECT_EQ(std::string(t.body), read_file(kFixtures / "prompts" / (std::string(t.key) + ".txt"))) << t.key;
  }
  EXPECT_EQ(std::string(static_rubric_text()), read_file(kFixtures / "prompts" / "static_rubric.txt"));
}

TEST(Templates, RenderedPromptsMatchFixtures) {
  const auto bindings = fixture_bindings();
  for (const auto& t : all_templates()) {
    const auto text = render(t, bindings);
    EXPECT_EQ(text, read_file(kFixtures / "rendered" / (std::string(t.key) + ".txt"))) << t.key;
    for (const auto& p : t.placeholders()) EXPECT_EQ(text.find("{" + p + "}"), std::string::npos) << t.key;
  }
}

TEST(Templates, PlaceholdersInOrderOfAppearance) {
  EXPECT_EQ(prompt_template(TemplateName::NoRubricEval).placeholders(),
            (std::vector<std::string>{"question", "response_a", "response_b"}));
  const auto delta = prompt_template(TemplateName::DeltaRubricEval).placeholders();
  EXPECT_NE(std::find(delta.begin(), delta.end(), "checklist"), delta.end());
  const auto fixed = prompt_template(TemplateName::StaticRubricEval).placeholders();
  EXPECT_NE(std::find(fixed.begin(), fixed.end(), "rubric"), fixed.end());
}

TEST(Templates, PlannerStatesTheSizeRule) {
  EXPECT_NE(prompt_template(TemplateName::Planner).body.find("numbered list of 2-4 checks"), std::string_view::npos);
}

TEST(Render, MissingBindingNamesThePlaceholder) {
  auto bindings = fixture_bindings();
  bindings.erase("checklist");
  try {
    render(prompt_template(TemplateName::DeltaRubricEval), bindings);
    FAIL() << "expected MissingBinding";
  } catch (const MissingBinding& e) {
    EXPECT_EQ(e.placeholder(), "checklist");
  }
}

TEST(Render, BoundValuesAreNotRescanned) {
  auto bindings = fixture_bindings();
  bindings["question"] = "what is {response_a}?";
  const auto text = render(prompt_template(TemplateName::NoRubricEval), bindings);
  EXPECT_NE(text.find("what is {response_a}?"), std::string::npos);
}

TEST(FormatChecklist, NumberedLinesAfterANewline) {
  const std::vector<std::string> items{"Check whether the shoes are white.", "Count the people in the image."};
  EXPECT_EQ(format_checklist(items), fixture_bindings().at("checklist"));
}

TEST(ParseVerdict, JudgeCorpus) {
  const auto corpus = read_jsonl(kFixtures / "corpus" / "judge_outputs.jsonl");
  ASSERT_GE(corpus.size(), 10u);
  for (const auto& rec : corpus) {
    const auto output = rec["output"].get<std::string>();
    EXPECT_EQ(std::string(1, to_char(parse_verdict(output))), rec["verdict"].get<std::string>()) << output;
  }
}

TEST(ParseChecklist, PlannerCorpus) {
  const auto corpus = read_jsonl(kFixtures / "corpus" / "planner_outputs.jsonl");
  ASSERT_GE(corpus.size(), 5u);
  for (const auto& rec : corpus) {
    const auto output = rec["output"].get<std::string>();
    EXPECT_EQ(parse_checklist(output), rec["items"].get<std::vector<std::string>>()) << output;
  }
}

TEST(Parsers, MalformedOutputsRaiseParseError) {
  const auto corpus = read_jsonl(kFixtures / "corpus" / "malformed_outputs.jsonl");
  ASSERT_FALSE(corpus.empty());
  for (const auto& rec : corpus) {
    const auto output = rec["output"].get<std::string>();
    if (rec["parser"] == "verdict") {
      EXPECT_THROW(parse_verdict(output), ParseError) << output;
    } else {
      EXPECT_THROW(parse_checklist(output), ParseError) << output;
    }
  }
}

TEST(ParseChecklist, KeepsItemsBeyondTheFourth) {
  EXPECT_EQ(parse_checklist("1. a\n2. b\n3. c\n4. d\n5. e\n").size(), 5u);
}

}  // namespace
