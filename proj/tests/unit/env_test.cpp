#include <gtest/gtest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "rubricrl/env.hpp"
#include "rubricrl/errors.hpp"
#include "test_support.hpp"

namespace {

using namespace rubricrl;
using test_support::make_instance;
using test_support::TempDir;

std::size_t masked_disagreements(const PreferenceInstance& inst) {
  std::size_t n = 0;
  for (std::size_t j = 0; j < inst.num_attributes(); ++j) {
    if (inst.question_mask[j] && inst.response_a.claims[j] != inst.response_b.claims[j]) ++n;
  }
  return n;
}

// Independent error count: a claim is wrong when it asserts the opposite of
// the truth on a masked attribute.
std::size_t oracle_errors(const PreferenceInstance& inst, const ResponseClaims& r) {
  std::size_t n = 0;
  for (std::size_t j = 0; j < inst.num_attributes(); ++j) {
    if (!inst.question_mask[j]) continue;
    if (r.claims[j] == Mark::AssertsTrue && !inst.truth.values[j]) ++n;
    if (r.claims[j] == Mark::AssertsFalse && inst.truth.values[j]) ++n;
  }
  return n;
}

TEST(DetermineWinner, FewerErrorsWins) {
  const AttributeTruth truth{{1, 0, 1, 1}, {0, 0, 0, 0}};
  const std::vector<std::uint8_t> mask{1, 1, 1, 1};
  const ResponseClaims a{{Mark::AssertsTrue, Mark::AssertsFalse, Mark::AssertsTrue, Mark::Silent}};
  const ResponseClaims b{{Mark::AssertsFalse, Mark::AssertsTrue, Mark::AssertsTrue, Mark::Silent}};
  EXPECT_EQ(error_count(truth, mask, a), 0u);
  EXPECT_EQ(error_count(truth, mask, b), 2u);
  EXPECT_EQ(determine_winner(truth, mask, a, b), Label::A);
  EXPECT_EQ(determine_winner(truth, mask, b, a), Label::B);
}

TEST(DetermineWinner, EqualCountsThrowTieError) {
  const AttributeTruth truth{{1, 0}, {0, 0}};
  const std::vector<std::uint8_t> mask{1, 1};
  const ResponseClaims a{{Mark::AssertsFalse, Mark::AssertsFalse}};
  const ResponseClaims b{{Mark::AssertsTrue, Mark::AssertsTrue}};
  EXPECT_THROW(determine_winner(truth, mask, a, b), TieError);
}

TEST(DetermineWinner, MaskedOutAttributesNeverCount) {
  const AttributeTruth truth{{1, 1, 1}, {0, 0, 0}};
  const std::vector<std::uint8_t> mask{1, 0, 0};
  const ResponseClaims a{{Mark::AssertsTrue, Mark::AssertsFalse, Mark::AssertsFalse}};
  const ResponseClaims b{{Mark::AssertsFalse, Mark::AssertsTrue, Mark::AssertsTrue}};
  EXPECT_EQ(determine_winner(truth, mask, a, b), Label::A);
}

TEST(DetermineWinner, EmptyMaskIsRejected) {
  const AttributeTruth truth{{1, 1}, {0, 0}};
  const std::vector<std::uint8_t> mask{0, 0};
  const ResponseClaims a{{Mark::AssertsTrue, Mark::AssertsTrue}};
  EXPECT_THROW(determine_winner(truth, mask, a, a), InvalidArgument);
}

TEST(GenerateInstance, DeterministicInSeedAndIndex) {
  DatasetSpec spec;
  spec.seed = 42;
  EXPECT_EQ(to_record(generate_instance(spec, 0)), to_record(generate_instance(spec, 0)));
  DatasetSpec other = spec;
  other.seed = 43;
  EXPECT_NE(to_record(generate_instance(spec, 0)), to_record(generate_instance(other, 0)));
}

TEST(GenerateInstance, PlantedDisagreementCountIsExact) {
  for (std::size_t d : {1u, 2u, 3u, 5u}) {
    DatasetSpec spec;
    spec.num_attributes = 6;
    spec.planted_disagreements = d;
    spec.num_instances = 64;
    for (std::size_t i = 0; i < spec.num_instances; ++i) {
      EXPECT_EQ(masked_disagreements(generate_instance(spec, i)), d) << "d=" << d << " index=" << i;
    }
  }
}

TEST(GenerateInstance, InvariantsHoldAcrossTheDefaultSplit) {
  DatasetSpec spec;
  std::set<std::string> categories;
  std::set<std::string> ids;
  for (const auto& inst : generate_range(spec, 0, spec.num_instances)) {
    ASSERT_NO_THROW(inst.validate());
    const auto ea = oracle_errors(inst, inst.response_a);
    const auto eb = oracle_errors(inst, inst.response_b);
    ASSERT_NE(ea, eb);
    EXPECT_EQ(inst.gold_winner, ea < eb ? Label::A : Label::B);
    for (double p : inst.truth.noise_floor) {
      EXPECT_GE(p, spec.noise_low);
      EXPECT_LE(p, spec.noise_high);
    }
    ASSERT_TRUE(inst.category.has_value());
    categories.insert(*inst.category);
    ids.insert(inst.id);
  }
  EXPECT_EQ(ids.size(), spec.num_instances);
  EXPECT_EQ(categories, (std::set<std::string>{"general", "hallucination", "reasoning"}));
}

TEST(GenerateInstance, BothLabelsOccur) {
  DatasetSpec spec;
  std::size_t a = 0;
  const auto data = generate_range(spec, 0, 200);
  for (const auto& inst : data) a += inst.gold_winner == Label::A;
  EXPECT_GT(a, 60u);
  EXPECT_LT(a, 140u);
}

TEST(GenerateInstance, SwappingResponsesFlipsTheWinner) {
  DatasetSpec spec;
  for (const auto& inst : generate_range(spec, 0, 50)) {
    EXPECT_EQ(determine_winner(inst.truth, inst.question_mask, inst.response_b, inst.response_a),
              other(inst.gold_winner));
  }
}

TEST(GenerateInstance, RangeExtendsPastTheTrainingSplit) {
  DatasetSpec spec;
  spec.num_instances = 10;
  const auto heldout = generate_range(spec, 10, 5);
  ASSERT_EQ(heldout.size(), 5u);
  DatasetSpec wide = spec;
  wide.num_instances = 15;
  EXPECT_EQ(to_record(heldout[0]), to_record(generate_instance(wide, 10)));
  EXPECT_THROW(generate_instance(spec, 10), InvalidArgument);
}

TEST(DatasetSpec, RejectsInconsistentSpecs) {
  DatasetSpec spec;
  spec.planted_disagreements = 7;
  EXPECT_THROW(spec.validate(), InvalidArgument);
  spec.planted_disagreements = 0;
  EXPECT_THROW(spec.validate(), InvalidArgument);
  spec = {};
  spec.noise_high = 0.5;
  EXPECT_THROW(spec.validate(), InvalidArgument);
}

TEST(Records, RoundTripIsExact) {
  DatasetSpec spec;
  const auto data = generate_range(spec, 0, 20);
  std::stringstream buf;
  for (const auto& inst : data) buf << to_record(inst) << "\n";
  const auto parsed = parse_records(buf);
  ASSERT_EQ(parsed.size(), data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    EXPECT_EQ(to_record(parsed[i]), to_record(data[i]));
    EXPECT_EQ(parsed[i].source_line, i + 1);
    EXPECT_EQ(parsed[i].id, data[i].id);
  }
}

TEST(Records, EmptyInputGivesEmptyList) {
  std::stringstream empty;
  EXPECT_TRUE(parse_records(empty).empty());
  TempDir dir;
  std::ofstream(dir / "empty.jsonl").close();
  EXPECT_TRUE(load_records(dir / "empty.jsonl").empty());
}

TEST(Records, OneValidRecord) {
  std::stringstream in(
      R"({"id":"x1","truth":[1,0,1],"noise_floor":[0.1,0.2,0.3],"mask":[1,1,0],"response_a":["T","F","-"],)"
      R"("response_b":["F","F","T"],"winner":"A","category":"general"})"
      "\n");
  const auto records = parse_records(in);
  ASSERT_EQ(records.size(), 1u);
  EXPECT_EQ(records[0].id, "x1");
  EXPECT_EQ(records[0].gold_winner, Label::A);
  EXPECT_EQ(records[0].category, "general");
}

std::size_t schema_error_line(const std::string& text) {
  std::stringstream in(text);
  try {
    parse_records(in);
  } catch (const SchemaError& e) {
    return e.line();
  }
  return 0;
}

TEST(Records, MissingWinnerIsSchemaErrorAtLine1) {
  EXPECT_EQ(schema_error_line(R"({"id":"x","truth":[1,0],"noise_floor":[0,0],"mask":[1,1],)"
                              R"("response_a":["T","F"],"response_b":["F","F"]})"),
            1u);
}

TEST(Records, ErrorsReportTheirLine) {
  const std::string good =
      R"({"id":"x","truth":[1,0],"noise_floor":[0,0],"mask":[1,1],"response_a":["T","F"],"response_b":["F","F"],"winner":"A"})";
  EXPECT_EQ(schema_error_line(good + "\n\n{not json\n"), 3u);
  EXPECT_EQ(schema_error_line(good + "\n" + good.substr(0, good.size() - 4) + "\"C\"}\n"), 2u);
  // Wrong gold label and tied responses are invariant violations.
  std::string wrong = good;
  wrong.replace(wrong.find("\"winner\":\"A\""), 12, "\"winner\":\"B\"");
  EXPECT_EQ(schema_error_line(wrong), 1u);
  EXPECT_EQ(schema_error_line(R"({"id":"t","truth":[1,0],"noise_floor":[0,0],"mask":[1,1],)"
                              R"("response_a":["F","F"],"response_b":["T","T"],"winner":"A"})"),
            1u);
  EXPECT_EQ(schema_error_line("\xEF\xBB\xBF" + good), 1u);
  EXPECT_EQ(schema_error_line(R"({"id":"x","truth":[1,0],"noise_floor":[0,0.7],"mask":[1,1],)"
                              R"("response_a":["T","F"],"response_b":["F","F"],"winner":"A"})"),
            1u);
  EXPECT_EQ(schema_error_line(R"({"id":"x","truth":[1,0],"noise_floor":[0,0],"mask":[1,1],)"
                              R"("response_a":["T","Q"],"response_b":["F","F"],"winner":"A"})"),
            1u);
}

TEST(Records, WriteThenLoad) {
  TempDir dir;
  DatasetSpec spec;
  const auto data = generate_range(spec, 0, 8);
  write_records(dir / "d.jsonl", data);
  const auto loaded = load_records(dir / "d.jsonl");
  ASSERT_EQ(loaded.size(), 8u);
  EXPECT_EQ(to_record(loaded[7]), to_record(data[7]));
  EXPECT_THROW(load_records(dir / "missing.jsonl"), IoError);
}

TEST(HandBuilt, HelperProducesValidInstance) {
  const auto inst = make_instance("101", "111", "TFT", "FFT");
  EXPECT_NO_THROW(inst.validate());
  EXPECT_EQ(inst.gold_winner, Label::A);
}

}  // namespace
