#ifndef RUBRICRL_ENV_HPP_
#define RUBRICRL_ENV_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rubricrl {

enum class Label : std::uint8_t { A, B };

inline Label other(Label l) { return l == Label::A ? Label::B : Label::A; }
inline char to_char(Label l) { return l == Label::A ? 'A' : 'B'; }

// Ternary claim a response makes about one attribute.
enum class Mark : std::uint8_t { AssertsTrue, AssertsFalse, Silent };

// Latent ground truth standing in for the image: K binary attribute values and
// the probability of misperceiving each one.
struct AttributeTruth {
  std::vector<std::uint8_t> values;
  std::vector<double> noise_floor;

  std::size_t size() const { return values.size(); }
  void validate() const;
};

struct ResponseClaims {
  std::vector<Mark> claims;

  void validate(std::size_t num_attributes) const;
};

struct PreferenceInstance {
  std::string id;
  AttributeTruth truth;
  std::vector<std::uint8_t> question_mask;
  ResponseClaims response_a;
  ResponseClaims response_b;
  Label gold_winner = Label::A;
  std::optional<std::string> category;
  // 1-based line of the source record, 0 for generated instances.
  std::size_t source_line = 0;

  std::size_t num_attributes() const { return truth.size(); }
  const ResponseClaims& response(Label l) const { return l == Label::A ? response_a : response_b; }
  // Throws InvalidArgument (or TieError) when an invariant is broken.
  void validate() const;
};

struct DatasetSpec {
  std::size_t num_instances = 512;
  std::size_t num_attributes = 6;
  std::size_t planted_disagreements = 3;
  std::uint64_t seed = 7;
  double noise_low = 0.05;
  double noise_high = 0.45;

  void validate() const;
};

// Category tags assigned by the generator.
inline constexpr std::string_view kCategoryGeneral = "general";
inline constexpr std::string_view kCategoryHallucination = "hallucination";
inline constexpr std::string_view kCategoryReasoning = "reasoning";

// Number of non-silent claims contradicting the truth over masked attributes.
std::size_t error_count(const AttributeTruth& truth, std::span<const std::uint8_t> mask,
                        const ResponseClaims& response);

// Response with strictly fewer masked claim errors. Throws TieError on equal
// counts.
Label determine_winner(const AttributeTruth& truth, std::span<const std::uint8_t> mask,
                       const ResponseClaims& a, const ResponseClaims& b);

// Pure function of (spec, index). Throws GenerationExhausted when no tie-free
// instance is found within 64 derived sub-seeds.
PreferenceInstance generate_instance(const DatasetSpec& spec, std::size_t index);

// Instances [first, first + count) of the dataset's index space. The upper bound
// is not checked against spec.num_instances so held-out splits can extend it.
std::vector<PreferenceInstance> generate_range(const DatasetSpec& spec, std::size_t first,
                                               std::size_t count);

// Newline-delimited record I/O. Parsing validates every record and reports
// failures as SchemaError with the 1-based line number.
std::vector<PreferenceInstance> parse_records(std::istream& in);
std::vector<PreferenceInstance> load_records(const std::filesystem::path& path);
std::string to_record(const PreferenceInstance& instance);
void write_records(const std::filesystem::path& path, std::span<const PreferenceInstance> instances);

}  // namespace rubricrl

#endif  // RUBRICRL_ENV_HPP_
