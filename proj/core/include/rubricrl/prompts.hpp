#ifndef RUBRICRL_PROMPTS_HPP_
#define RUBRICRL_PROMPTS_HPP_

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rubricrl/env.hpp"

namespace rubricrl {

enum class TemplateName : std::uint8_t {
  NoRubricEval,
  StaticRubricEval,
  DeltaRubricEval,
  Planner,
  NoRubricProbe,
  ChecklistProbe,
};

struct PromptTemplate {
  TemplateName name;
  std::string_view key;   // e.g. "no_rubric_eval"; also the fixture file stem
  std::string_view body;  // placeholders: {question} {response_a} {response_b} {checklist} {rubric}

  // Distinct placeholder names in order of first appearance.
  std::vector<std::string> placeholders() const;
};

const PromptTemplate& prompt_template(TemplateName name);
std::span<const PromptTemplate> all_templates();
std::optional<TemplateName> template_from_key(std::string_view key);

// The fixed five-criterion rubric bound to {rubric} by the static-rubric judge.
std::string_view static_rubric_text();

using Bindings = std::map<std::string, std::string, std::less<>>;

// Substitutes every placeholder verbatim; bound values are not rescanned.
// Throws MissingBinding naming the first unbound placeholder.
std::string render(const PromptTemplate& tmpl, const Bindings& bindings);

// Label of the last "[[A]]" / "[[B]]" marker. Throws ParseError if none.
Label parse_verdict(std::string_view output);

// Text of every line starting with "1." .. "9." (after leading whitespace),
// in order. Throws ParseError with fewer than two such lines.
std::vector<std::string> parse_checklist(std::string_view output);

// Checklist binding: each item on its own numbered line, preceded by a newline.
std::string format_checklist(std::span<const std::string> items);

}  // namespace rubricrl

#endif  // RUBRICRL_PROMPTS_HPP_
