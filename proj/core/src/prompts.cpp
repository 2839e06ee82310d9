#include "rubricrl/prompts.hpp"

#include <algorithm>
#include <cctype>

#include "rubricrl/errors.hpp"

namespace rubricrl {

namespace {

// Template bodies, byte for byte. Paragraphs are separated by one blank line
// and there is no trailing newline.

constexpr std::string_view kNoRubricEvalBody = R"tmpl(You are a fair judge. Decide which response better answers the question below based on the image.

Question: {question}

Response A: {response_a}

Response B: {response_b}

Compare the two responses and assess which one is better. Then give your overall judgment.

Analysis: <compare both responses>

Justification: <overall reasoning>

Winner: [[A]] or [[B]])tmpl";

constexpr std::string_view kStaticRubricEvalBody = R"tmpl(You are a fair judge. Decide which response better answers the question below based on the image.

Question: {question}

Evaluation Criteria: {rubric}

Response A: {response_a}

Response B: {response_b}

Use the rubric as guidance, not as evidence. If any criterion is irrelevant, too vague, or contradicted by the image/question, ignore that criterion.

For each evaluation criterion, compare the two responses and assess which one is better. Then give your overall judgment.

Analysis:<evaluate criterion by criterion>

Justification: <overall reasoning>

Winner: [[A]] or [[B]])tmpl";

constexpr std::string_view kDeltaRubricEvalBody = R"tmpl(You are a fair judge. Decide which response better answers the question below based on the image.

Use the verification checklist as a sequence of checks to execute, not as evidence. If a checklist item is irrelevant, too vague, or contradicted by the image/question, ignore that item.

Question: {question}

Verification Checklist:{checklist}

Response A: {response_a}

Response B: {response_b}

Execute the checklist item by item. For each item, state the evidence and which response it favors. Keep the full answer concise.

Analysis:<work through each checklist item with evidence>

Justification: <one short sentence aggregating the checklist results>

Winner: [[A]] or [[B]])tmpl";

constexpr std::string_view kPlannerBody = R"tmpl(You are preparing an executable verification checklist for judging which of two responses better answers a visual question. Read both responses, identify the decisive disagreements, and write a short checklist that can be executed item by item.

Question: {question}

Response A: {response_a}

Response B: {response_b}

Write a numbered list of 2-4 checks. Rules:

- Each check must describe exactly one concrete fact, relation, or constraint to verify from the image.

- Focus strictly on decisive disagreements or contradictory claims in the responses, not generic advice.

- Keep each check neutral and evidence-seeking.

- Do NOT mention Response A or Response B by name.

- Do NOT say which response is better or correct.

- No preamble, no explanation, only the numbered checks.

Verification Checklist:)tmpl";

constexpr std::string_view kNoRubricProbeBody = R"tmpl(You are a fair judge. Decide which response better answers the question below based on the image.

Question: {question}

Response A: {response_a}

Response B: {response_b}

Answer ONLY with [[A]] or [[B]].)tmpl";

constexpr std::string_view kChecklistProbeBody = R"tmpl(You are a fair judge. Decide which response better answers the question below based on the image.

Question: {question}

Verification Checklist: {checklist}

Response A: {response_a}

Response B: {response_b}

Use the verification checklist only as a shortlist of checks. Answer ONLY with [[A]] or [[B]].)tmpl";

constexpr std::string_view kStaticRubric = R"tmpl(1. Directly answers the question using the information relevant to the image.

2. Makes factual claims that are consistent with the image and avoids unsupported details.

3. Correctly identifies important visual information when it matters for the question.

4. Uses sound reasoning and logical inference where needed.

5. Gives a clear and complete answer.)tmpl";

const PromptTemplate kTemplates[] = {
    PromptTemplate{TemplateName::NoRubricEval, "no_rubric_eval", kNoRubricEvalBody},
    PromptTemplate{TemplateName::StaticRubricEval, "static_rubric_eval", kStaticRubricEvalBody},
    PromptTemplate{TemplateName::DeltaRubricEval, "delta_rubric_eval", kDeltaRubricEvalBody},
    PromptTemplate{TemplateName::Planner, "planner", kPlannerBody},
    PromptTemplate{TemplateName::NoRubricProbe, "no_rubric_probe", kNoRubricProbeBody},
    PromptTemplate{TemplateName::ChecklistProbe, "checklist_probe", kChecklistProbeBody},
};

bool is_placeholder_char(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }

// Finds the placeholder starting at body[pos] == '{'; returns its name or
// an empty view.
std::string_view placeholder_at(std::string_view body, std::size_t pos) {
  std::size_t end = pos + 1;
  while (end < body.size() && is_placeholder_char(body[end])) ++end;
  if (end == pos + 1 || end >= body.size() || body[end] != '}') return {};
  return body.substr(pos + 1, end - pos - 1);
}

}  // namespace

std::vector<std::string> PromptTemplate::placeholders() const {
  std::vector<std::string> names;
  for (std::size_t pos = body.find('{'); pos != std::string_view::npos; pos = body.find('{', pos + 1)) {
    const auto name = placeholder_at(body, pos);
    if (!name.empty() && std::find(names.begin(), names.end(), name) == names.end()) names.emplace_back(name);
  }
  return names;
}

const PromptTemplate& prompt_template(TemplateName name) { return kTemplates[static_cast<std::size_t>(name)]; }

std::span<const PromptTemplate> all_templates() { return kTemplates; }

std::optional<TemplateName> template_from_key(std::string_view key) {
  for (const auto& t : kTemplates) {
    if (t.key == key) return t.name;
  }
  return std::nullopt;
}

std::string_view static_rubric_text() { return kStaticRubric; }

std::string render(const PromptTemplate& tmpl, const Bindings& bindings) {
  std::string out;
  out.reserve(tmpl.body.size() + 256);
  std::size_t pos = 0;
  while (pos < tmpl.body.size()) {
    const std::size_t open = tmpl.body.find('{', pos);
    if (open == std::string_view::npos) {
      out.append(tmpl.body.substr(pos));
      break;
    }
    out.append(tmpl.body.substr(pos, open - pos));
    const auto name = placeholder_at(tmpl.body, open);
    if (name.empty()) {
      out.push_back('{');
      pos = open + 1;
      continue;
    }
    const auto it = bindings.find(name);
    if (it == bindings.end()) throw MissingBinding(std::string(name));
    out.append(it->second);
    pos = open + name.size() + 2;
  }
  return out;
}

Label parse_verdict(std::string_view output) {
  const auto a = output.rfind("[[A]]");
  const auto b = output.rfind("[[B]]");
  if (a == std::string_view::npos && b == std::string_view::npos) {
    throw ParseError("no [[A]] or [[B]] verdict marker in output");
  }
  if (a == std::string_view::npos) return Label::B;
  if (b == std::string_view::npos) return Label::A;
  return a > b ? Label::A : Label::B;
}

std::vector<std::string> parse_checklist(std::string_view output) {
  std::vector<std::string> items;
  std::size_t pos = 0;
  while (pos <= output.size()) {
    std::size_t end = output.find('\n', pos);
    if (end == std::string_view::npos) end = output.size();
    std::string_view line = output.substr(pos, end - pos);
    pos = end + 1;
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string_view::npos) continue;
    line.remove_prefix(first);
    if (line.size() < 2 || line[0] < '1' || line[0] > '9' || line[1] != '.') continue;
    line.remove_prefix(2);
    const auto text_begin = line.find_first_not_of(" \t");
    const auto text_end = line.find_last_not_of(" \t\r");
    items.emplace_back(text_begin == std::string_view::npos ? std::string_view{}
                                                            : line.substr(text_begin, text_end - text_begin + 1));
  }
  if (items.size() < 2) throw ParseError("expected at least 2 numbered checklist lines, found " + std::to_string(items.size()));
  return items;
}

std::string format_checklist(std::span<const std::string> items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    out += '\n';
    out += std::to_string(i + 1);
    out += ". ";
    out += items[i];
  }
  return out;
}

}  // namespace rubricrl
