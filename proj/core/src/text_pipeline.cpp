#include "rubricrl/text_pipeline.hpp"

#include <atomic>
#include <exception>
#include <fstream>
#include <nlohmann/json.hpp>
#include <thread>

#include "rubricrl/errors.hpp"

namespace rubricrl {

namespace {

std::string required_string(const nlohmann::json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) {
    throw SchemaError(line, std::string("field \"") + key + "\" must be a string");
  }
  return it->get<std::string>();
}

std::optional<std::string> optional_string(const nlohmann::json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw SchemaError(line, std::string("field \"") + key + "\" must be a string");
  return it->get<std::string>();
}

Bindings base_bindings(const TextInstance& inst) {
  return {{"question", inst.question}, {"response_a", inst.response_a}, {"response_b", inst.response_b}};
}

std::optional<Label> try_parse_verdict(const std::string& output) {
  try {
    return parse_verdict(output);
  } catch (const ParseError&) {
    return std::nullopt;
  }
}

TextJudgment judge_with(Backend& backend, const TextInstance& inst, TemplateName name, const Bindings& extra,
                        const GenerationOptions& options) {
  TextJudgment j;
  j.output = backend.generate(build_request(inst, name, extra, options.judge_max_tokens, options.temperature)).content;
  j.verdict = try_parse_verdict(j.output);
  return j;
}

}  // namespace

std::vector<TextInstance> parse_text_records(std::istream& in) {
  std::vector<TextInstance> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (number == 1 && line.starts_with("\xEF\xBB\xBF")) throw SchemaError(1, "byte-order mark is not allowed");
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw SchemaError(number, std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) throw SchemaError(number, "record must be a JSON object");
    TextInstance inst;
    inst.source_line = number;
    inst.id = required_string(obj, "id", number);
    inst.question = required_string(obj, "question", number);
    inst.response_a = required_string(obj, "response_a", number);
    inst.response_b = required_string(obj, "response_b", number);
    const auto winner = required_string(obj, "winner", number);
    if (winner != "A" && winner != "B") throw SchemaError(number, "\"winner\" must be \"A\" or \"B\"");
    inst.winner = winner == "A" ? Label::A : Label::B;
    inst.category = optional_string(obj, "category", number);
    inst.image_path = optional_string(obj, "image", number);
    out.push_back(std::move(inst));
  }
  return out;
}

std::vector<TextInstance> load_text_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return parse_text_records(in);
}

BackendRequest build_request(const TextInstance& inst, TemplateName name, const Bindings& extra,
                             std::size_t max_tokens, double temperature, bool with_image) {
  Bindings bindings = base_bindings(inst);
  for (const auto& [k, v] : extra) bindings[k] = v;
  BackendRequest req;
  Message msg;
  msg.role = Message::Role::User;
  msg.content = render(prompt_template(name), bindings);
  if (with_image) msg.image_path = inst.image_path;
  req.messages.push_back(std::move(msg));
  req.temperature = temperature;
  req.max_tokens = max_tokens;
  return req;
}

TextJudgment judge_text(Backend& backend, const TextInstance& inst, JudgeMode mode, const GenerationOptions& options) {
  switch (mode) {
    case JudgeMode::NoRubric:
      return judge_with(backend, inst, TemplateName::NoRubricEval, {}, options);
    case JudgeMode::StaticRubric:
      return judge_with(backend, inst, TemplateName::StaticRubricEval, {{"rubric", std::string(static_rubric_text())}},
                        options);
    case JudgeMode::DeltaRubric:
    case JudgeMode::TextOnlyPlanner:
    case JudgeMode::FrozenPlannerCheckpoint:
      break;
  }
  const bool planner_sees_image = mode != JudgeMode::TextOnlyPlanner;
  const auto plan = backend.generate(
      build_request(inst, TemplateName::Planner, {}, options.planner_max_tokens, options.temperature, planner_sees_image));

  std::vector<std::string> items;
  FilterResult filter = FilterResult::reject(FilterReason::Size);
  try {
    items = parse_checklist(plan.content);
    filter = neutrality_filter(items);
  } catch (const ParseError&) {
  }
  if (!filter.accepted) {
    auto j = judge_with(backend, inst, TemplateName::NoRubricEval, {}, options);
    j.fallback = true;
    j.filter_reason = filter.reason;
    j.checklist = std::move(items);
    return j;
  }
  auto j = judge_with(backend, inst, TemplateName::DeltaRubricEval, {{"checklist", format_checklist(items)}}, options);
  j.checklist = std::move(items);
  return j;
}

ProbeResult probe_text(Backend& backend, const TextInstance& inst, std::span<const std::string> checklist,
                       const GenerationOptions& options) {
  ProbeResult r;
  r.baseline = try_parse_verdict(
      backend.generate(build_request(inst, TemplateName::NoRubricProbe, {}, options.probe_max_tokens, options.temperature))
          .content);
  r.probed = try_parse_verdict(backend
                                   .generate(build_request(inst, TemplateName::ChecklistProbe,
                                                           {{"checklist", format_checklist(checklist)}},
                                                           options.probe_max_tokens, options.temperature))
                                   .content);
  return r;
}

EvalReport evaluate_text(Backend& backend, std::span<const TextInstance> dataset, JudgeMode mode,
                         const GenerationOptions& options, std::size_t max_in_flight) {
  if (dataset.empty()) throw InvalidArgument("evaluation dataset is empty");
  std::vector<InstanceRecord> records(dataset.size());
  std::vector<std::exception_ptr> errors(dataset.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < dataset.size(); i = next++) {
      const auto& inst = dataset[i];
      try {
        const auto j = judge_text(backend, inst, mode, options);
        records[i] = {inst.id, inst.category.value_or(std::string(kUncategorized)), j.verdict, inst.winner,
                      std::string(to_string(mode)), j.fallback};
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const std::size_t workers = std::max<std::size_t>(1, std::min(max_in_flight, dataset.size()));
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return EvalReport::aggregate(std::move(records));
}

}  // namespace rubricrl
