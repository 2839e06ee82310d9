#include "rubricrl/checkpoint.hpp"

#include <charconv>
#include <sstream>

#include "rubricrl/errors.hpp"
#include "rubricrl/io.hpp"

namespace rubricrl {

namespace {

constexpr std::string_view kMagic = "rubricrl-checkpoint 1";

template <typename T>
T parse_number(std::string_view s, std::string_view what) {
  T value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw SchemaError(0, "checkpoint: bad " + std::string(what) + " \"" + std::string(s) + "\"");
  }
  return value;
}

class LineReader {
 public:
  explicit LineReader(std::string_view text) : text_(text) {}

  std::string_view next() {
    if (pos_ > text_.size()) throw SchemaError(line_, "checkpoint truncated");
    auto end = text_.find('\n', pos_);
    if (end == std::string_view::npos) end = text_.size();
    auto line = text_.substr(pos_, end - pos_);
    pos_ = end + 1;
    ++line_;
    return line;
  }

  std::string_view field(std::string_view key) {
    auto line = next();
    if (!line.starts_with(key) || line.size() <= key.size() || line[key.size()] != ' ') {
      throw SchemaError(line_, "checkpoint: expected \"" + std::string(key) + "\"");
    }
    return line.substr(key.size() + 1);
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const PolicyParams& params) {
  std::ostringstream out;
  out << kMagic << '\n';
  out << "num_attributes " << params.num_attributes << '\n';
  out << "features_per_attribute " << kFeaturesPerAttribute << '\n';
  out << "version " << params.version << '\n';
  out << "noise_reduction " << format_double(params.noise_reduction) << '\n';
  const auto flat = params.flatten();
  out << "values " << flat.size() << '\n';
  for (double v : flat) out << format_double(v) << '\n';
  return out.str();
}

PolicyParams parse_checkpoint(std::string_view text) {
  LineReader in(text);
  if (in.next() != kMagic) throw SchemaError(1, "not a rubricrl checkpoint");
  PolicyParams params;
  params.num_attributes = parse_number<std::size_t>(in.field("num_attributes"), "num_attributes");
  if (params.num_attributes < 2) throw SchemaError(2, "checkpoint: num_attributes must be >= 2");
  if (parse_number<std::size_t>(in.field("features_per_attribute"), "features_per_attribute") !=
      kFeaturesPerAttribute) {
    throw SchemaError(3, "checkpoint: unsupported feature layout");
  }
  params.version = parse_number<std::uint64_t>(in.field("version"), "version");
  params.noise_reduction = parse_number<double>(in.field("noise_reduction"), "noise_reduction");
  const auto count = parse_number<std::size_t>(in.field("values"), "values");
  params.planner_weights.resize(params.planner_size());
  params.verifier_weights.resize(params.num_attributes);
  if (count != params.size()) throw SchemaError(6, "checkpoint: value count does not match K");
  std::vector<double> flat(count);
  for (auto& v : flat) v = parse_number<double>(in.next(), "value");
  params.assign(flat);
  try {
    params.validate();
  } catch (const Error& e) {
    throw SchemaError(0, std::string("checkpoint: ") + e.what());
  }
  return params;
}

void save_checkpoint(const std::filesystem::path& path, const PolicyParams& params) {
  atomic_write(path, serialize_checkpoint(params));
}

PolicyParams load_checkpoint(const std::filesystem::path& path) { return parse_checkpoint(read_file(path)); }

}  // namespace rubricrl
