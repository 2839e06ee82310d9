#ifndef RUBRICRL_ERRORS_HPP_
#define RUBRICRL_ERRORS_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rubricrl {

// Base of every error the library raises. `kind()` is a stable tag used in
// machine-readable error records.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define RUBRICRL_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                         \
   public:                                                            \
    explicit Name(const std::string& message) : Error(#Name, message) {} \
  }

RUBRICRL_DEFINE_ERROR(InvalidArgument);
RUBRICRL_DEFINE_ERROR(GenerationExhausted);
RUBRICRL_DEFINE_ERROR(TieError);
RUBRICRL_DEFINE_ERROR(SamplingExhausted);
RUBRICRL_DEFINE_ERROR(NonFiniteGradient);
RUBRICRL_DEFINE_ERROR(PoolExhausted);
RUBRICRL_DEFINE_ERROR(ParseError);
RUBRICRL_DEFINE_ERROR(TransportError);
RUBRICRL_DEFINE_ERROR(TranscriptMiss);
RUBRICRL_DEFINE_ERROR(IoError);
RUBRICRL_DEFINE_ERROR(ConfigError);

#undef RUBRICRL_DEFINE_ERROR

// Malformed record in a newline-delimited file. Lines are 1-based.
class SchemaError : public Error {
 public:
  SchemaError(std::size_t line, const std::string& message)
      : Error("SchemaError", "line " + std::to_string(line) + ": " + message),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class MissingBinding : public Error {
 public:
  explicit MissingBinding(std::string placeholder)
      : Error("MissingBinding", "missing binding for placeholder {" + placeholder + "}"),
        placeholder_(std::move(placeholder)) {}

  const std::string& placeholder() const noexcept { return placeholder_; }

 private:
  std::string placeholder_;
};

}  // namespace rubricrl

#endif  // RUBRICRL_ERRORS_HPP_
