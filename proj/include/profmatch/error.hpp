#pragma once

#include <stdexcept>
#include <string>

namespace profmatch {

/// Whether a failure traces back to bad input (exit code 1) or to a numerical
/// breakdown during computation (exit code 2).
enum class ErrorKind { user, numerical };

/// Base of every error raised by the library. `code()` is a stable,
/// machine-readable name such as "RankError".
class Error : public std::runtime_error {
 public:
  Error(std::string code, ErrorKind kind, const std::string& message)
      : std::runtime_error(message),
        code_(std::move(code)),
        kind_(kind),
        message_(message) {}

  const char* what() const noexcept override { return message_.c_str(); }
  const std::string& code() const noexcept { return code_; }
  ErrorKind kind() const noexcept { return kind_; }

  /// Prefixes "context: " to the message; rethrow with `throw;` to keep the
  /// dynamic type.
  void add_context(const std::string& context) {
    message_ = context + ": " + message_;
  }

 private:
  std::string code_;
  ErrorKind kind_;
  std::string message_;
};

#define PROFMATCH_DEFINE_ERROR(Name, Kind)                   \
  class Name : public Error {                                \
   public:                                                   \
    explicit Name(const std::string& message)                \
        : Error(#Name, ErrorKind::Kind, message) {}          \
  };

// numerics
PROFMATCH_DEFINE_ERROR(DomainError, user)
PROFMATCH_DEFINE_ERROR(EmptyInputError, user)
PROFMATCH_DEFINE_ERROR(FactorizationError, numerical)
// glm
PROFMATCH_DEFINE_ERROR(RankError, numerical)
PROFMATCH_DEFINE_ERROR(SeparationError, numerical)
PROFMATCH_DEFINE_ERROR(DegenerateResponseError, numerical)
PROFMATCH_DEFINE_ERROR(UnderdeterminedError, numerical)
PROFMATCH_DEFINE_ERROR(ShapeError, user)
// balance
PROFMATCH_DEFINE_ERROR(ColumnError, user)
PROFMATCH_DEFINE_ERROR(DataError, user)
PROFMATCH_DEFINE_ERROR(ZeroVarianceError, numerical)
PROFMATCH_DEFINE_ERROR(DegenerateWeightsError, numerical)
// solver / matching
PROFMATCH_DEFINE_ERROR(LpError, numerical)
PROFMATCH_DEFINE_ERROR(SizeError, user)
// estimators / simulation
PROFMATCH_DEFINE_ERROR(EmptyArmError, numerical)
PROFMATCH_DEFINE_ERROR(PositivityError, numerical)
PROFMATCH_DEFINE_ERROR(BootstrapDegenerateError, numerical)
PROFMATCH_DEFINE_ERROR(ScenarioDegenerateError, numerical)
// paired analysis
PROFMATCH_DEFINE_ERROR(DegenerateError, numerical)
// cli / io
PROFMATCH_DEFINE_ERROR(ConfigError, user)
PROFMATCH_DEFINE_ERROR(ParseError, user)
PROFMATCH_DEFINE_ERROR(ProfileFormatError, user)

#undef PROFMATCH_DEFINE_ERROR

}  // namespace profmatch
