#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ppgscreen {

enum class ErrorKind {
  MissingFile,
  SchemaError,
  ParseError,
  IoError,
  EmptyInput,
  InvalidSpec,
  TooShort,
  NoValleys,
  NoPeak,
  DegenerateCycle,
  MissingMetadata,
  EmptyClass,
  SingleClass,
  NonFinite,
  LengthMismatch,
  TooFewSubjects,
  ConfigError,
};

std::string_view to_string(ErrorKind kind);

/// Process exit code for an error kind.
///   2  input could not be read (MissingFile, SchemaError, ParseError, IoError)
///   3  not enough data for the requested analysis
///   4  everything else (bad configuration, numerical failure)
int exit_code(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace ppgscreen
