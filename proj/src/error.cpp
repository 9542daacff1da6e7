#include "ppgscreen/error.hpp"

namespace ppgscreen {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MissingFile: return "MissingFile";
    case ErrorKind::SchemaError: return "SchemaError";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::TooShort: return "TooShort";
    case ErrorKind::NoValleys: return "NoValleys";
    case ErrorKind::NoPeak: return "NoPeak";
    case ErrorKind::DegenerateCycle: return "DegenerateCycle";
    case ErrorKind::MissingMetadata: return "MissingMetadata";
    case ErrorKind::EmptyClass: return "EmptyClass";
    case ErrorKind::SingleClass: return "SingleClass";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::TooFewSubjects: return "TooFewSubjects";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MissingFile:
    case ErrorKind::SchemaError:
    case ErrorKind::ParseError:
    case ErrorKind::IoError:
      return 2;
    case ErrorKind::TooFewSubjects:
    case ErrorKind::EmptyInput:
    case ErrorKind::EmptyClass:
    case ErrorKind::SingleClass:
      return 3;
    default:
      return 4;
  }
}

}  // namespace ppgscreen
