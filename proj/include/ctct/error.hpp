#pragma once

#include <stdexcept>
#include <string>

namespace ctct {

enum class ErrorKind {
  UnsupportedFormat,
  TruncatedFile,
  IoError,
  DimensionMismatch,
  SingularHomography,
  InvalidUtf8,
  EmptyVocabulary,
  InvalidConfig,
  MissingGlyph,
  WordTooWide,
  ShapeError,
  NonUnitHeight,
  InfeasibleTarget,
  InstanceTooLarge,
  EmptyCorpus,
  BadCheckpoint,
  NumericError,
};

const char* error_kind_name(ErrorKind k);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(std::string(error_kind_name(kind)) + ": " + msg),
        kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorKind::TruncatedFile: return "TruncatedFile";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::SingularHomography: return "SingularHomography";
    case ErrorKind::InvalidUtf8: return "InvalidUtf8";
    case ErrorKind::EmptyVocabulary: return "EmptyVocabulary";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::MissingGlyph: return "MissingGlyph";
    case ErrorKind::WordTooWide: return "WordTooWide";
    case ErrorKind::ShapeError: return "ShapeError";
    case ErrorKind::NonUnitHeight: return "NonUnitHeight";
    case ErrorKind::InfeasibleTarget: return "InfeasibleTarget";
    case ErrorKind::InstanceTooLarge: return "InstanceTooLarge";
    case ErrorKind::EmptyCorpus: return "EmptyCorpus";
    case ErrorKind::BadCheckpoint: return "BadCheckpoint";
    case ErrorKind::NumericError: return "NumericError";
  }
  return "Unknown";
}

}  // namespace ctct
